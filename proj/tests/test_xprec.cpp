#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "detspace/common.hpp"
#include "detspace/xprec.hpp"
#include "support/helpers.hpp"

using namespace detspace;
using detspace::testing::hilbert_matrix;
using detspace::testing::random_cmatrix;

namespace {

xp::Matrix to_xp(const Eigen::MatrixXcd& m, int digits) {
    return xp::Matrix::from_eigen_rowmajor(Eigen::MatrixXcd(m.transpose()).data(),
                                           static_cast<int>(m.rows()),
                                           static_cast<int>(m.cols()), digits);
}

Eigen::MatrixXcd to_eigen(const xp::Matrix& m) {
    Eigen::MatrixXcd out(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) out(i, j) = m.get(i, j);
    return out;
}

double solve_residual(const Eigen::MatrixXcd& a, int digits) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXcd b = Eigen::MatrixXcd::Ones(n, 1);
    xp::Matrix ax = to_xp(a, digits);
    xp::Matrix bx = to_xp(b, digits);
    xp::Matrix x = xp::solve(ax, bx);
    return (ax * x - bx).frobenius_norm().to_double();
}

} // namespace

TEST_CASE("solve with identity returns the right-hand side exactly") {
    Rng rng(11);
    Eigen::MatrixXcd b = random_cmatrix(4, 2, rng);
    xp::Matrix x = xp::solve(to_xp(Eigen::MatrixXcd::Identity(4, 4), 60), to_xp(b, 60));
    CHECK((to_eigen(x) - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Hilbert solve: tiny residual at 200 digits, junk from a double inverse") {
    const Eigen::MatrixXd h = hilbert_matrix(12);
    CHECK(solve_residual(h.cast<cplx>(), 200) < 1e-80);

    // The explicit double-precision inverse of the same system loses all
    // accuracy (condition number ~ 1e16).
    Eigen::MatrixXd hinv = h.inverse();
    Eigen::VectorXd b = Eigen::VectorXd::Ones(12);
    CHECK((h * (hinv * b) - b).norm() > 1e-2);
}

TEST_CASE("forward-constructed solve recovers the known solution") {
    Rng rng(23);
    const int digits = 200;
    Eigen::MatrixXcd a = random_cmatrix(6, 6, rng);
    Eigen::MatrixXcd x_true = random_cmatrix(6, 3, rng);
    xp::Matrix ax = to_xp(a, digits);
    xp::Matrix xx = to_xp(x_true, digits);
    xp::Matrix bx = ax * xx;   // exact product of double-representable entries
    xp::Matrix x = xp::solve(ax, bx);
    CHECK((x - xx).max_abs().to_double() < 1e-180);
}

TEST_CASE("singular matrix is rejected with a pivot diagnostic") {
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(3, 3);
    a(0, 0) = 1.0;
    a(1, 1) = 1.0;   // row/col 2 empty
    CHECK_THROWS_AS(xp::solve(to_xp(a, 60), to_xp(Eigen::MatrixXcd::Ones(3, 1), 60)),
                    NumericalError);
}

TEST_CASE("expm of zero is the identity") {
    xp::Matrix z(3, 3, 60);
    Eigen::MatrixXcd e = to_eigen(xp::expm(z));
    CHECK((e - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("expm of i*diag stays on the unit circle") {
    const int digits = 200;
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(3, 3);
    a(0, 0) = cplx(0.0, 0.3);
    a(1, 1) = cplx(0.0, -2.5);
    a(2, 2) = cplx(0.0, 13.0);
    xp::Matrix e = xp::expm(to_xp(a, digits));
    for (int i = 0; i < 3; ++i) {
        xp::Real mag = e.at(i, i).abs();
        CHECK(std::abs(mag.to_double() - 1.0) < 1e-15);
        CHECK(std::abs(e.get(i, i) - std::exp(a(i, i))) < 1e-14);
    }
    // Off-diagonals must vanish identically for a diagonal argument.
    CHECK(std::abs(e.get(0, 1)) == 0.0);
}

TEST_CASE("expm(A) expm(-A) is the identity to extended precision") {
    Rng rng(37);
    const int digits = 120;
    Eigen::MatrixXcd a = random_cmatrix(5, 5, rng);
    xp::Matrix e1 = xp::expm(to_xp(a, digits));
    xp::Matrix e2 = xp::expm(to_xp(Eigen::MatrixXcd(-a), digits));
    Eigen::MatrixXcd err = to_eigen(e1 * e2) - Eigen::MatrixXcd::Identity(5, 5);
    CHECK(err.cwiseAbs().maxCoeff() < 1e-90);   // 10^(-digits+30)
}

TEST_CASE("doubling the digits never worsens the residuals") {
    const Eigen::MatrixXd h = hilbert_matrix(10);
    const double r100 = solve_residual(h.cast<cplx>(), 100);
    const double r200 = solve_residual(h.cast<cplx>(), 200);
    CHECK(r200 <= r100);

    Rng rng(5);
    Eigen::MatrixXcd a = random_cmatrix(4, 4, rng);
    auto inverse_defect = [&a](int digits) {
        xp::Matrix e1 = xp::expm(to_xp(a, digits));
        xp::Matrix e2 = xp::expm(to_xp(Eigen::MatrixXcd(-a), digits));
        Eigen::MatrixXcd err = to_eigen(e1 * e2) - Eigen::MatrixXcd::Identity(4, 4);
        return err.cwiseAbs().maxCoeff();
    };
    CHECK(inverse_defect(120) <= inverse_defect(60));
}

TEST_CASE("round trip through extended precision preserves doubles bit for bit") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const double x =
            (rng.uniform() - 0.5) * std::pow(10.0, double(rng.below(40)) - 20.0);
        xp::Real r(x, xp::bits_for_digits(50));
        CHECK(r.to_double() == x);
    }
}

TEST_CASE("matrix constructor rejects digits below 50") {
    CHECK_THROWS_AS(xp::Matrix(2, 2, 30), ValidationError);
}
