#include "detspace/oracle.hpp"

#include <cmath>

namespace detspace {

Eigen::MatrixXd dense_matrix(const OperatorTerms& op) {
    if (op.sites() > kMaxDenseSites)
        throw NumericalError("dense_matrix: beyond the 2^12 dense cap");
    const Eigen::Index dim = Eigen::Index(1) << op.sites();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index s = 0; s < dim; ++s) {
        SpinConfig cfg{static_cast<std::uint32_t>(s), op.sites()};
        // Row s: <s|O|s'>.
        op.for_connected(cfg, [&](const SpinConfig& sp, cplx v) {
            H(s, static_cast<Eigen::Index>(sp.index())) += v.real();
        });
    }
    return H;
}

SpectralDecomposition diagonalize(const OperatorTerms& H) {
    Eigen::MatrixXd dense = dense_matrix(H);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
    if (es.info() != Eigen::Success)
        throw NumericalError("diagonalize: eigensolver failed to converge");
    return {es.eigenvalues(), es.eigenvectors()};
}

double fidelity(const AmplitudeState& a, const AmplitudeState& b) {
    const double na2 = a.amplitudes.squaredNorm();
    const double nb2 = b.amplitudes.squaredNorm();
    if (na2 == 0.0 || nb2 == 0.0) throw ValidationError("fidelity: zero vector input");
    const double f = std::norm(inner(a, b)) / (na2 * nb2);
    return std::clamp(f, 0.0, 1.0);
}

namespace {

Eigen::VectorXd apply_real(const OperatorTerms& H, const Eigen::VectorXd& v) {
    const Eigen::Index dim = v.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        SpinConfig s{static_cast<std::uint32_t>(i), H.sites()};
        H.for_connected(s, [&](const SpinConfig& sp, cplx el) {
            out[i] += el.real() * v[static_cast<Eigen::Index>(sp.index())];
        });
    }
    return out;
}

} // namespace

LanczosResult lanczos_ground(const OperatorTerms& H, double tol, int max_iter,
                             std::uint64_t seed) {
    const Eigen::Index dim = Eigen::Index(1) << H.sites();
    max_iter = static_cast<int>(std::min<Eigen::Index>(max_iter, dim));

    Rng rng(seed);
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.gaussian();
    v.normalize();

    std::vector<Eigen::VectorXd> basis{v};
    std::vector<double> alpha, beta;
    LanczosResult best;

    for (int k = 0; k < max_iter; ++k) {
        Eigen::VectorXd w = apply_real(H, basis[k]);
        const double a = basis[k].dot(w);
        alpha.push_back(a);
        w -= a * basis[k];
        if (k > 0) w -= beta[k - 1] * basis[k - 1];
        // Full reorthogonalization keeps the Ritz pairs trustworthy.
        for (const auto& u : basis) w -= u.dot(w) * u;
        const double b = w.norm();

        // Small tridiagonal eigenproblem.
        const int kk = k + 1;
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(kk, kk);
        for (int i = 0; i < kk; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < kk) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        const Eigen::VectorXd y = es.eigenvectors().col(0);
        const double resid_bound = std::abs(b * y[kk - 1]);
        if (resid_bound < tol * std::max(1.0, std::abs(es.eigenvalues()[0])) ||
            b < 1e-14 || k == max_iter - 1) {
            Eigen::VectorXd gs = Eigen::VectorXd::Zero(dim);
            for (int i = 0; i < kk; ++i) gs += y[i] * basis[i];
            gs.normalize();
            best.energy = es.eigenvalues()[0];
            best.vector = gs;
            best.iterations = kk;
            best.residual = (apply_real(H, gs) - best.energy * gs).norm();
            return best;
        }
        beta.push_back(b);
        basis.push_back(w / b);
    }
    throw NumericalError("lanczos_ground: no convergence");
}

AmplitudeState ground_state(const OperatorTerms& H, double tol) {
    LanczosResult r = lanczos_ground(H, tol);
    Eigen::VectorXcd amps = r.vector.cast<cplx>();
    return {H.sites(), std::move(amps), "ground"};
}

Eigen::MatrixXcd expm_dense(const Eigen::MatrixXcd& A) {
    const Eigen::Index n = A.rows();
    double nrm = A.cwiseAbs().colwise().sum().maxCoeff();
    int j = 0;
    if (nrm > 0.25) j = static_cast<int>(std::ceil(std::log2(nrm / 0.25))) + 1;
    Eigen::MatrixXcd As = A / std::pow(2.0, j);
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Identity(n, n);
    Eigen::MatrixXcd term = sum;
    for (int k = 1; k < 64; ++k) {
        term = (term * As) / static_cast<double>(k);
        sum += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18 * sum.cwiseAbs().maxCoeff()) break;
    }
    for (int s = 0; s < j; ++s) sum = sum * sum;
    return sum;
}

} // namespace detspace
