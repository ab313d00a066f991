#pragma once

// Shared generators and small independent oracles for the test suites. These
// deliberately avoid the library's own code paths where they serve as checks.

#include <Eigen/Dense>

#include <boost/math/distributions/chi_squared.hpp>

#include <complex>
#include <vector>

#include "detspace/common.hpp"
#include "detspace/spin_model.hpp"
#include "detspace/state.hpp"

namespace detspace::testing {

/// Upper-tail p-value of a chi-squared statistic.
inline double chi_squared_pvalue(double statistic, double dof) {
    boost::math::chi_squared dist(dof);
    return 1.0 - boost::math::cdf(dist, statistic);
}

/// Pearson statistic over observed counts vs expected counts (already matched).
inline double pearson_statistic(const std::vector<double>& observed,
                                const std::vector<double>& expected) {
    double chi2 = 0.0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        const double d = observed[k] - expected[k];
        chi2 += d * d / expected[k];
    }
    return chi2;
}

inline Eigen::MatrixXcd random_cmatrix(int rows, int cols, Rng& rng) {
    Eigen::MatrixXcd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.gaussian_cplx();
    return m;
}

inline Eigen::MatrixXcd random_hermitian(int n, Rng& rng) {
    Eigen::MatrixXcd a = random_cmatrix(n, n, rng);
    return (a + a.adjoint()) / 2.0;
}

/// Random invertible B with a moderate condition number (resampled until the
/// spread of singular values is below the bound).
inline Eigen::MatrixXcd random_well_conditioned(int n, Rng& rng, double max_cond = 1e3) {
    for (int t = 0; t < 100; ++t) {
        Eigen::MatrixXcd b = random_cmatrix(n, n, rng);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(b);
        const auto& sv = svd.singularValues();
        if (sv(0) / sv(sv.size() - 1) < max_cond) return b;
    }
    throw std::runtime_error("no well-conditioned draw");
}

inline Eigen::MatrixXd hilbert_matrix(int n) {
    Eigen::MatrixXd h(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) h(i, j) = 1.0 / static_cast<double>(i + j + 1);
    return h;
}

/// Term-by-term dense build, independent of connected_elements.
inline Eigen::MatrixXd dense_by_terms(const OperatorTerms& op) {
    const Eigen::Index dim = Eigen::Index(1) << op.sites();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& t : op.terms()) {
        for (Eigen::Index s = 0; s < dim; ++s) {
            SpinConfig cfg{static_cast<std::uint32_t>(s), op.sites()};
            switch (t.body) {
                case TermBody::zz:
                    H(s, s) += t.coeff * cfg.z(t.site_a) * cfg.z(t.site_b);
                    break;
                case TermBody::z:
                    H(s, s) += t.coeff * cfg.z(t.site_a);
                    break;
                case TermBody::identity:
                    H(s, s) += t.coeff;
                    break;
                case TermBody::x: {
                    const auto sp = static_cast<Eigen::Index>(cfg.flipped(t.site_a).index());
                    H(sp, s) += t.coeff;
                    break;
                }
            }
        }
    }
    return H;
}

inline BasisFamily random_family(int n, int m, Rng& rng) {
    std::vector<AmplitudeState> members;
    members.reserve(m);
    for (int k = 0; k < m; ++k) members.push_back(random_state(n, rng));
    return BasisFamily(std::move(members));
}

inline SpinConfig cfg_of(std::uint32_t bits, int n) { return SpinConfig{bits, n}; }

} // namespace detspace::testing
