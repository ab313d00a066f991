#pragma once

// Determinant-state machinery over an m-member family: amplitudes
// <s|phi_A> = det(Phi(s))/m!, change of basis, the Metropolis sampler on the
// m-copy configuration space, and per-sample local Rayleigh matrices.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "detspace/common.hpp"
#include "detspace/spin_model.hpp"
#include "detspace/state.hpp"

namespace detspace {

/// One configuration per Hilbert-space copy; copy i feeds row i of Phi(s).
struct MultiConfig {
    std::vector<SpinConfig> copies;

    int m() const { return static_cast<int>(copies.size()); }
    bool operator==(const MultiConfig&) const = default;

    /// Mixed-radix index over (2^n)^m, copy 0 least significant.
    std::size_t index() const;
    static MultiConfig from_index(std::size_t idx, int m, int n);
};

struct DetSamplerConfig {
    int n_chains = 4;
    int n_samples_per_chain = 1000;
    long burn_in = -1;        // proposals; -1 means the 10*n*m default
    int thin = 1;             // proposals between retained samples
    std::uint64_t seed = 1;
    int start_retries = 10000;
    int workers = 1;          // chains run per worker; reduction stays ordered

    long effective_burn_in(int n, int m) const {
        return burn_in >= 0 ? burn_in : 10L * n * m;
    }
    void validate() const;
};

struct ChainStats {
    std::uint64_t seed = 0;
    long proposals = 0;
    long accepted = 0;
    int restarts = 0;

    double acceptance_rate() const {
        return proposals > 0 ? static_cast<double>(accepted) / proposals : 0.0;
    }
};

struct ChainRun {
    std::vector<MultiConfig> samples;
    ChainStats stats;
};

struct SampleRun {
    std::vector<ChainRun> chains;

    std::size_t total_samples() const;
    /// Sampler diagnostics (acceptance per chain, seed lineage) as JSON text.
    std::string diagnostics_json() const;
};

/// Phi(s): row i holds the amplitudes of every member at copy i's config.
Eigen::MatrixXcd overlap_matrix(const BasisFamily& family, const MultiConfig& s);

/// (1/m!) det Phi(s).
cplx det_amplitude(const BasisFamily& family, const MultiConfig& s);

/// log|det Phi(s)| (-inf when singular); the sampler's working quantity.
double log_abs_det_overlap(const BasisFamily& family, const MultiConfig& s);

/// Member p of the result is sum_k B(k,p) * member k.
BasisFamily change_basis(const BasisFamily& family, const Eigen::MatrixXcd& B);

/// Metropolis-Hastings chains targeting p(s) ~ |det Phi(s)|^2 with
/// single-copy single-flip proposals. Reproducible from cfg.seed.
SampleRun sample_chain(const BasisFamily& family, const DetSamplerConfig& cfg);

/// Solves Phi(s) X = Phi^(H)(s); entry (i,j) of the right side is
/// <s_i|H|phi_j>. Throws NumericalError when Phi(s) is singular.
Eigen::MatrixXcd local_rayleigh(const BasisFamily& family, const OperatorTerms& H,
                                const MultiConfig& s);

} // namespace detspace
