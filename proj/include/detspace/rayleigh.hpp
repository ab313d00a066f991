#pragma once

// Rayleigh matrix G^{-1} G^(H) three ways: determinant-state Monte Carlo,
// sum-of-states Monte Carlo, and exact enumeration, plus the assembly and
// eigenvalue post-processing variants.

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "detspace/common.hpp"
#include "detspace/det_state.hpp"
#include "detspace/spin_model.hpp"
#include "detspace/state.hpp"
#include "detspace/xprec.hpp"

namespace detspace {

enum class PackProvenance { exact, sum_of_states };

/// Paired (G, G^(O)) matrices for one family. Exact packs carry absolute
/// scale; sum-of-states packs are known only up to the common measure total,
/// which cancels in every quantity we derive from them.
///
/// The xp views hold the same sums accumulated in extended precision; they
/// are the trustworthy source once the family is nearly dependent, where the
/// double entries' own rounding already dominates every contracted quantity.
struct GramPack {
    Eigen::MatrixXcd G;
    std::map<std::string, Eigen::MatrixXcd> G_ops;
    bool scale_known = false;
    PackProvenance provenance = PackProvenance::exact;
    std::optional<Eigen::MatrixXd> G_err;                      // per-entry standard errors
    std::map<std::string, Eigen::MatrixXd> G_ops_err;
    std::string sampler_json;

    std::shared_ptr<const xp::Matrix> G_xp;
    std::map<std::string, std::shared_ptr<const xp::Matrix>> G_ops_xp;

    int m() const { return static_cast<int>(G.rows()); }
    const Eigen::MatrixXcd& op(const std::string& label) const;
    const xp::Matrix* op_xp(const std::string& label) const;
};

enum class ImagPolicy { keep, discard_eig_imag };

struct AssemblyPolicy {
    enum class Kind { direct_mean, xp_inverse, pinv } kind = Kind::xp_inverse;
    int digits = 200;        // xp_inverse
    double rcond = 1e-11;    // pinv

    std::string describe() const;
    /// Parse "xp:200" or "pinv:1e-11".
    static AssemblyPolicy parse(const std::string& text);
};

struct RayleighEstimate {
    Eigen::MatrixXcd M;
    std::optional<Eigen::MatrixXd> std_err;   // per-entry, Monte Carlo only
    Eigen::VectorXcd eigenvalues;             // of M, imaginary parts included
    std::string assembly_policy;
    ImagPolicy imag_policy = ImagPolicy::keep;
    long skipped_singular = 0;
    std::vector<std::string> notes;
    std::string sampler_json;

    // Full-precision view of M from an xp-inverse assembly. M alone is not
    // enough downstream: for nearly dependent families the rounding to double
    // already wrecks the eigenstructure the trajectory solver depends on.
    std::shared_ptr<const xp::Matrix> M_xp;

    int m() const { return static_cast<int>(M.rows()); }
};

/// Sample mean of the local Rayleigh matrices over |det Phi|^2-distributed
/// samples; standard errors from between-chain variance of chain means.
RayleighEstimate estimate_det_state(const BasisFamily& family, const OperatorTerms& H,
                                    const DetSamplerConfig& cfg,
                                    ImagPolicy imag = ImagPolicy::keep);

/// Deterministic variant: exhaustive enumeration over all (2^n)^m
/// configurations instead of sampling. Desk-scale sizes only.
RayleighEstimate exhaustive_det_state(const BasisFamily& family, const OperatorTerms& H,
                                      ImagPolicy imag = ImagPolicy::keep);

/// Single-copy chain targeting p(s) ~ sum_k |<s|phi_k>|^2; returns G and each
/// G^(O) up to the common measure total (scale_known = false).
GramPack estimate_sum_of_states(const BasisFamily& family,
                                const std::map<std::string, OperatorTerms>& ops,
                                const DetSamplerConfig& cfg);

/// Deterministic variant of the sum-of-states estimator (all 2^n configs).
GramPack exhaustive_sum_of_states(const BasisFamily& family,
                                  const std::map<std::string, OperatorTerms>& ops);

/// Exact sums over the computational basis; scale_known = true. With
/// xp_digits > 0 the sums are additionally accumulated in extended precision
/// (exact for the stored amplitudes) and the double view is their rounding.
GramPack exact_gram_pack(const BasisFamily& family,
                         const std::map<std::string, OperatorTerms>& ops,
                         int xp_digits = 0);

/// Combine a pack into M = G^{-1} G^(op) under the requested inversion policy.
RayleighEstimate assemble_rayleigh(const GramPack& pack, const AssemblyPolicy& policy,
                                   const std::string& op_label = "H",
                                   ImagPolicy imag = ImagPolicy::keep);

/// Eigendecompose M, drop the imaginary parts of the eigenvalues, reassemble.
RayleighEstimate realify_eigenvalues(const RayleighEstimate& est);

// JSON round trips for the CLI artifacts.
std::string rayleigh_to_json(const RayleighEstimate& est);
RayleighEstimate rayleigh_from_json(const std::string& text);
std::string pack_to_json(const GramPack& pack);
GramPack pack_from_json(const std::string& text);

} // namespace detspace
