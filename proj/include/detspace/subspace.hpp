#pragma once

// Subspace-level analysis: the Grassmannian distance (exact and sampled),
// Ritz spectra and vectors from Gram packs, per-Ritz-vector observables, and
// ground-state interpolation across Hamiltonian parameters.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "detspace/det_state.hpp"
#include "detspace/rayleigh.hpp"
#include "detspace/state.hpp"

namespace detspace {

/// Subspace distance in radians: arccos sqrt(det S^dag S) over orthonormalized
/// bases, clamped to [0, pi/2].
double subspace_distance_exact(const BasisFamily& U, const BasisFamily& V);

struct DistanceEstimate {
    double distance = 0.0;    // radians
    double std_err = 0.0;     // delta-method propagation of the chain spread
    double fidelity = 0.0;    // |product of cross-ratio means|
};

/// Monte Carlo distance from the two cross-ratio chain means. The control
/// variate refinement is intentionally not implemented; the flag exists so
/// callers state what they ran.
DistanceEstimate subspace_distance_mc(const BasisFamily& U, const BasisFamily& V,
                                      const DetSamplerConfig& cfg,
                                      bool control_variates = false);

struct RitzResult {
    Eigen::VectorXd values;     // ascending; ties keep the original eigen order
    Eigen::MatrixXcd vectors;   // column k pairs with values[k]
    Eigen::VectorXd values_imag_residual;   // |Im| of each eigenvalue pre-projection
};

/// Generalized problem G^(H) a = mu G a for exact packs (whitened, symmetry
/// preserving); plain eigendecomposition of M for estimates.
RitzResult ritz_spectrum(const GramPack& pack, const std::string& op_label = "H");
RitzResult ritz_spectrum(const RayleighEstimate& est);

/// Average of the operator behind `observable_label` on each Ritz vector of
/// `hamiltonian_label`, matched to the Ritz ordering. Requires distinct Ritz
/// values (relative gap > 1e-10); refuses otherwise.
Eigen::VectorXd ritz_observable(const GramPack& pack,
                                const std::string& hamiltonian_label,
                                const std::string& observable_label);

struct InterpolationResult {
    std::vector<double> gamma;
    double mu0 = 0.0;            // lowest Ritz value at gamma
    Eigen::VectorXcd alpha;      // its coefficient vector
    double norm2 = 0.0;          // alpha^dag G alpha
};

/// Ground-state interpolation over H(gamma) = sum_p gamma_p H_p from one pack
/// carrying a G^(H_p) per part. The G factorization is cached across queries.
/// The double-precision generalized eigensolve leaves a rotation floor of
/// roughly eps * cond(G) in the lowest vector; with refine_digits > 0 the
/// vector is polished by shifted inverse iteration at that working precision.
class GroundInterpolator {
public:
    GroundInterpolator(GramPack pack, std::vector<std::string> part_labels,
                       int refine_digits = 200);

    InterpolationResult at(const std::vector<double>& gamma) const;
    int parts() const { return static_cast<int>(part_labels_.size()); }

private:
    GramPack pack_;
    std::vector<std::string> part_labels_;
    int refine_digits_;
    Eigen::MatrixXcd whitener_;        // G^{-1/2} in the G eigenbasis
    Eigen::MatrixXcd whitener_inv_;    // G^{+1/2}
};

/// Merge per-part packs (each carrying the label "H") into one multi-operator
/// pack, rejecting mixed scale conventions.
GramPack merge_part_packs(const std::vector<GramPack>& packs,
                          const std::vector<std::string>& part_labels);

} // namespace detspace
