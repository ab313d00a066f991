#pragma once

// Post-processing of a precomputed basis family: evolve the coefficient
// vector under alpha' = -i M alpha with M the Rayleigh matrix, then read
// observables and infidelities off the trajectory. Stepping happens in
// extended precision because M typically comes from a nearly dependent
// family. The TDVP gauge freedom (S alpha = 0 direction) is fixed by the
// lambda = 0 particular solution throughout.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "detspace/rayleigh.hpp"
#include "detspace/state.hpp"
#include "detspace/xprec.hpp"

namespace detspace {

struct BridgeTrajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXcd> alphas;
    std::string rayleigh_policy;   // provenance of the matrix that drove it
    int precision_digits = 200;

    // Alphas at working precision. For nearly dependent families the vectors
    // develop huge components along near-null directions of G; downstream
    // quadratic forms only cancel correctly when fed these, not the doubles.
    std::shared_ptr<const std::vector<xp::Matrix>> alphas_xp;

    int m() const { return static_cast<int>(alphas.front().size()); }
};

/// Evolve alpha over the grid. One step matrix exp(-i M dt) is built per
/// distinct grid spacing (relative 1e-12 match) and reused; alpha is carried
/// in extended precision between grid points. With direct_per_time, every
/// point is computed as exp(-i M t) alpha0 instead (validation mode).
BridgeTrajectory bridge_solve(const RayleighEstimate& M, const Eigen::VectorXcd& alpha0,
                              const std::vector<double>& times, int digits = 200,
                              bool direct_per_time = false);

/// Piecewise-constant time-dependent coefficients on the output grid:
/// M(t) = sum_p beta_p(t) M_p, frozen per interval at its left endpoint.
BridgeTrajectory bridge_solve_time_dependent(
    const std::vector<RayleighEstimate>& parts,
    const std::function<std::vector<double>(double)>& beta,
    const Eigen::VectorXcd& alpha0, const std::vector<double>& times, int digits = 200);

struct ObservableSeries {
    std::vector<double> values;      // Re of the ratio per time
    double max_imag_residual = 0.0;  // diagnostic; < 1e-8 expected for exact packs
};

/// alpha^dag G^(A) alpha / alpha^dag G alpha along the trajectory.
ObservableSeries bridge_observable(const Eigen::MatrixXcd& G, const Eigen::MatrixXcd& G_A,
                                   const BridgeTrajectory& traj);

/// Pack-based variant; prefers the pack's extended-precision views.
ObservableSeries bridge_observable(const GramPack& pack, const std::string& op_label,
                                   const BridgeTrajectory& traj);

/// 1 - |<exact|psi_alpha>|^2 / (||exact||^2 alpha^dag G alpha) per time.
/// oracle_states[k] must correspond to traj.times[k].
std::vector<double> bridge_infidelity(const BridgeTrajectory& traj,
                                      const BasisFamily& family,
                                      const std::vector<AmplitudeState>& oracle_states);

/// Best infidelity any vector in the span can reach against the oracle state:
/// 1 - v^dag G^{-1} v / ||psi||^2 with v_k = <phi_k|psi>. The overlaps, the
/// solve and the contraction all run in extended precision; the pack's xp
/// Gram view is used when present.
double optimal_in_subspace(const BasisFamily& family, const GramPack& pack,
                           const AmplitudeState& oracle_state, int digits = 200);

/// Residual ||S alpha' + i F|| / ||F|| of the variational equations at
/// alpha' = -i G^{-1} G^(H) alpha (0/0 guarded as 0).
double tdvp_residual(const Eigen::MatrixXcd& G, const Eigen::MatrixXcd& G_H,
                     const Eigen::VectorXcd& alpha);

// Trajectory artifacts.
std::string trajectory_to_json(const BridgeTrajectory& traj);
BridgeTrajectory trajectory_from_json(const std::string& text);

} // namespace detspace
