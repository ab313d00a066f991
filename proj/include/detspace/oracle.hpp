#pragma once

// Ground truth at desk scale: dense operator builds, full Hermitian
// diagonalization, an independent sparse Lanczos ground-state solver, and the
// Fubini-Study fidelity between states.

#include <Eigen/Dense>

#include "detspace/spin_model.hpp"
#include "detspace/state.hpp"

namespace detspace {

/// Full decomposition cap: 2^12 amplitudes.
inline constexpr int kMaxDenseSites = 12;

struct SpectralDecomposition {
    Eigen::VectorXd eigenvalues;   // ascending
    Eigen::MatrixXd eigenvectors;  // columns, matching order
};

/// Dense matrix of the operator. All supported term bodies have real matrix
/// elements, so the build is real symmetric.
Eigen::MatrixXd dense_matrix(const OperatorTerms& op);

/// Full eigendecomposition of the dense build (dim <= 2^12).
SpectralDecomposition diagonalize(const OperatorTerms& H);

/// |<a|b>|^2 / (||a||^2 ||b||^2), clamped to [0,1].
double fidelity(const AmplitudeState& a, const AmplitudeState& b);

struct LanczosResult {
    double energy = 0.0;
    Eigen::VectorXd vector;
    int iterations = 0;
    double residual = 0.0;   // ||H v - E v||
};

/// Sparse Lanczos ground state with full reorthogonalization. Independent of
/// diagonalize(); used to cross-check it and to reach sizes past the dense cap.
LanczosResult lanczos_ground(const OperatorTerms& H, double tol = 1e-12,
                             int max_iter = 400, std::uint64_t seed = 7);

/// Ground state as an AmplitudeState (Lanczos path, residual-certified).
AmplitudeState ground_state(const OperatorTerms& H, double tol = 1e-12);

/// Dense exp(A) in double precision (scaling-and-squaring), for small blocks.
Eigen::MatrixXcd expm_dense(const Eigen::MatrixXcd& A);

} // namespace detspace
