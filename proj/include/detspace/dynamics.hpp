#pragma once

// Basis generation for dynamics post-processing: an exact evolution oracle
// (dense spectral below 2^12, Krylov stepping up to 2^16), product-expansion
// discretization schemes applied exactly to dense vectors, and controlled
// noise injection that emulates per-step optimization error.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "detspace/oracle.hpp"
#include "detspace/spin_model.hpp"
#include "detspace/state.hpp"

namespace detspace {

inline constexpr int kMaxKrylovSites = 16;

enum class SchemeKind { exact, taylor, lpe, slpe, trotter2 };

struct SchemeSpec {
    SchemeKind kind = SchemeKind::taylor;
    int order = 1;
    std::vector<cplx> a;   // lpe / slpe factor coefficients
    std::vector<cplx> b;   // slpe diagonal-exponential coefficients

    std::string name() const;
};

/// Coefficients for one step of the requested scheme (order <= 4).
/// lpe: a_k from the roots of the degree-s truncated exponential series,
/// found by a companion-matrix start plus Newton polish to 1e-14 residual.
/// slpe order 2: solved from the order conditions (same polisher for the a's,
/// then linear relations for the b's), residual-checked to 1e-14.
SchemeSpec scheme_coefficients(SchemeKind kind, int order);

/// Parse "exact", "taylor2", "lpe1", "lpe2", "slpe2", "trotter2".
SchemeSpec parse_scheme(const std::string& text);

/// One-step matrix of the scheme on a dense Hamiltonian (small test systems).
/// The diagonal/off-diagonal split for slpe/trotter2 uses the matrix diagonal.
Eigen::MatrixXcd scheme_step_matrix(const SchemeSpec& scheme, const Eigen::MatrixXcd& H,
                                    double delta);

/// exp(tau * H) v via adaptive Lanczos (H Hermitian; tau complex).
Eigen::VectorXcd krylov_expm_multiply(const OperatorTerms& H, Eigen::VectorXcd v,
                                      cplx tau, double tol = 1e-13);

/// Exact time evolution. Dense spectral path below 2^12, Krylov stepping up
/// to 2^16 (adaptive substeps, 1e-12 per step); norm preserved to 1e-10.
class ExactEvolver {
public:
    explicit ExactEvolver(const OperatorTerms& H);

    AmplitudeState at(const AmplitudeState& psi0, double t) const;
    std::vector<AmplitudeState> series(const AmplitudeState& psi0,
                                       const std::vector<double>& times) const;
    bool dense() const { return dense_; }

private:
    OperatorTerms H_;
    bool dense_ = false;
    Eigen::MatrixXd evecs_;
    Eigen::VectorXd evals_;
};

AmplitudeState exact_evolve(const OperatorTerms& H, const AmplitudeState& psi0, double t);

/// One scheme step applied exactly to a dense state (not normalized here).
AmplitudeState apply_scheme_step(const SchemeSpec& scheme, const OperatorTerms& H,
                                 const AmplitudeState& psi, double delta);

struct NoiseSpec {
    enum class Kind { none, gaussian } kind = Kind::none;
    double eps = 0.0;
    std::uint64_t seed = 1;

    /// Parse "none" or "g:1e-4".
    static NoiseSpec parse(const std::string& text);
    std::string describe() const;
};

struct GenerationReport {
    std::vector<double> times;                  // k * delta
    std::vector<double> infidelity_vs_exact;    // per generated state
    std::string scheme;
    std::string noise;
    std::vector<std::string> files;             // filled by the CLI writer
};

struct GeneratedBasis {
    BasisFamily family;    // member 0 is psi0; all members unit norm
    GenerationReport report;
};

/// Walk the discretized evolution: state k+1 = scheme step applied to state k,
/// renormalized, with optional relative-norm-eps Gaussian noise per step.
GeneratedBasis generate_basis(const OperatorTerms& H, const AmplitudeState& psi0,
                              double delta, int steps, const SchemeSpec& scheme,
                              const NoiseSpec& noise = {});

} // namespace detspace
