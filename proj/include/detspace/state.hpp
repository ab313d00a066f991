#pragma once

// Dense amplitude-queryable states at desk scale, the basis-family container,
// and the qsv1 state file format. States are projective: the norm carries no
// meaning and is not forced to 1.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "detspace/common.hpp"
#include "detspace/spin_model.hpp"

namespace detspace {

/// Hard cap on dense storage (2^20 amplitudes).
inline constexpr int kMaxSites = 20;

struct AmplitudeState {
    int n = 0;
    Eigen::VectorXcd amplitudes;
    std::string label;

    AmplitudeState() = default;
    AmplitudeState(int n_sites, Eigen::VectorXcd amps, std::string lbl = {});

    std::size_t dim() const { return static_cast<std::size_t>(amplitudes.size()); }
};

/// <s|phi> under the fixed encoding.
cplx amplitude(const AmplitudeState& state, const SpinConfig& s);

/// Every amplitude equal to 2^(-n/2).
AmplitudeState uniform_state(int n);

/// Computational basis vector |s>.
AmplitudeState basis_state(const SpinConfig& s);

/// i.i.d. complex Gaussian amplitudes, normalized.
AmplitudeState random_state(int n, Rng& rng, const std::string& label = "random");

/// <s|O|phi> = sum_{s'} <s|O|s'><s'|phi>.
cplx local_row(const AmplitudeState& state, const OperatorTerms& O, const SpinConfig& s);

/// Dense O|phi> via connected elements.
AmplitudeState apply_operator(const OperatorTerms& O, const AmplitudeState& state);

/// <a|b> (conjugate-linear in a).
cplx inner(const AmplitudeState& a, const AmplitudeState& b);

double norm(const AmplitudeState& s);
AmplitudeState normalized(const AmplitudeState& s);

/// Ordered family {phi_k} spanning the working subspace. Members share n and
/// should be linearly independent; rank trouble is reported by diagnostics,
/// not enforced here.
struct BasisFamily {
    std::vector<AmplitudeState> members;

    BasisFamily() = default;
    explicit BasisFamily(std::vector<AmplitudeState> m);

    int size() const { return static_cast<int>(members.size()); }
    int sites() const { return members.front().n; }
    const AmplitudeState& operator[](int k) const { return members[k]; }

    /// Numerical rank of the Gram matrix (advisory linear-independence check).
    int gram_rank(double rel_tol = 1e-12) const;
};

// ---------------------------------------------------------------------------
// qsv1 state files: one UTF-8 JSON header line
//   {"format":"qsv1","n":N,"encoding":"c128le","order":"site0-lsb-up0"}
// followed by '\n' and 2^N raw little-endian (re, im) float64 pairs.
// ---------------------------------------------------------------------------

void write_state(const AmplitudeState& state, const std::string& path);
AmplitudeState read_state(const std::string& path);

/// Load a family from an ordered list of qsv1 paths.
BasisFamily read_family(const std::vector<std::string>& paths);

} // namespace detspace
