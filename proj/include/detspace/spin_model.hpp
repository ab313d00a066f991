#pragma once

// Spin-1/2 lattice models as weighted term lists with connected-element access.
// Configurations are encoded as integers: site 0 is the least significant bit
// and bit value 0 means spin up. This encoding is part of the file formats and
// must not change.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "detspace/common.hpp"

namespace detspace {

struct SpinConfig {
    std::uint32_t bits = 0;
    int n = 0;

    /// sigma^z eigenvalue at a site: up (bit 0) -> +1, down -> -1.
    int z(int site) const { return ((bits >> site) & 1u) ? -1 : +1; }
    SpinConfig flipped(int site) const { return {bits ^ (1u << site), n}; }
    std::size_t index() const { return bits; }

    bool operator==(const SpinConfig&) const = default;
};

enum class LatticeKind { chain, square };
enum class Boundary { open, periodic };

struct Geometry {
    LatticeKind kind = LatticeKind::chain;
    int extent = 1;       // sites along one dimension
    Boundary boundary = Boundary::open;

    int sites() const;
    /// Undirected nearest-neighbor pairs, each counted exactly once.
    std::vector<std::pair<int, int>> bonds() const;
};

/// Parse "chain:12:open" / "square:4:periodic".
Geometry parse_geometry(const std::string& text);

enum class TermBody { zz, x, z, identity };

struct Term {
    double coeff = 0.0;
    TermBody body = TermBody::identity;
    int site_a = -1;   // unused for identity
    int site_b = -1;   // only for zz
};

/// Hermitian operator as a term list. zz, z and identity are diagonal in the
/// computational basis; x is purely off-diagonal.
class OperatorTerms {
public:
    OperatorTerms(int n, std::vector<Term> terms);

    int sites() const { return n_; }
    const std::vector<Term>& terms() const { return terms_; }

    /// <s|O|s> summed over the diagonal terms.
    double diagonal_element(const SpinConfig& s) const;

    /// All s' with <s|O|s'> != 0, the diagonal entry first when the operator
    /// has diagonal terms at all.
    std::vector<std::pair<SpinConfig, cplx>> connected_elements(const SpinConfig& s) const;

    /// Streaming form of connected_elements (no allocation per call).
    template <typename F>
    void for_connected(const SpinConfig& s, F&& emit) const {
        if (s.n != n_) throw ValidationError("connected_elements: site-count mismatch");
        if (has_diagonal_) emit(s, cplx(diagonal_element(s), 0.0));
        for (const auto& [site, coeff] : x_by_site_)
            emit(s.flipped(site), cplx(coeff, 0.0));
    }

    bool has_diagonal_terms() const { return has_diagonal_; }
    std::size_t max_connected() const { return (has_diagonal_ ? 1 : 0) + x_by_site_.size(); }

    /// Diagonal / off-diagonal split (for split-step evolution schemes).
    OperatorTerms diagonal_part() const;
    OperatorTerms offdiagonal_part() const;

private:
    int n_;
    std::vector<Term> terms_;
    std::vector<std::pair<int, double>> x_by_site_;   // merged x coefficients
    bool has_diagonal_ = false;
};

/// -J sum_<ij> sigma^z_i sigma^z_j - h sum_i sigma^x_i on the given geometry.
OperatorTerms build_tfim(const Geometry& geometry, double J, double h);

/// Average transverse magnetization (1/n) sum_k sigma^x_k.
OperatorTerms magnetization_x(int n);

/// Identity operator on n sites.
OperatorTerms identity_op(int n);

/// Coefficient-wise weighted merge: sum_p gamma_p * parts[p].
OperatorTerms combine_terms(const std::vector<double>& gammas,
                            const std::vector<OperatorTerms>& parts);

/// Operator spec file round trip:
/// {"n": int, "terms": [{"coeff": f, "body": "ZZ"|"X"|"Z"|"I", "sites": [...]}]}
OperatorTerms read_operator_json(const std::string& path);
void write_operator_json(const OperatorTerms& op, const std::string& path);
std::string operator_to_json(const OperatorTerms& op);
OperatorTerms operator_from_json(const std::string& text);

} // namespace detspace
