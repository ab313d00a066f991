#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "detspace/det_state.hpp"
#include "detspace/oracle.hpp"
#include "detspace/rayleigh.hpp"
#include "detspace/subspace.hpp"
#include "support/helpers.hpp"

using namespace detspace;
using detspace::testing::cfg_of;
using detspace::testing::random_cmatrix;
using detspace::testing::random_family;
using detspace::testing::random_hermitian;
using detspace::testing::random_well_conditioned;

namespace {

std::map<std::string, OperatorTerms> ops_h(const OperatorTerms& h) {
    return {{"H", h}};
}

/// Distance from the projector route: fidelity = det of the Gram matrix of an
/// orthonormal basis of V projected onto U (independent of the library path).
double distance_by_projector(const BasisFamily& U, const BasisFamily& V) {
    const int m = U.size();
    const Eigen::Index dim = U[0].amplitudes.size();
    Eigen::MatrixXcd au(dim, m), av(dim, m);
    for (int k = 0; k < m; ++k) {
        au.col(k) = U[k].amplitudes;
        av.col(k) = V[k].amplitudes;
    }
    // Orthonormalize both via SVD (different route than the library's QR).
    Eigen::JacobiSVD<Eigen::MatrixXcd> svdu(au, Eigen::ComputeThinU);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svdv(av, Eigen::ComputeThinU);
    const Eigen::MatrixXcd pu = svdu.matrixU() * svdu.matrixU().adjoint();
    const Eigen::MatrixXcd proj = pu * svdv.matrixU();
    const Eigen::MatrixXcd gram = proj.adjoint() * proj;
    const double fid = std::clamp(gram.determinant().real(), 0.0, 1.0);
    return std::acos(std::sqrt(fid));
}

} // namespace

TEST_CASE("distance vanishes between two bases of the same span") {
    Rng rng(1);
    const int n = 4, m = 3;
    const BasisFamily fam = random_family(n, m, rng);
    const BasisFamily mixed = change_basis(fam, random_well_conditioned(m, rng));
    CHECK(subspace_distance_exact(fam, mixed) < 1e-7);
}

TEST_CASE("distance hits pi/2 when V contains a vector orthogonal to U") {
    // U spans {e0, e1}; V spans {e0, e2} with e2 orthogonal to U... no: e2 must
    // be orthogonal to all of U. Take U = span{e0,e1}, V = span{e2,e3}?
    // A single orthogonal member already suffices: V = span{e0, e3}.
    const int n = 2;
    const BasisFamily u({basis_state(cfg_of(0, n)), basis_state(cfg_of(1, n))});
    const BasisFamily v({basis_state(cfg_of(0, n)), basis_state(cfg_of(3, n))});
    CHECK(std::abs(subspace_distance_exact(u, v) - std::acos(0.0)) < 1e-9);
}

TEST_CASE("distance agrees with the projected-Gram oracle on random pairs") {
    Rng rng(2);
    for (int t = 0; t < 10; ++t) {
        const BasisFamily u = random_family(3, 2, rng);
        const BasisFamily v = random_family(3, 2, rng);
        CHECK(subspace_distance_exact(u, v) ==
              doctest::Approx(distance_by_projector(u, v)).epsilon(1e-9));
    }
}

TEST_CASE("distance is a metric on random triples") {
    Rng rng(3);
    const int n = 4, m = 2;
    for (int t = 0; t < 8; ++t) {
        const BasisFamily a = random_family(n, m, rng);
        const BasisFamily b = random_family(n, m, rng);
        const BasisFamily c = random_family(n, m, rng);
        const double dab = subspace_distance_exact(a, b);
        const double dba = subspace_distance_exact(b, a);
        const double dac = subspace_distance_exact(a, c);
        const double dcb = subspace_distance_exact(c, b);
        CHECK(std::abs(dab - dba) < 1e-9);
        CHECK(dab <= dac + dcb + 1e-9);
    }
}

TEST_CASE("near-zero distance implies equal span projectors") {
    Rng rng(4);
    const int n = 3, m = 2;
    const BasisFamily fam = random_family(n, m, rng);
    // Tiny perturbation within the same span, plus a basis change.
    Eigen::MatrixXcd b = random_well_conditioned(m, rng);
    const BasisFamily same = change_basis(fam, b);
    REQUIRE(subspace_distance_exact(fam, same) < 1e-7);

    const Eigen::Index dim = 1 << n;
    auto projector = [dim](const BasisFamily& f) {
        Eigen::MatrixXcd a(dim, f.size());
        for (int k = 0; k < f.size(); ++k) a.col(k) = f[k].amplitudes;
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinU);
        return Eigen::MatrixXcd(svd.matrixU() * svd.matrixU().adjoint());
    };
    CHECK((projector(fam) - projector(same)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("rank-deficient family is rejected") {
    Rng rng(5);
    const AmplitudeState s = random_state(3, rng);
    AmplitudeState s2 = s;
    s2.amplitudes *= 2.0;
    const BasisFamily degenerate({s, s2});
    const BasisFamily ok = random_family(3, 2, rng);
    CHECK_THROWS_AS(subspace_distance_exact(degenerate, ok), NumericalError);
}

TEST_CASE("sampled distance: identical subspaces give zero within error") {
    Rng rng(6);
    const int n = 3, m = 2;
    const BasisFamily fam = random_family(n, m, rng);
    const BasisFamily mixed = change_basis(fam, random_well_conditioned(m, rng));
    DetSamplerConfig cfg;
    cfg.n_chains = 4;
    cfg.n_samples_per_chain = 800;
    cfg.seed = 17;
    const DistanceEstimate d = subspace_distance_mc(fam, mixed, cfg);
    CHECK(d.distance <= 3.0 * d.std_err + 1e-7);
}

TEST_CASE("sampled distance: m=1 reduces to the two-state estimator") {
    Rng rng(7);
    const BasisFamily u({random_state(4, rng)});
    const BasisFamily v({random_state(4, rng)});
    DetSamplerConfig cfg;
    cfg.n_chains = 4;
    cfg.n_samples_per_chain = 4000;
    cfg.seed = 23;
    const DistanceEstimate d = subspace_distance_mc(u, v, cfg);
    const double exact = std::acos(std::sqrt(fidelity(u[0], v[0])));
    CHECK(std::abs(d.distance - exact) < 5.0 * d.std_err + 1e-3);
}

TEST_CASE("sampled distance tracks the exact one on random families") {
    Rng rng(8);
    const int n = 4, m = 2;
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const BasisFamily u = random_family(n, m, rng);
        const BasisFamily v = random_family(n, m, rng);
        DetSamplerConfig cfg;
        cfg.n_chains = 4;
        cfg.n_samples_per_chain = 6000;
        cfg.seed = seed;
        const DistanceEstimate d = subspace_distance_mc(u, v, cfg);
        const double exact = subspace_distance_exact(u, v);
        if (std::abs(d.distance - exact) < 5.0 * std::max(d.std_err, 1e-4)) ++good;
    }
    CHECK(good >= 5);
}

TEST_CASE("control variates flag is a stub") {
    Rng rng(9);
    const BasisFamily u = random_family(3, 2, rng);
    CHECK_THROWS_AS(subspace_distance_mc(u, u, DetSamplerConfig{}, true), NumericalError);
}

TEST_CASE("ritz spectrum: m=1 is the Rayleigh quotient") {
    Rng rng(10);
    const int n = 4;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::open}, 1.0, 0.9);
    const BasisFamily fam = random_family(n, 1, rng);
    const GramPack pack = exact_gram_pack(fam, ops_h(h));
    const RitzResult r = ritz_spectrum(pack);
    const double expect = (pack.op("H")(0, 0) / pack.G(0, 0)).real();
    CHECK(r.values[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("ritz spectrum of an eigenvector family is the exact eigenvalues") {
    const int n = 6;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::periodic}, 1.0, 1.1);
    const SpectralDecomposition sd = diagonalize(h);
    std::vector<AmplitudeState> members;
    for (int k = 0; k < 3; ++k)
        members.emplace_back(n, sd.eigenvectors.col(k).cast<cplx>(), "E");
    const GramPack pack = exact_gram_pack(BasisFamily(std::move(members)), ops_h(h));
    const RitzResult r = ritz_spectrum(pack);
    for (int k = 0; k < 3; ++k)
        CHECK(std::abs(r.values[k] - sd.eigenvalues(k)) < 1e-10);
}

TEST_CASE("ritz values upper-bound the exact spectrum (interlacing)") {
    Rng rng(11);
    int trials = 0;
    while (trials < 200) {
        const int dim = 4 + int(rng.below(5));          // Hilbert dim 4..8
        const int m = 1 + int(rng.below(3));            // subspace dim 1..3
        const Eigen::MatrixXcd h = random_hermitian(dim, rng);
        Eigen::MatrixXcd a = random_cmatrix(dim, m, rng);

        // Direct dense computation of the generalized problem.
        const Eigen::MatrixXcd g = a.adjoint() * a;
        const Eigen::MatrixXcd gh = a.adjoint() * h * a;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ge(g);
        if (ge.eigenvalues().minCoeff() < 1e-8 * ge.eigenvalues().maxCoeff()) continue;
        GramPack pack;
        pack.G = g;
        pack.G_ops["H"] = gh;
        pack.scale_known = true;
        const RitzResult r = ritz_spectrum(pack);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> he(h);
        for (int k = 0; k < m; ++k)
            CHECK(r.values[k] - he.eigenvalues()(k) >= -1e-10);
        // Ky Fan consistency: the Ritz values sum to tr(G^-1 G^H).
        const cplx tr = g.partialPivLu().solve(gh).trace();
        CHECK(std::abs(r.values.sum() - tr.real()) < 1e-10 * std::max(1.0, std::abs(tr)));
        ++trials;
    }
}

TEST_CASE("full-space subspace reproduces the spectrum exactly") {
    Rng rng(12);
    const int dim = 6;
    const Eigen::MatrixXcd h = random_hermitian(dim, rng);
    Eigen::MatrixXcd a = random_well_conditioned(dim, rng, 1e4);
    GramPack pack;
    pack.G = a.adjoint() * a;
    pack.G_ops["H"] = a.adjoint() * h * a;
    const RitzResult r = ritz_spectrum(pack);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> he(h);
    for (int k = 0; k < dim; ++k)
        CHECK(std::abs(r.values[k] - he.eigenvalues()(k)) < 1e-9);
}

TEST_CASE("ritz vectors have the Ritz value as Rayleigh quotient") {
    Rng rng(13);
    const int n = 5, m = 3;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::open}, 1.0, 1.7);
    const BasisFamily fam = random_family(n, m, rng);
    const GramPack pack = exact_gram_pack(fam, ops_h(h));
    const RitzResult r = ritz_spectrum(pack);
    for (int k = 0; k < m; ++k) {
        const Eigen::VectorXcd alpha = r.vectors.col(k);
        const cplx num = (alpha.adjoint() * pack.op("H") * alpha).value();
        const cplx den = (alpha.adjoint() * pack.G * alpha).value();
        CHECK(std::abs(num / den - r.values[k]) < 1e-9);
        // Generalized residual.
        CHECK((pack.op("H") * alpha - r.values[k] * (pack.G * alpha)).norm() < 1e-8);
    }
}

TEST_CASE("ritz values are basis invariant") {
    Rng rng(14);
    const int n = 4, m = 3;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::open}, 1.0, 1.0);
    const BasisFamily fam = random_family(n, m, rng);
    const BasisFamily mixed = change_basis(fam, random_well_conditioned(m, rng));
    const RitzResult ra = ritz_spectrum(exact_gram_pack(fam, ops_h(h)));
    const RitzResult rb = ritz_spectrum(exact_gram_pack(mixed, ops_h(h)));
    CHECK((ra.values - rb.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("ritz spectrum from an estimate matrix keeps imaginary diagnostics") {
    RayleighEstimate est;
    est.M = Eigen::MatrixXcd::Zero(2, 2);
    est.M(0, 0) = cplx(1.0, 1e-5);
    est.M(1, 1) = cplx(-2.0, -1e-5);
    const RitzResult r = ritz_spectrum(est);
    CHECK(r.values[0] == doctest::Approx(-2.0));
    CHECK(r.values[1] == doctest::Approx(1.0));
    CHECK(r.values_imag_residual.maxCoeff() == doctest::Approx(1e-5));
}

TEST_CASE("singular Gram matrix is rejected by the exact Ritz path") {
    GramPack pack;
    pack.G = Eigen::MatrixXcd::Zero(2, 2);
    pack.G(0, 0) = 1.0;
    pack.G_ops["H"] = Eigen::MatrixXcd::Identity(2, 2);
    CHECK_THROWS_AS(ritz_spectrum(pack), NumericalError);
}

TEST_CASE("ritz observable: consistency cases") {
    Rng rng(15);
    const int n = 5, m = 3;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::open}, 1.0, 1.3);
    const BasisFamily fam = random_family(n, m, rng);
    std::map<std::string, OperatorTerms> ops{{"H", h},
                                             {"A", magnetization_x(n)},
                                             {"I", identity_op(n)}};
    const GramPack pack = exact_gram_pack(fam, ops);
    const RitzResult r = ritz_spectrum(pack);

    SUBCASE("A = H returns the Ritz values") {
        const Eigen::VectorXd vals = ritz_observable(pack, "H", "H");
        CHECK((vals - r.values).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("A = identity returns ones") {
        const Eigen::VectorXd vals = ritz_observable(pack, "H", "I");
        CHECK((vals - Eigen::VectorXd::Ones(m)).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("A = M_x matches the dense reconstruction") {
        const Eigen::VectorXd vals = ritz_observable(pack, "H", "A");
        const Eigen::MatrixXd mx = dense_matrix(magnetization_x(n));
        for (int k = 0; k < m; ++k) {
            Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(1 << n);
            for (int j = 0; j < m; ++j) psi += r.vectors(j, k) * fam[j].amplitudes;
            const double direct =
                ((psi.adjoint() * (mx * psi)).value() / psi.squaredNorm()).real();
            CHECK(std::abs(vals[k] - direct) < 1e-9);
        }
    }
}

TEST_CASE("ritz observable refuses degenerate Ritz values") {
    GramPack pack;
    pack.G = Eigen::MatrixXcd::Identity(2, 2);
    pack.G_ops["H"] = Eigen::MatrixXcd::Identity(2, 2);   // both Ritz values 1
    pack.G_ops["A"] = Eigen::MatrixXcd::Identity(2, 2);
    CHECK_THROWS_WITH_AS(ritz_observable(pack, "H", "A"), doctest::Contains("degenerate"),
                         ValidationError);
}

TEST_CASE("ground-state interpolation across the transverse field") {
    const int n = 6;
    const Geometry geom{LatticeKind::chain, n, Boundary::open};
    const OperatorTerms h_zz = build_tfim(geom, 1.0, 0.0);
    const OperatorTerms h_x  = build_tfim(geom, 0.0, 1.0);

    // Anchor ground states at a few fields.
    const std::vector<double> anchors{0.5, 0.875, 1.25, 1.625, 2.0};
    std::vector<AmplitudeState> members;
    for (double hf : anchors)
        members.push_back(ground_state(combine_terms({1.0, hf}, {h_zz, h_x})));
    const BasisFamily fam{std::move(members)};
    const GramPack pack =
        exact_gram_pack(fam, {{"H0", h_zz}, {"H1", h_x}});
    const GroundInterpolator interp(pack, {"H0", "H1"});

    SUBCASE("query at an anchor recovers that ground state") {
        const InterpolationResult r = interp.at({1.0, anchors[2]});
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(1 << n);
        for (int j = 0; j < fam.size(); ++j) psi += r.alpha[j] * fam[j].amplitudes;
        const AmplitudeState interp_state{n, psi, "interp"};
        CHECK(1.0 - fidelity(interp_state, fam[2]) < 1e-10);
    }
    SUBCASE("interpolated states beat the nearest anchor in between") {
        int wins = 0, queries = 0;
        for (double hq : {0.6875, 1.0625, 1.4375, 1.8125}) {
            const OperatorTerms hq_op = combine_terms({1.0, hq}, {h_zz, h_x});
            const AmplitudeState exact_gs = ground_state(hq_op);
            const InterpolationResult r = interp.at({1.0, hq});
            Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(1 << n);
            for (int j = 0; j < fam.size(); ++j) psi += r.alpha[j] * fam[j].amplitudes;
            const double inf_interp = 1.0 - fidelity({n, psi, "interp"}, exact_gs);
            double best_anchor = 1.0;
            for (int j = 0; j < fam.size(); ++j)
                best_anchor = std::min(best_anchor, 1.0 - fidelity(fam[j], exact_gs));
            ++queries;
            if (inf_interp <= best_anchor) ++wins;
            // The optimal linear combination can only beat a single member.
            CHECK(inf_interp < 1e-2);
        }
        CHECK(wins == queries);
    }
    SUBCASE("gamma endpoint: zero transverse weight reduces to the H0 pack") {
        const InterpolationResult r = interp.at({1.0, 0.0});
        const RitzResult rz = ritz_spectrum(pack, "H0");
        CHECK(r.mu0 == doctest::Approx(rz.values[0]).epsilon(1e-10));
    }
    SUBCASE("gamma length mismatch is rejected") {
        CHECK_THROWS_AS(interp.at({1.0}), ValidationError);
    }
}

TEST_CASE("merging per-part packs rejects mixed scale conventions") {
    Rng rng(16);
    const int n = 3, m = 2;
    const BasisFamily fam = random_family(n, m, rng);
    const OperatorTerms h0 = build_tfim({LatticeKind::chain, n, Boundary::open}, 1.0, 0.0);
    const OperatorTerms h1 = build_tfim({LatticeKind::chain, n, Boundary::open}, 0.0, 1.0);

    GramPack a = exact_gram_pack(fam, ops_h(h0));
    GramPack b = exact_gram_pack(fam, ops_h(h1));
    const GramPack merged = merge_part_packs({a, b}, {"H0", "H1"});
    CHECK(merged.G_ops.count("H0") == 1);
    CHECK(merged.G_ops.count("H1") == 1);

    GramPack c = exhaustive_sum_of_states(fam, ops_h(h1));
    CHECK_THROWS_AS(merge_part_packs({a, c}, {"H0", "H1"}), ValidationError);
}
