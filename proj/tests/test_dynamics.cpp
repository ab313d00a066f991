#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "detspace/dynamics.hpp"
#include "detspace/oracle.hpp"
#include "detspace/spin_model.hpp"
#include "support/helpers.hpp"

using namespace detspace;
using detspace::testing::cfg_of;
using detspace::testing::random_hermitian;

namespace {

/// Least-squares slope of log(err) vs log(delta).
double richardson_slope(const std::vector<double>& deltas, const std::vector<double>& errs) {
    const int n = static_cast<int>(deltas.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double x = std::log(deltas[i]), y = std::log(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double one_step_error(const SchemeSpec& scheme, const Eigen::MatrixXcd& h, double delta) {
    const Eigen::MatrixXcd u = scheme_step_matrix(scheme, h, delta);
    const Eigen::MatrixXcd exact = expm_dense(cplx(0.0, -delta) * h);
    return (u - exact).cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("lpe coefficients: order 1 and the (1 +- i)/2 pair at order 2") {
    const SchemeSpec s1 = scheme_coefficients(SchemeKind::lpe, 1);
    REQUIRE(s1.a.size() == 1);
    CHECK(std::abs(s1.a[0] - cplx(1.0, 0.0)) < 1e-14);

    const SchemeSpec s2 = scheme_coefficients(SchemeKind::lpe, 2);
    REQUIRE(s2.a.size() == 2);
    CHECK(std::abs(s2.a[0] - cplx(0.5, 0.5)) < 1e-14);
    CHECK(std::abs(s2.a[1] - cplx(0.5, -0.5)) < 1e-14);

    // Product identity: (1 - i a1 x)(1 - i a2 x) = 1 - i x - x^2/2.
    const cplx a1 = s2.a[0], a2 = s2.a[1];
    CHECK(std::abs(a1 + a2 - 1.0) < 1e-14);
    CHECK(std::abs(a1 * a2 - 0.5) < 1e-14);
}

TEST_CASE("slpe2 coefficients satisfy the mixed order conditions") {
    const SchemeSpec s = scheme_coefficients(SchemeKind::slpe, 2);
    REQUIRE(s.a.size() == 2);
    REQUIRE(s.b.size() == 2);
    CHECK(std::abs(s.a[0] + s.a[1] - 1.0) < 1e-14);
    CHECK(std::abs(s.a[0] * s.a[1] - 0.5) < 1e-14);
    CHECK(std::abs(s.b[0] + s.b[1] - 1.0) < 1e-14);
    CHECK(std::abs(s.a[1] * s.b[0] - 0.5) < 1e-14);
    CHECK(std::abs(s.a[0] + s.a[1] * s.b[1] - 0.5) < 1e-14);
}

TEST_CASE("higher-order lpe factors pass their polynomial identity check") {
    // Construction runs the residual check against the truncated series.
    CHECK(scheme_coefficients(SchemeKind::lpe, 3).a.size() == 3);
    CHECK(scheme_coefficients(SchemeKind::lpe, 4).a.size() == 4);
    Rng rng(61);
    const Eigen::MatrixXcd h = detspace::testing::random_hermitian(5, rng);
    const double err3 = one_step_error(scheme_coefficients(SchemeKind::lpe, 3), h, 0.01);
    const double err4 = one_step_error(scheme_coefficients(SchemeKind::lpe, 4), h, 0.01);
    CHECK(err4 < err3);   // higher order is strictly better at small steps
}

TEST_CASE("scheme parsing and validation") {
    CHECK(parse_scheme("lpe2").kind == SchemeKind::lpe);
    CHECK(parse_scheme("slpe2").order == 2);
    CHECK(parse_scheme("trotter2").kind == SchemeKind::trotter2);
    CHECK(parse_scheme("exact").kind == SchemeKind::exact);
    CHECK(parse_scheme("taylor3").order == 3);
    CHECK_THROWS_AS(parse_scheme("lpe9"), ValidationError);
    CHECK_THROWS_AS(parse_scheme("rk4"), ValidationError);
    CHECK_THROWS_AS(scheme_coefficients(SchemeKind::slpe, 3), ValidationError);
}

TEST_CASE("one-step error slopes match order+1 on random Hermitian generators") {
    Rng rng(101);
    const Eigen::MatrixXcd h = random_hermitian(6, rng);
    const std::vector<double> deltas{0.02, 0.01, 0.005, 0.0025};

    auto slope_of = [&](const SchemeSpec& scheme) {
        std::vector<double> errs;
        for (double d : deltas) errs.push_back(one_step_error(scheme, h, d));
        return richardson_slope(deltas, errs);
    };

    CHECK(std::abs(slope_of(scheme_coefficients(SchemeKind::lpe, 1)) - 2.0) < 0.2);
    CHECK(std::abs(slope_of(scheme_coefficients(SchemeKind::lpe, 2)) - 3.0) < 0.2);
    CHECK(std::abs(slope_of(scheme_coefficients(SchemeKind::slpe, 2)) - 3.0) < 0.2);
    CHECK(std::abs(slope_of(scheme_coefficients(SchemeKind::trotter2, 2)) - 3.0) < 0.2);
    CHECK(std::abs(slope_of(scheme_coefficients(SchemeKind::taylor, 2)) - 3.0) < 0.2);
}

TEST_CASE("exact evolver: t=0 identity and diagonal phases") {
    const int n = 3;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::open}, 1.0, 0.0);
    const ExactEvolver ev(h);

    Rng rng(7);
    const AmplitudeState psi = random_state(n, rng);
    const AmplitudeState same = ev.at(psi, 0.0);
    CHECK((same.amplitudes - psi.amplitudes).cwiseAbs().maxCoeff() < 1e-14);

    // Diagonal H: a basis vector only picks up the phase exp(-i E t).
    const SpinConfig s = cfg_of(0b101, n);
    const double e = h.diagonal_element(s);
    const AmplitudeState evolved = ev.at(basis_state(s), 0.7);
    const cplx expect = std::exp(cplx(0.0, -e * 0.7));
    CHECK(std::abs(evolved.amplitudes[s.index()] - expect) < 1e-12);
    CHECK(std::abs(std::abs(evolved.amplitudes[s.index()]) - 1.0) < 1e-12);
}

TEST_CASE("dense spectral and Krylov evolution agree") {
    const int n = 7;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::periodic}, 1.0, 1.2);
    const AmplitudeState psi0 = uniform_state(n);
    const ExactEvolver dense(h);
    REQUIRE(dense.dense());

    const AmplitudeState a = dense.at(psi0, 5.0);
    Eigen::VectorXcd b = krylov_expm_multiply(h, psi0.amplitudes, cplx(0.0, -5.0), 1e-12);
    const AmplitudeState bk{n, b, "krylov"};
    CHECK(1.0 - fidelity(a, bk) < 1e-10);
    CHECK(std::abs(norm(bk) - 1.0) < 1e-10);
}

TEST_CASE("scheme application to states matches the dense step matrix") {
    Rng rng(11);
    const int n = 5;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::open}, 1.0, 1.4);
    const Eigen::MatrixXcd hd = dense_matrix(h).cast<cplx>();
    const AmplitudeState psi = random_state(n, rng);
    const double delta = 0.07;

    for (const char* name : {"taylor2", "lpe1", "lpe2", "slpe2", "trotter2"}) {
        const SchemeSpec scheme = parse_scheme(name);
        const AmplitudeState stepped = apply_scheme_step(scheme, h, psi, delta);
        const Eigen::VectorXcd expect = scheme_step_matrix(scheme, hd, delta) * psi.amplitudes;
        INFO("scheme ", name);
        CHECK((stepped.amplitudes - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("generated exact basis tracks the dynamics to roundoff") {
    const int n = 6;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::periodic}, 1.0, 2.0);
    const GeneratedBasis gb =
        generate_basis(h, uniform_state(n), 0.05, 10, parse_scheme("exact"));
    CHECK(gb.family.size() == 11);
    for (double inf : gb.report.infidelity_vs_exact) CHECK(inf < 1e-12);
    for (const auto& member : gb.family.members)
        CHECK(std::abs(norm(member) - 1.0) < 1e-12);
}

TEST_CASE("trotter2 global error scales as delta^2 in the final infidelity") {
    const int n = 6;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::periodic}, 1.0, 2.0);
    const AmplitudeState psi0 = uniform_state(n);
    const double total_time = 0.5;

    auto final_infidelity = [&](double delta) {
        const int steps = static_cast<int>(std::round(total_time / delta));
        const GeneratedBasis gb =
            generate_basis(h, psi0, delta, steps, parse_scheme("trotter2"));
        return gb.report.infidelity_vs_exact.back();
    };
    const double coarse = final_infidelity(0.05);
    const double fine = final_infidelity(0.025);
    // State error ~ delta^2 gives infidelity ~ delta^4: halving delta wins ~16x.
    const double gain = coarse / fine;
    CHECK(gain > 8.0);
    CHECK(gain < 32.0);
}

TEST_CASE("injected noise shows up as the per-step infidelity floor") {
    const int n = 5;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::periodic}, 1.0, 1.0);
    const AmplitudeState psi0 = uniform_state(n);
    const double eps = 1e-4;
    const ExactEvolver ev(h);

    double acc = 0.0;
    int count = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        NoiseSpec noise;
        noise.kind = NoiseSpec::Kind::gaussian;
        noise.eps = eps;
        noise.seed = seed;
        const GeneratedBasis gb =
            generate_basis(h, psi0, 0.05, 8, parse_scheme("exact"), noise);
        // Per-step error: infidelity of member k against the exact step from
        // member k-1 isolates the injected noise.
        for (int k = 1; k < gb.family.size(); ++k) {
            const AmplitudeState ideal = ev.at(gb.family[k - 1], 0.05);
            acc += 1.0 - fidelity(gb.family[k], ideal);
            ++count;
        }
    }
    const double mean = acc / count;
    CHECK(mean > 0.3 * eps * eps);
    CHECK(mean < 3.0 * eps * eps);
}

TEST_CASE("noise parsing and reproducibility") {
    CHECK(NoiseSpec::parse("none").kind == NoiseSpec::Kind::none);
    CHECK(NoiseSpec::parse("g:1e-4").eps == 1e-4);
    CHECK_THROWS_AS(NoiseSpec::parse("g:-1"), ValidationError);
    CHECK_THROWS_AS(NoiseSpec::parse("uniform:0.1"), ValidationError);

    const int n = 4;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::open}, 1.0, 1.0);
    NoiseSpec noise;
    noise.kind = NoiseSpec::Kind::gaussian;
    noise.eps = 1e-3;
    noise.seed = 9;
    const GeneratedBasis a = generate_basis(h, uniform_state(n), 0.1, 4,
                                            parse_scheme("lpe2"), noise);
    const GeneratedBasis b = generate_basis(h, uniform_state(n), 0.1, 4,
                                            parse_scheme("lpe2"), noise);
    for (int k = 0; k < a.family.size(); ++k)
        CHECK(a.family[k].amplitudes == b.family[k].amplitudes);
}

TEST_CASE("generation report carries a full infidelity-vs-exact diagnostic") {
    // Monotone growth of these infidelities is a logged diagnostic only;
    // coherent discretization error can partially rephase, so it is not
    // asserted here.
    const int n = 5;
    const OperatorTerms h = build_tfim({LatticeKind::chain, n, Boundary::periodic}, 1.0, 1.5);
    const GeneratedBasis gb =
        generate_basis(h, uniform_state(n), 0.05, 12, parse_scheme("trotter2"));
    REQUIRE(gb.report.infidelity_vs_exact.size() == 13);
    REQUIRE(gb.report.times.size() == 13);
    CHECK(gb.report.infidelity_vs_exact.front() < 1e-14);
    for (double x : gb.report.infidelity_vs_exact) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }
    CHECK(gb.report.infidelity_vs_exact.back() > 1e-8);   // error did accumulate
    CHECK(gb.report.scheme == "trotter2");
}

TEST_CASE("generate_basis validation") {
    const OperatorTerms h = build_tfim({LatticeKind::chain, 3, Boundary::open}, 1.0, 1.0);
    CHECK_THROWS_AS(generate_basis(h, uniform_state(3), 0.1, 0, parse_scheme("exact")),
                    ValidationError);
    NoiseSpec bad;
    bad.kind = NoiseSpec::Kind::gaussian;
    bad.eps = -0.5;
    CHECK_THROWS_AS(generate_basis(h, uniform_state(3), 0.1, 2, parse_scheme("exact"), bad),
                    ValidationError);
}
