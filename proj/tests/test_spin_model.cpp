#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <map>

#include "detspace/oracle.hpp"
#include "detspace/spin_model.hpp"
#include "support/helpers.hpp"

using namespace detspace;
using detspace::testing::cfg_of;
using detspace::testing::dense_by_terms;

TEST_CASE("tfim chain n=2 open, zz only: classical diagonal") {
    const OperatorTerms h = build_tfim({LatticeKind::chain, 2, Boundary::open}, 1.0, 0.0);
    CHECK(h.diagonal_element(cfg_of(0b00, 2)) == doctest::Approx(-1.0));   // up up
    CHECK(h.diagonal_element(cfg_of(0b10, 2)) == doctest::Approx(+1.0));   // up down
}

TEST_CASE("tfim chain n=2 open, field only: ground energy -2") {
    const OperatorTerms h = build_tfim({LatticeKind::chain, 2, Boundary::open}, 0.0, 1.0);
    const SpectralDecomposition sd = diagonalize(h);
    CHECK(sd.eigenvalues(0) == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("tfim 4x4 periodic square: 32 bonds and 16 field terms") {
    const Geometry g{LatticeKind::square, 4, Boundary::periodic};
    CHECK(g.sites() == 16);
    CHECK(g.bonds().size() == 32);
    const OperatorTerms h = build_tfim(g, 1.0, 2.0 * 3.044);
    int zz = 0, x = 0;
    for (const auto& t : h.terms()) {
        if (t.body == TermBody::zz) ++zz;
        if (t.body == TermBody::x) ++x;
    }
    CHECK(zz == 32);
    CHECK(x == 16);
}

TEST_CASE("periodic chain n=2 keeps a single bond") {
    const Geometry g{LatticeKind::chain, 2, Boundary::periodic};
    CHECK(g.bonds().size() == 1);
}

TEST_CASE("geometry validation and parsing") {
    CHECK_THROWS_AS(Geometry({LatticeKind::chain, 0, Boundary::open}).sites(),
                    ValidationError);
    CHECK_THROWS_AS(build_tfim({LatticeKind::square, -1, Boundary::open}, 1, 1),
                    ValidationError);
    const Geometry g = parse_geometry("square:4:periodic");
    CHECK(g.kind == LatticeKind::square);
    CHECK(g.extent == 4);
    CHECK(g.boundary == Boundary::periodic);
    CHECK_THROWS_AS(parse_geometry("hex:3:open"), ValidationError);
    CHECK_THROWS_AS(parse_geometry("chain:open"), ValidationError);
}

TEST_CASE("connected elements of the n=2 tfim at up-up") {
    const OperatorTerms h = build_tfim({LatticeKind::chain, 2, Boundary::open}, 1.0, 0.5);
    const auto conn = h.connected_elements(cfg_of(0b00, 2));
    std::map<std::uint32_t, cplx> got;
    for (const auto& [s, v] : conn) got[s.bits] = v;
    REQUIRE(got.size() == 3);
    CHECK(got[0b00] == cplx(-1.0, 0.0));
    CHECK(got[0b01] == cplx(-0.5, 0.0));   // site 0 flipped
    CHECK(got[0b10] == cplx(-0.5, 0.0));   // site 1 flipped
}

TEST_CASE("identity operator connects a config only to itself") {
    const OperatorTerms one = identity_op(3);
    const auto conn = one.connected_elements(cfg_of(0b101, 3));
    REQUIRE(conn.size() == 1);
    CHECK(conn[0].first.bits == 0b101);
    CHECK(conn[0].second == cplx(1.0, 0.0));
}

TEST_CASE("transverse magnetization connects to each single flip with 1/n") {
    const OperatorTerms mx = magnetization_x(4);
    const auto conn = mx.connected_elements(cfg_of(0b0110, 4));
    REQUIRE(conn.size() == 4);   // no diagonal entry at all
    for (const auto& [s, v] : conn) {
        CHECK(std::popcount(s.bits ^ 0b0110u) == 1);
        CHECK(v == cplx(0.25, 0.0));
    }
}

TEST_CASE("connected elements reject a site-count mismatch") {
    const OperatorTerms h = build_tfim({LatticeKind::chain, 3, Boundary::open}, 1.0, 1.0);
    CHECK_THROWS_AS(h.connected_elements(cfg_of(0, 2)), ValidationError);
}

TEST_CASE("combine_terms endpoints and linearity") {
    const OperatorTerms h0 = build_tfim({LatticeKind::chain, 3, Boundary::open}, 1.0, 0.0);
    const OperatorTerms h1 = build_tfim({LatticeKind::chain, 3, Boundary::open}, 0.0, 1.0);

    SUBCASE("gamma (1,0) reproduces the first part") {
        const OperatorTerms c = combine_terms({1.0, 0.0}, {h0, h1});
        CHECK((dense_matrix(c) - dense_matrix(h0)).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("gamma (1,1) over the diagonal/off-diagonal split restores the whole") {
        const OperatorTerms full =
            build_tfim({LatticeKind::chain, 3, Boundary::open}, 1.0, 1.0);
        const OperatorTerms c =
            combine_terms({1.0, 1.0}, {full.diagonal_part(), full.offdiagonal_part()});
        CHECK((dense_matrix(c) - dense_matrix(full)).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("gamma (2) doubles every matrix element") {
        const OperatorTerms c = combine_terms({2.0}, {h0});
        CHECK((dense_matrix(c) - 2.0 * dense_matrix(h0)).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("mismatched shapes are rejected") {
        const OperatorTerms other =
            build_tfim({LatticeKind::chain, 4, Boundary::open}, 1.0, 0.0);
        CHECK_THROWS_AS(combine_terms({1.0, 1.0}, {h0, other}), ValidationError);
        CHECK_THROWS_AS(combine_terms({1.0}, {h0, h1}), ValidationError);
    }
}

TEST_CASE("dense reconstruction agrees with the independent term-by-term build") {
    for (int n : {2, 3, 6, 10}) {
        const OperatorTerms h = build_tfim(
            {LatticeKind::chain, n, n % 2 ? Boundary::periodic : Boundary::open}, 1.3, 0.7);
        const Eigen::MatrixXd a = dense_matrix(h);
        const Eigen::MatrixXd b = dense_by_terms(h);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-14);   // Hermitian (real)
    }
}

TEST_CASE("operator spec JSON round trip") {
    const OperatorTerms h =
        build_tfim({LatticeKind::square, 2, Boundary::open}, 1.0, 0.25);
    const std::string text = operator_to_json(h);
    const OperatorTerms back = operator_from_json(text);
    CHECK(back.sites() == h.sites());
    CHECK((dense_matrix(back) - dense_matrix(h)).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(operator_from_json("{bad"), ValidationError);
    CHECK_THROWS_AS(operator_from_json(R"({"n":2,"terms":[{"coeff":1,"body":"ZZ","sites":[0]}]})"),
                    ValidationError);
    CHECK_THROWS_AS(operator_from_json(R"({"n":2,"terms":[{"coeff":1,"body":"X","sites":[5]}]})"),
                    ValidationError);
}
