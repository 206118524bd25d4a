#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "treescm/fastp.hpp"
#include "treescm/equation_graph.hpp"
#include "treescm/exact.hpp"
#include "support/gen.hpp"

using namespace treescm;

namespace {

PitSession make_session(std::uint64_t seed, std::uint64_t degree_bound = 2048) {
    return PitSession(kDefaultPrime, seed, 0x1p-40, degree_bound);
}

Mat2<ExprRef> const_mat(ExprArena& a, long long m00, long long m01, long long m10,
                        long long m11) {
    return {a.constant(m00), a.constant(m01), a.constant(m10), a.constant(m11)};
}

// Three siblings, each confounded with the root: every pair gives a rank-2
// equation and the equation graph is a triangle.
TreeScm three_siblings() { return TreeScm(3, {-1, 0, 0, 0}, {{0, 1}, {0, 2}, {0, 3}}); }

// Walk weight around the triangle 1 -> 2 -> 3 -> 1 of the sibling model.
Mat2<ExprRef> sibling_cycle_weight(ExprArena& a, const TreeScm& m, const EquationGraph& g) {
    ExprRing ring{&a};
    Mat2<ExprRef> acc = mat_identity(ring);
    const int cyc[3] = {1, 2, 3};
    for (int k = 0; k < 3; ++k) {
        int u = cyc[k], v = cyc[(k + 1) % 3];
        for (const auto& e : g.edges())
            if (e.u == u && e.v == v) {
                acc = mat_mul(ring, e.w, acc);
                break;
            }
    }
    (void)m;
    return acc;
}

}  // namespace

TEST_CASE("fixed points of a constant cycle weight") {
    ExprArena a;
    auto session = make_session(2);

    SECTION("two irrational branches") {
        // 2x^2 + 2x - 1 = 0, discriminant 12.
        Mat2<ExprRef> w = const_mat(a, -1, 1, 2, 1);
        CycleRoots roots = roots_from_cycle(a, w, nullptr, session);
        REQUIRE(roots.kind == CycleRoots::Kind::TwoBranches);
        REQUIRE(roots.first.has_value());
        REQUIRE(roots.second.has_value());
        CHECK(roots.first->s == roots.second->s);
        RealSigma S;
        // The sign of the radical lives in q = +-1; both branches read the
        // same (principal) square root.
        double hi = eval_fastp_real(a, *roots.first, S);
        double lo = eval_fastp_real(a, *roots.second, S);
        CHECK(hi == Catch::Approx((-1.0 + std::sqrt(3.0)) / 2.0));
        CHECK(lo == Catch::Approx((-1.0 - std::sqrt(3.0)) / 2.0));
        for (double x : {hi, lo}) CHECK(2 * x * x + 2 * x - 1 == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("repeated rational root") {
        // x^2 + 2x + 1 = 0.
        Mat2<ExprRef> w = const_mat(a, 0, -1, 1, 2);
        CycleRoots roots = roots_from_cycle(a, w, nullptr, session);
        REQUIRE(roots.kind == CycleRoots::Kind::OneRational);
        REQUIRE(roots.first.has_value());
        CHECK(fastp_is_rational(a, *roots.first));
        RealSigma S;
        CHECK(eval_fastp_real(a, *roots.first, S) == Catch::Approx(-1.0));
    }

    SECTION("linear equation") {
        // 2x - 4 = 0 after the quadratic coefficient vanishes.
        Mat2<ExprRef> w = const_mat(a, 1, 4, 0, 3);
        CycleRoots roots = roots_from_cycle(a, w, nullptr, session);
        REQUIRE(roots.kind == CycleRoots::Kind::OneRational);
        RealSigma S;
        CHECK(eval_fastp_real(a, *roots.first, S) == Catch::Approx(2.0));
    }

    SECTION("contradictory equation") {
        Mat2<ExprRef> w = const_mat(a, 1, 5, 0, 1);
        CHECK(roots_from_cycle(a, w, nullptr, session).kind == CycleRoots::Kind::NoSolution);
    }

    SECTION("identity weight constrains nothing") {
        Mat2<ExprRef> w = const_mat(a, 1, 0, 0, 1);
        CHECK(roots_from_cycle(a, w, nullptr, session).kind == CycleRoots::Kind::Infinite);
    }
}

TEST_CASE("zero test runs over the model's covariance variety") {
    ExprArena a;
    // det of the pair {1,2} constraint: zero on the plain chain, nonzero when
    // both siblings are confounded with the root.
    TreeScm chain(2, {-1, 0, 1}, {});
    TreeScm sibs(2, {-1, 0, 0}, {{0, 1}, {0, 2}});
    MissingEdge e_chain = chain.missing_edges().nonroot.at(0);
    MissingEdge e_sibs = sibs.missing_edges().nonroot.at(0);
    auto det_of = [&](const MissingEdge& e) {
        return a.sub(a.mul(a.sigma(e.i, e.j), a.sigma(e.pi, e.pj)),
                     a.mul(a.sigma(e.pi, e.j), a.sigma(e.i, e.pj)));
    };
    auto session = make_session(11);
    CHECK(expr_is_zero_on_model(a, det_of(e_chain), &chain, session));
    CHECK_FALSE(expr_is_zero_on_model(a, det_of(e_sibs), &sibs, session));
    // Constant expressions are decided exactly, without sigma sampling.
    CHECK(expr_is_zero_on_model(a, a.zero(), nullptr, session));
    CHECK_FALSE(expr_is_zero_on_model(a, a.constant(7), nullptr, session));
}

TEST_CASE("model-backed cycle roots evaluate to the true coefficient") {
    ExprArena a;
    TreeScm m = three_siblings();
    EquationGraph g = EquationGraph::from_model(a, m, m.missing_edges().nonroot);
    Mat2<ExprRef> w = sibling_cycle_weight(a, m, g);
    auto session = make_session(5, (6 * 3 + 4) * (2 * 3 + 2));
    CycleRoots roots = roots_from_cycle(a, w, &m, session);
    REQUIRE(roots.kind == CycleRoots::Kind::TwoBranches);

    const PrimeField& F = session.field();
    for (int rep = 0; rep < 5; ++rep) {
        ParamAssignment truth = sample_assignment(m, session);
        SigmaMatrix S = sigma_matrix(m, truth, F);
        std::uint64_t plus = eval_fastp_field(a, *roots.first, F, S);
        std::uint64_t minus = eval_fastp_field(a, *roots.second, F, S);
        // One branch recovers lambda_1; the two branches are the two roots.
        CHECK((plus == truth.lambda[1] || minus == truth.lambda[1]));
    }
}

TEST_CASE("propagation shares the radicand and satisfies the edge equation") {
    ExprArena a;
    TreeScm m = three_siblings();
    EquationGraph g = EquationGraph::from_model(a, m, m.missing_edges().nonroot);
    Mat2<ExprRef> w = sibling_cycle_weight(a, m, g);
    auto session = make_session(6, (6 * 3 + 4) * (2 * 3 + 2));
    CycleRoots roots = roots_from_cycle(a, w, &m, session);
    REQUIRE(roots.kind == CycleRoots::Kind::TwoBranches);

    const Mat2<ExprRef>* m12 = nullptr;
    for (const auto& e : g.edges())
        if (e.u == 1 && e.v == 2) m12 = &e.w;
    REQUIRE(m12 != nullptr);

    Fastp x = *roots.first;
    Fastp y = propagate(a, *m12, x, &m, session);
    CHECK(y.s == x.s);  // same radicand node, not merely an equal expression
    CHECK(fastp_satisfies(a, x, y, *m12, &m, session));
    CHECK(fastp_equal(a, x, x, &m, session));
    CHECK_FALSE(fastp_equal(a, *roots.first, *roots.second, &m, session));

    // A wrong value at the target violates the equation.
    Fastp bad = fastp_rational(a, a.sigma(0, 2), a.sigma(0, 0));
    CHECK_FALSE(fastp_satisfies(a, x, bad, *m12, &m, session));
}

TEST_CASE("propagation through a degenerate map is rejected") {
    ExprArena a;
    auto session = make_session(8);
    Mat2<ExprRef> collapse{a.one(), a.one(), a.zero(), a.zero()};
    Fastp x = fastp_rational(a, a.one(), a.one());
    CHECK_THROWS_AS(propagate(a, collapse, x, nullptr, session), FastpError);
}

TEST_CASE("rational quotient of covariances round-trips through text") {
    ExprArena a;
    Fastp f = fastp_rational(a, a.sigma(0, 2), a.sigma(0, 1));
    std::string s = serialize_fastp(a, f);
    CHECK(s == "\xcf\x83[0,2]/\xcf\x83[0,1]");
    CHECK(parse_fastp(a, s) == f);

    Fastp z = fastp_rational(a, a.zero(), a.one());
    CHECK(serialize_fastp(a, z) == "(0)/(1)");
    CHECK(parse_fastp(a, "(0)/(1)") == z);
}

TEST_CASE("radical expressions round-trip through text") {
    ExprArena a;
    auto session = make_session(9);

    SECTION("constant coefficients") {
        Mat2<ExprRef> w = const_mat(a, -1, 1, 2, 1);
        CycleRoots roots = roots_from_cycle(a, w, nullptr, session);
        REQUIRE(roots.kind == CycleRoots::Kind::TwoBranches);
        for (const Fastp& f : {*roots.first, *roots.second}) {
            std::string s = serialize_fastp(a, f);
            CAPTURE(s);
            CHECK(parse_fastp(a, s) == f);
        }
        CHECK(serialize_fastp(a, *roots.first) ==
              "((-2)+(1)*sqrt(12))/((4)+(0)*sqrt(12))");
    }

    SECTION("covariance coefficients from a model cycle") {
        TreeScm m = three_siblings();
        EquationGraph g = EquationGraph::from_model(a, m, m.missing_edges().nonroot);
        auto msession = make_session(10, (6 * 3 + 4) * (2 * 3 + 2));
        CycleRoots roots =
            roots_from_cycle(a, sibling_cycle_weight(a, m, g), &m, msession);
        REQUIRE(roots.kind == CycleRoots::Kind::TwoBranches);
        Fastp prop;
        {
            const Mat2<ExprRef>* m12 = nullptr;
            for (const auto& e : g.edges())
                if (e.u == 1 && e.v == 2) m12 = &e.w;
            prop = propagate(a, *m12, *roots.first, &m, msession);
        }
        for (const Fastp& f : {*roots.first, *roots.second, prop}) {
            std::string s = serialize_fastp(a, f);
            CAPTURE(s);
            CHECK(parse_fastp(a, s) == f);
        }
    }
}

TEST_CASE("parser rejects malformed input") {
    ExprArena a;
    CHECK_THROWS_AS(parse_fastp(a, "(1)/(2) junk"), FastpError);
    CHECK_THROWS_AS(parse_fastp(a, "sqrt(sqrt((2)))"), FastpError);
    CHECK_THROWS_AS(parse_fastp(a, "sqrt((2))+sqrt((3))"), FastpError);
    CHECK_THROWS_AS(parse_fastp(a, "\xcf\x83[0,"), FastpError);
    CHECK_THROWS_AS(parse_fastp(a, ""), FastpError);
    CHECK_THROWS_AS(parse_fastp(a, "(1)/"), FastpError);
    CHECK_THROWS_AS(parse_fastp(a, "(99999999999999999999)"), FastpError);
}

TEST_CASE("field and real evaluation agree with direct root recovery") {
    ExprArena a;
    TreeScm m = testsupport::m1();
    Fastp f1 = fastp_rational(a, a.sigma(0, 1), a.sigma(0, 0));
    Fastp f2 = fastp_rational(a, a.sigma(0, 2), a.sigma(0, 1));
    auto session = make_session(12, 64);
    const PrimeField& F = session.field();
    for (int rep = 0; rep < 10; ++rep) {
        ParamAssignment truth = sample_assignment(m, session);
        SigmaMatrix S = sigma_matrix(m, truth, F);
        CHECK(eval_fastp_field(a, f1, F, S) == truth.lambda[1]);
        CHECK(eval_fastp_field(a, f2, F, S) == truth.lambda[2]);
    }
    // Real evaluation of the same quotients at an exact rational covariance.
    std::mt19937_64 rng(77);
    RatAssignment rt = sample_rat_assignment(m, rng);
    RatSigma RS = sigma_exact_backsub(m, rt);
    RealSigma S;
    S.nn = RS.nn;
    S.v.resize(static_cast<std::size_t>(RS.nn) * RS.nn);
    for (int i = 0; i < RS.nn; ++i)
        for (int j = 0; j < RS.nn; ++j)
            S.v[static_cast<std::size_t>(i) * RS.nn + j] = RS.at(i, j).get_d();
    CHECK(eval_fastp_real(a, f1, S) == Catch::Approx(rt.lambda[1].get_d()));
    CHECK(eval_fastp_real(a, f2, S) == Catch::Approx(rt.lambda[2].get_d()));
}
