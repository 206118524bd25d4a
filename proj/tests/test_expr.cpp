#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "treescm/covariance.hpp"
#include "treescm/equation_graph.hpp"
#include "treescm/expr.hpp"
#include "treescm/exact.hpp"
#include "treescm/mat2.hpp"
#include "support/gen.hpp"

using namespace treescm;

TEST_CASE("arena interns structurally equal expressions") {
    ExprArena a;
    ExprRef s1 = a.sigma(0, 1);
    CHECK(s1 == a.sigma(0, 1));
    CHECK(s1 == a.sigma(1, 0));  // symmetric symbol, canonical order
    CHECK(a.sigma(1, 2) != s1);
    CHECK(a.constant(7) == a.constant(7));
    CHECK(a.add(s1, a.sigma(1, 2)) == a.add(a.sigma(1, 2), s1));
    CHECK(a.mul(s1, a.sigma(1, 2)) == a.mul(a.sigma(1, 2), s1));
    CHECK_THROWS_AS(a.sigma(-1, 2), std::invalid_argument);
}

TEST_CASE("arena applies trivial identities on construction") {
    ExprArena a;
    ExprRef x = a.sigma(0, 2);
    CHECK(a.add(x, a.zero()) == x);
    CHECK(a.add(a.zero(), x) == x);
    CHECK(a.mul(x, a.one()) == x);
    CHECK(a.mul(x, a.zero()) == a.zero());
    CHECK(a.neg(a.neg(x)) == x);
    CHECK(a.add(a.constant(2), a.constant(3)) == a.constant(5));
    CHECK(a.mul(a.constant(-4), a.constant(5)) == a.constant(-20));
    CHECK(a.neg(a.constant(9)) == a.constant(-9));
    CHECK(a.sub(x, x) != a.zero());  // no algebraic cancellation beyond the listed rules
}

TEST_CASE("sigma degree tracks the polynomial degree in covariance symbols") {
    ExprArena a;
    ExprRef x = a.sigma(0, 1), y = a.sigma(2, 3);
    CHECK(a.sigma_degree(x) == 1);
    CHECK(a.sigma_degree(a.constant(42)) == 0);
    CHECK(a.sigma_degree(a.mul(x, y)) == 2);
    CHECK(a.sigma_degree(a.add(a.mul(x, y), x)) == 2);
    CHECK(a.sigma_degree(a.neg(a.mul(x, a.mul(y, y)))) == 3);
}

TEST_CASE("rendering follows the bare-atom parenthesized-composite grammar") {
    ExprArena a;
    ExprRef x = a.sigma(0, 1), y = a.sigma(1, 2);
    CHECK(a.to_string(x) == "\xcf\x83[0,1]");
    CHECK(a.to_string(a.constant(-17)) == "-17");
    CHECK(a.to_string(a.add(x, y)) == "(\xcf\x83[0,1]+\xcf\x83[1,2])");
    CHECK(a.to_string(a.mul(x, y)) == "(\xcf\x83[0,1]*\xcf\x83[1,2])");
    CHECK(a.to_string(a.neg(x)) == "(-\xcf\x83[0,1])");
    CHECK(a.to_string(a.sub(x, y)) == "(\xcf\x83[0,1]+(-\xcf\x83[1,2]))");
}

TEST_CASE("field evaluation matches direct arithmetic and is memoized per instance") {
    PrimeField F(kDefaultPrime);
    TreeScm m = testsupport::m1();
    std::mt19937_64 rng(11);
    ParamAssignment pa = [&] {
        std::vector<std::uint64_t> pt(num_parameters(m));
        for (auto& v : pt) v = rng() % kDefaultPrime;
        return point_to_assignment(m, pt);
    }();
    SigmaMatrix S = sigma_matrix(m, pa, F);

    ExprArena a;
    ExprRef det = a.sub(a.mul(a.sigma(1, 2), a.sigma(0, 1)), a.mul(a.sigma(0, 2), a.sigma(1, 1)));
    ExprEval<FieldRing> ev(a, FieldRing{&F, &S});
    std::uint64_t want =
        F.sub(F.mul(S.at(1, 2), S.at(0, 1)), F.mul(S.at(0, 2), S.at(1, 1)));
    CHECK(ev(det) == want);
    CHECK(ev(det) == want);  // cached second read
    CHECK(ev(a.sigma(0, 0)) == S.at(0, 0));
}

TEST_CASE("rational evaluation agrees with field evaluation through a homomorphism") {
    TreeScm m = testsupport::m2();
    std::mt19937_64 rng(5);
    RatAssignment ra = sample_rat_assignment(m, rng);
    RatSigma S = sigma_exact_backsub(m, ra);

    ExprArena a;
    ExprRef e = a.add(a.mul(a.sigma(1, 4), a.sigma(2, 3)), a.neg(a.sigma(0, 0)));
    ExprEval<RatRing> ev(a, RatRing{&S});
    mpq_class want = S.at(1, 4) * S.at(2, 3) - S.at(0, 0);
    CHECK(ev(e) == want);
}

TEST_CASE("matrix product multiplies on the left along a walk") {
    PrimeField F(101);
    FieldRing ring{&F, nullptr};
    Mat2<std::uint64_t> m1{1, 2, 3, 4}, m2{5, 6, 7, 8};
    // walk m1 then m2: weight = m2 * m1
    std::vector<Mat2<std::uint64_t>> walk{m1, m2};
    Mat2<std::uint64_t> w = walk_weight(ring, std::span<const Mat2<std::uint64_t>>(walk));
    CHECK(w == mat_mul(ring, m2, m1));
    CHECK(w.m00 == (5 * 1 + 6 * 3) % 101);
    CHECK(w.m01 == (5 * 2 + 6 * 4) % 101);
}

TEST_CASE("adjugate reverses an edge weight up to the determinant") {
    PrimeField F(10007);
    FieldRing ring{&F, nullptr};
    Mat2<std::uint64_t> m{12, 99, 7, 4};
    Mat2<std::uint64_t> prod = mat_mul(ring, m, mat_adjugate(ring, m));
    std::uint64_t det = mat_det(ring, m);
    CHECK(prod.m00 == det);
    CHECK(prod.m11 == det);
    CHECK(prod.m01 == 0);
    CHECK(prod.m10 == 0);
    CHECK(mat_is_scalar(prod, F));
}

TEST_CASE("scalar test sees exactly the three entry conditions") {
    PrimeField F(97);
    CHECK(mat_is_scalar({5, 0, 0, 5}, F));
    CHECK(mat_is_scalar({0, 0, 0, 0}, F));
    CHECK_FALSE(mat_is_scalar({5, 1, 0, 5}, F));
    CHECK_FALSE(mat_is_scalar({5, 0, 1, 5}, F));
    CHECK_FALSE(mat_is_scalar({5, 0, 0, 6}, F));
}

TEST_CASE("equation weight pins the sigma layout in direction i to j") {
    ExprArena a;
    MissingEdge e{1, 2, 0, 1};  // as in the five-node model
    Mat2<ExprRef> w = edge_weight(a, e);
    CHECK(w.m00 == a.sigma(0, 2));          // b
    CHECK(w.m01 == a.neg(a.sigma(1, 2)));   // d
    CHECK(w.m10 == a.sigma(0, 1));          // a
    CHECK(w.m11 == a.neg(a.sigma(1, 1)));   // c
    Mat2<ExprRef> r = edge_weight(a, e, false);
    CHECK(r.m00 == w.m11);
    CHECK(r.m01 == a.neg(w.m01));
    CHECK(r.m10 == a.neg(w.m10));
    CHECK(r.m11 == w.m00);
}

TEST_CASE("equation graph stores both directions and partitions into components") {
    ExprArena a;
    EquationGraph g(6);
    g.add_equation(a, 1, 2, edge_weight(a, MissingEdge{1, 2, 0, 0}));
    g.add_equation(a, 4, 5, edge_weight(a, MissingEdge{4, 5, 0, 0}));
    CHECK(g.edges().size() == 4);
    CHECK(g.degree(1) == 1);
    CHECK(g.degree(2) == 1);
    CHECK(g.degree(3) == 0);

    auto comps = g.components();
    REQUIRE(comps.size() == 4);  // {0}, {1,2}, {3}, {4,5}
    CHECK(comps[0] == std::vector<int>{0});
    CHECK(comps[1] == std::vector<int>{1, 2});
    CHECK(comps[2] == std::vector<int>{3});
    CHECK(comps[3] == std::vector<int>{4, 5});

    CHECK_THROWS_AS(g.add_equation(a, 1, 1, edge_weight(a, MissingEdge{1, 2, 0, 0})),
                    std::invalid_argument);
    CHECK_THROWS_AS(g.add_equation(a, 1, 9, edge_weight(a, MissingEdge{1, 2, 0, 0})),
                    std::invalid_argument);
}

TEST_CASE("verification walk of the reference graph") {
    // Constant weights on the five-edge example graph: nodes 1=x, 2=y, 3=z,
    // 4=u; the triangle (x,y),(y,z),(z,x) multiplies to the identity while
    // (x,u),(u,z),(z,x) does not.
    PrimeField F(kDefaultPrime);
    FieldRing ring{&F, nullptr};
    auto mk = [&](std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
        return Mat2<std::uint64_t>{F.from_int(a), F.from_int(b), F.from_int(c), F.from_int(d)};
    };
    Mat2<std::uint64_t> zx = mk(1, 0, 0, 1);    // (z,x)
    Mat2<std::uint64_t> xy = mk(1, 0, 2, 1);    // (x,y)
    Mat2<std::uint64_t> xu = mk(1, 2, 2, 1);    // (x,u)
    Mat2<std::uint64_t> yz = mk(1, 0, -2, 1);   // (y,z)
    Mat2<std::uint64_t> uz = mk(1, -1, 0, 1);   // (u,z)

    std::vector<Mat2<std::uint64_t>> tri{xy, yz, zx};
    CHECK(walk_weight(ring, std::span<const Mat2<std::uint64_t>>(tri)) == mk(1, 0, 0, 1));

    std::vector<Mat2<std::uint64_t>> path{xu, uz, zx};
    CHECK(walk_weight(ring, std::span<const Mat2<std::uint64_t>>(path)) == mk(-1, 1, 2, 1));
}
