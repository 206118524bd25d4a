#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "treescm/field.hpp"
#include "treescm/pit.hpp"

using namespace treescm;

namespace {

// Simple explicit circuits for black-box zero testing.
struct ZeroCircuit {
    std::size_t num_vars() const { return 3; }
    std::uint64_t degree() const { return 1; }
    std::uint64_t eval(const PrimeField&, std::span<const std::uint64_t>) const { return 0; }
};

struct FirstVarCircuit {
    std::size_t num_vars() const { return 3; }
    std::uint64_t degree() const { return 1; }
    std::uint64_t eval(const PrimeField&, std::span<const std::uint64_t> p) const { return p[0]; }
};

// (x+y)^2 - x^2 - 2xy - y^2, identically zero but built from nonzero parts.
struct BinomialIdentityCircuit {
    std::size_t num_vars() const { return 2; }
    std::uint64_t degree() const { return 2; }
    std::uint64_t eval(const PrimeField& F, std::span<const std::uint64_t> p) const {
        std::uint64_t s = F.add(p[0], p[1]);
        std::uint64_t lhs = F.mul(s, s);
        std::uint64_t rhs = F.add(F.add(F.mul(p[0], p[0]), F.mul(p[1], p[1])),
                                  F.mul(2, F.mul(p[0], p[1])));
        return F.sub(lhs, rhs);
    }
};

}  // namespace

TEST_CASE("default prime is a 62-bit prime") {
    CHECK(is_prime_u64(kDefaultPrime));
    CHECK(kDefaultPrime >= (1ULL << 61));
    CHECK(kDefaultPrime < (1ULL << 62));
}

TEST_CASE("prime checker rejects composites") {
    CHECK(is_prime_u64(2));
    CHECK(is_prime_u64(3));
    CHECK_FALSE(is_prime_u64(1));
    CHECK_FALSE(is_prime_u64(561));            // Carmichael
    CHECK_FALSE(is_prime_u64(kDefaultPrime + 2));
    CHECK_FALSE(is_prime_u64(kDefaultPrime - 2));  // ends in 5
}

TEST_CASE("field axioms on random elements") {
    PrimeField F(kDefaultPrime);
    std::mt19937_64 rng(7);
    for (int k = 0; k < 200; ++k) {
        std::uint64_t a = rng() % kDefaultPrime;
        std::uint64_t b = rng() % kDefaultPrime;
        CHECK(F.add(a, F.neg(a)) == 0);
        CHECK(F.mul(a, F.add(b, 1)) == F.add(F.mul(a, b), a));
        if (a != 0) CHECK(F.mul(a, F.inv(a)) == 1);
    }
    CHECK_THROWS_AS(F.inv(0), std::domain_error);
}

TEST_CASE("field square roots") {
    PrimeField F(kDefaultPrime);
    std::mt19937_64 rng(11);
    int residues = 0;
    for (int k = 0; k < 100; ++k) {
        std::uint64_t a = rng() % kDefaultPrime;
        std::uint64_t sq = F.mul(a, a);
        CHECK(F.is_square(sq));
        std::uint64_t r = F.sqrt(sq);
        CHECK(F.mul(r, r) == sq);
        if (F.is_square(a)) ++residues;
    }
    CHECK(residues > 20);
    CHECK(residues < 80);
    CHECK_THROWS_AS(PrimeField(kDefaultPrime).sqrt([] {
        PrimeField G(kDefaultPrime);
        std::uint64_t x = 2;
        while (G.is_square(x)) ++x;
        return x;
    }()), std::domain_error);
}

TEST_CASE("session construction validates its inputs") {
    CHECK_THROWS_AS(PitSession((1ULL << 61) - 1, 1, 0.5, 10), std::invalid_argument);  // too small
    CHECK_THROWS_AS(PitSession(kDefaultPrime + 2, 1, 0.5, 10), std::invalid_argument); // composite
    CHECK_THROWS_AS(PitSession(kDefaultPrime, 1, 0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(PitSession(kDefaultPrime, 1, 1.5, 10), std::invalid_argument);
    CHECK_NOTHROW(PitSession(kDefaultPrime, 1, 0.5, 10));
}

TEST_CASE("fresh points are deterministic under a fixed seed") {
    PitSession a(kDefaultPrime, 42, 0.5, 100);
    PitSession b(kDefaultPrime, 42, 0.5, 100);
    PitSession c(kDefaultPrime, 43, 0.5, 100);
    auto pa = a.fresh_point(3, 5);
    auto pb = b.fresh_point(3, 5);
    auto pc = c.fresh_point(3, 5);
    CHECK(pa == pb);
    CHECK(pa != pc);
    for (auto x : pa) CHECK(x < kDefaultPrime);
    CHECK(a.trials_used() == 1);
}

TEST_CASE("union-bound admission arithmetic") {
    // trials * degree / prime <= error_prob, checked against exact integers
    const int n = 10;
    const std::uint64_t d = n * n + n;
    const std::uint64_t e = 45;
    const std::uint64_t trials = e * n;
    const double eps = std::ldexp(1.0, -40);
    const bool expect = static_cast<unsigned __int128>(trials) * d * (1ULL << 40) <=
                        static_cast<unsigned __int128>(kDefaultPrime);
    CHECK(PitSession::admits(kDefaultPrime, trials, d, eps) == expect);
    CHECK(expect);  // 450 * 110 * 2^40 ~ 2^56 < 2^62

    // A trial count that pushes past the bound must be rejected.
    const std::uint64_t too_many = kDefaultPrime / d;  // mass ~ prime > eps * prime
    CHECK_FALSE(PitSession::admits(kDefaultPrime, too_many, d, eps));
    CHECK_THROWS_AS(PitSession(kDefaultPrime, 1, eps, d, too_many), PitBudgetError);
    CHECK_NOTHROW(PitSession(kDefaultPrime, 1, eps, d, trials));
}

TEST_CASE("budget exhaustion surfaces as a distinct error") {
    // eps * P is a shade under 2^22; three degree-2^20 verdicts fit, four do not.
    const double eps = std::ldexp(1.0, -40);
    PitSession s(kDefaultPrime, 5, eps, 1ULL << 20);
    CHECK_NOTHROW(s.charge(1ULL << 20));
    CHECK_NOTHROW(s.charge(1ULL << 20));
    CHECK_NOTHROW(s.charge(1ULL << 20));
    CHECK_THROWS_AS(s.charge(1ULL << 20), PitBudgetError);
    CHECK(s.trials_used() == 3);
    CHECK_THROWS_AS(s.fresh_point(1, 1ULL << 20), PitBudgetError);
    // Degree above the session bound is a contract violation, not exhaustion.
    CHECK_THROWS_AS(s.charge((1ULL << 20) + 1), std::invalid_argument);
}

TEST_CASE("zero test is exact on witnesses and sound on identities") {
    PitSession s(kDefaultPrime, 99, 0.5, 100);
    CHECK(is_zero_poly(ZeroCircuit{}, s));
    CHECK(is_zero_poly(BinomialIdentityCircuit{}, s));
    CHECK_FALSE(is_zero_poly(FirstVarCircuit{}, s));
    CHECK(s.trials_used() >= 7);  // 3 + 3 + at least 1
}
