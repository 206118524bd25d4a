#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "treescm/field.hpp"

namespace treescm {

// Raised when another randomized test would push the accumulated error mass
// past the session's bound. Callers may widen the prime or accept a larger
// error probability and retry.
class PitBudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when randomized verdicts contradict a structural guarantee (for
// example a rank-1 edge with no root-missing endpoint, or an extracted cycle
// that fails re-verification). Under the session's error bound this indicates
// covariances inconsistent with the model rather than bad luck.
class InconsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One randomized-testing session: a prime field, a seeded generator, and a
// union-bound error budget. Every zero test of a polynomial of degree d at a
// fresh random point adds d/P to the probability that some "zero" verdict in
// this session is wrong; the session refuses tests once the accumulated mass
// would exceed error_prob. Nonzero verdicts are witnessed and never wrong.
class PitSession {
public:
    PitSession(std::uint64_t prime, std::uint64_t seed, double error_prob,
               std::uint64_t degree_bound, std::uint64_t planned_trials = 0)
        : field_(prime), seed_(seed), rng_(seed), error_prob_(error_prob),
          degree_bound_(degree_bound) {
        if (prime < (1ULL << 61))
            throw std::invalid_argument("PitSession: prime must be at least 2^61");
        if (prime >= (1ULL << 63))
            throw std::invalid_argument("PitSession: prime must be below 2^63");
        if (!(error_prob > 0.0 && error_prob < 1.0))
            throw std::invalid_argument("PitSession: error_prob must be in (0,1)");
        if (degree_bound == 0)
            throw std::invalid_argument("PitSession: degree bound must be positive");
        mask_ = ~0ULL >> __builtin_clzll(prime);
        mass_budget_ = static_cast<long double>(error_prob) * static_cast<long double>(prime);
        if (planned_trials && !admits(prime, planned_trials, degree_bound, error_prob))
            throw PitBudgetError("PitSession: planned trials x degree bound exceed error budget");
    }

    // True iff `trials` tests of degree-`degree` polynomials keep the
    // one-sided error within error_prob: trials * degree / prime <= error_prob.
    static bool admits(std::uint64_t prime, std::uint64_t trials, std::uint64_t degree,
                       double error_prob) {
        long double lhs = static_cast<long double>(trials) * static_cast<long double>(degree);
        long double rhs = static_cast<long double>(error_prob) * static_cast<long double>(prime);
        return lhs <= rhs;
    }

    const PrimeField& field() const { return field_; }
    std::uint64_t prime() const { return field_.modulus(); }
    std::uint64_t seed() const { return seed_; }
    double error_prob() const { return error_prob_; }
    std::uint64_t degree_bound() const { return degree_bound_; }
    std::uint64_t trials_used() const { return trials_used_; }
    long double mass_used() const { return mass_used_; }
    long double mass_budget() const { return mass_budget_; }

    // Uniform residue in [0, prime). Charges nothing; the verdict that
    // consumes the value pays via charge().
    std::uint64_t draw() {
        for (;;) {
            std::uint64_t x = rng_() & mask_;
            if (x < field_.modulus()) return x;
        }
    }

    // Accounts one zero test of a polynomial of the declared total degree.
    void charge(std::uint64_t declared_degree) {
        if (declared_degree > degree_bound_)
            throw std::invalid_argument(
                "PitSession: circuit degree " + std::to_string(declared_degree) +
                " exceeds session bound " + std::to_string(degree_bound_));
        long double next = mass_used_ + static_cast<long double>(declared_degree);
        if (next > mass_budget_)
            throw PitBudgetError("PitSession: error budget exhausted after " +
                                 std::to_string(trials_used_) + " trials");
        mass_used_ = next;
        ++trials_used_;
    }

    // k coordinates of one evaluation point for a test of the declared degree.
    std::vector<std::uint64_t> fresh_point(std::size_t k, std::uint64_t declared_degree) {
        charge(declared_degree);
        std::vector<std::uint64_t> pt(k);
        for (auto& x : pt) x = draw();
        return pt;
    }

private:
    PrimeField field_;
    std::uint64_t seed_;
    std::mt19937_64 rng_;
    double error_prob_;
    std::uint64_t degree_bound_;
    std::uint64_t mask_ = 0;
    long double mass_budget_ = 0;
    long double mass_used_ = 0;
    std::uint64_t trials_used_ = 0;
};

// Black-box zero test. Circuit must expose num_vars(), degree() and
// eval(field, point). A false return is certain (a nonzero value witnesses a
// nonzero polynomial); a true return errs with probability at most
// repeats * degree / prime, which charge() has accounted for.
template <class Circuit>
bool is_zero_poly(const Circuit& c, PitSession& session, int repeats = 3) {
    for (int r = 0; r < repeats; ++r) {
        std::vector<std::uint64_t> pt = session.fresh_point(c.num_vars(), c.degree());
        if (c.eval(session.field(), std::span<const std::uint64_t>(pt)) != 0) return false;
    }
    return true;
}

}  // namespace treescm
