#pragma once

#include "treescm/covariance.hpp"
#include "treescm/model.hpp"
#include "treescm/pit.hpp"

namespace treescm {

enum class EdgeRank { Zero = 0, One = 1, Two = 2 };

// Generic rank of the 2x2 coefficient matrix [[b,d],[a,c]] of a non-root
// missing edge. One-sided randomized test: a nonzero witness of the
// determinant proves rank 2 outright; otherwise nonzero entries prove rank 1;
// all-zero across the repetitions means rank 0. Each evaluation point charges
// the session with the declared degree of the polynomial being tested.
inline EdgeRank edge_rank(const TreeScm& m, const MissingEdge& e, PitSession& session,
                          int repeats = 3) {
    const PrimeField& F = session.field();
    const std::uint64_t entry_deg = sigma_entry_degree(m);
    std::vector<SigmaMatrix> mats;
    mats.reserve(repeats);
    for (int k = 0; k < repeats; ++k) {
        session.charge(2 * entry_deg);
        ParamAssignment a = sample_assignment(m, session);
        mats.push_back(sigma_matrix(m, a, F));
        const SigmaMatrix& s = mats.back();
        std::uint64_t det = F.sub(F.mul(s.at(e.i, e.j), s.at(e.pi, e.pj)),
                                  F.mul(s.at(e.pi, e.j), s.at(e.i, e.pj)));
        if (det != 0) return EdgeRank::Two;
    }
    // Determinant is (with the session's confidence) identically zero; the
    // entry tests reuse the same evaluation points.
    for (const SigmaMatrix& s : mats) {
        session.charge(4 * entry_deg);
        if (s.at(e.pi, e.j) != 0 || s.at(e.i, e.j) != 0 || s.at(e.pi, e.pj) != 0 ||
            s.at(e.i, e.pj) != 0)
            return EdgeRank::One;
    }
    return EdgeRank::Zero;
}

}  // namespace treescm
