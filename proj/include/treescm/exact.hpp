#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "treescm/covariance.hpp"
#include "treescm/expr.hpp"
#include "treescm/model.hpp"

namespace treescm {

// Exact rational parameter assignment; layout mirrors ParamAssignment.
struct RatAssignment {
    std::vector<mpq_class> lambda;      // index by node, [0] unused
    std::vector<mpq_class> omega_diag;  // index by node
    std::vector<mpq_class> omega_off;   // lex order of the bidirected pairs

    mpq_class omega(const TreeScm& m, int i, int j) const {
        if (i == j) return omega_diag[static_cast<std::size_t>(i)];
        int k = m.bidirected_index(i, j);
        return k < 0 ? mpq_class(0) : omega_off[static_cast<std::size_t>(k)];
    }
};

// Small random integer parameters, all nonzero: zeros sit on the measure-zero
// coincidence sets a generic sample is meant to avoid.
inline RatAssignment sample_rat_assignment(const TreeScm& m, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pos(1, 9);
    std::bernoulli_distribution flip(0.5);
    auto signed_draw = [&] { return flip(rng) ? -pos(rng) : pos(rng); };
    RatAssignment a;
    a.lambda.resize(static_cast<std::size_t>(m.num_nodes()));
    a.omega_diag.resize(static_cast<std::size_t>(m.num_nodes()));
    a.omega_off.resize(m.bidirected().size());
    for (int i = 1; i < m.num_nodes(); ++i)
        a.lambda[static_cast<std::size_t>(i)] = signed_draw();
    for (int i = 0; i < m.num_nodes(); ++i) a.omega_diag[static_cast<std::size_t>(i)] = pos(rng);
    for (auto& w : a.omega_off) w = signed_draw();
    return a;
}

struct RatSigma {
    int nn = 0;
    std::vector<mpq_class> v;  // row-major nn x nn
    const mpq_class& at(int i, int j) const {
        return v[static_cast<std::size_t>(i) * nn + j];
    }
    mpq_class& at(int i, int j) { return v[static_cast<std::size_t>(i) * nn + j]; }
};

// Exact covariance by back substitution: sigma = path^T * Omega * path where
// path[u][i] is the product of lambdas along the directed path u -> i.
inline RatSigma sigma_exact_backsub(const TreeScm& m, const RatAssignment& a) {
    const int nn = m.num_nodes();
    std::vector<std::vector<mpq_class>> path(
        static_cast<std::size_t>(nn), std::vector<mpq_class>(static_cast<std::size_t>(nn), 0));
    for (int i : m.topo_order()) {
        path[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1;
        if (i != 0) {
            int p = m.parent(i);
            for (int u = 0; u < nn; ++u) {
                const mpq_class& pu = path[static_cast<std::size_t>(u)][static_cast<std::size_t>(p)];
                if (pu != 0)
                    path[static_cast<std::size_t>(u)][static_cast<std::size_t>(i)] =
                        pu * a.lambda[static_cast<std::size_t>(i)];
            }
        }
    }
    RatSigma S;
    S.nn = nn;
    S.v.assign(static_cast<std::size_t>(nn) * nn, mpq_class(0));
    for (int i = 0; i < nn; ++i)
        for (int j = i; j < nn; ++j) {
            mpq_class acc = 0;
            for (int u = 0; u < nn; ++u) {
                const mpq_class& pui = path[static_cast<std::size_t>(u)][static_cast<std::size_t>(i)];
                if (pui == 0) continue;
                // diagonal term
                mpq_class row = a.omega_diag[static_cast<std::size_t>(u)] *
                                path[static_cast<std::size_t>(u)][static_cast<std::size_t>(j)];
                for (const auto& [x, y] : m.bidirected()) {
                    int other = -1;
                    if (x == u) other = y;
                    else if (y == u) other = x;
                    if (other < 0) continue;
                    const mpq_class& poj =
                        path[static_cast<std::size_t>(other)][static_cast<std::size_t>(j)];
                    if (poj != 0)
                        row += a.omega(m, x, y) * poj;
                }
                acc += pui * row;
            }
            S.at(i, j) = acc;
            S.at(j, i) = acc;
        }
    return S;
}

// Exact covariance by direct trek summation: for each ordered ancestor pair
// (u on i's root path, w on j's root path) with u == w or {u,w} bidirected,
// add omega_uw times both path products. Independent of the back-substitution
// route; guarded to small models.
inline RatSigma sigma_exact_trek(const TreeScm& m, const RatAssignment& a) {
    if (m.num_nodes() > 16)
        throw std::invalid_argument("sigma_exact_trek: model too large for trek summation");
    const int nn = m.num_nodes();
    auto root_path = [&](int i) { return m.ancestors(i); };  // i, parent(i), ..., 0
    auto path_prod = [&](const std::vector<int>& anc, std::size_t from) {
        // product of lambda over edges from anc[from] down to anc[0]
        mpq_class p = 1;
        for (std::size_t k = 0; k < from; ++k) p *= a.lambda[static_cast<std::size_t>(anc[k])];
        return p;
    };
    RatSigma S;
    S.nn = nn;
    S.v.assign(static_cast<std::size_t>(nn) * nn, mpq_class(0));
    for (int i = 0; i < nn; ++i) {
        auto anc_i = root_path(i);
        for (int j = i; j < nn; ++j) {
            auto anc_j = root_path(j);
            mpq_class acc = 0;
            for (std::size_t ui = 0; ui < anc_i.size(); ++ui)
                for (std::size_t vj = 0; vj < anc_j.size(); ++vj) {
                    int u = anc_i[ui], w = anc_j[vj];
                    mpq_class om;
                    if (u == w) om = a.omega_diag[static_cast<std::size_t>(u)];
                    else if (m.has_bidirected(u, w)) om = a.omega(m, u, w);
                    else continue;
                    acc += om * path_prod(anc_i, ui) * path_prod(anc_j, vj);
                }
            S.at(i, j) = acc;
            S.at(j, i) = acc;
        }
    }
    return S;
}

// Ring over exact rationals for expression evaluation and 2x2 matrices.
struct RatRing {
    using value_type = mpq_class;
    const RatSigma* S = nullptr;
    mpq_class add(const mpq_class& x, const mpq_class& y) const { return x + y; }
    mpq_class mul(const mpq_class& x, const mpq_class& y) const { return x * y; }
    mpq_class neg(const mpq_class& x) const { return -x; }
    mpq_class from_int(std::int64_t c) const {
        return mpq_class(static_cast<long>(c));
    }
    mpq_class sigma(int i, int j) const {
        if (!S) throw std::logic_error("RatRing: sigma access without a matrix");
        return S->at(i, j);
    }
};

// Exact square root of a nonnegative rational, when it is a perfect square.
inline std::optional<mpq_class> rational_sqrt(const mpq_class& x) {
    if (x < 0) return std::nullopt;
    mpq_class c = x;
    c.canonicalize();
    const mpz_class num = c.get_num(), den = c.get_den();
    if (!mpz_perfect_square_p(num.get_mpz_t()) || !mpz_perfect_square_p(den.get_mpz_t()))
        return std::nullopt;
    mpz_class rn, rd;
    mpz_sqrt(rn.get_mpz_t(), num.get_mpz_t());
    mpz_sqrt(rd.get_mpz_t(), den.get_mpz_t());
    return mpq_class(rn) / mpq_class(rd);
}

}  // namespace treescm
