#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "treescm/exact.hpp"
#include "treescm/mat2.hpp"
#include "treescm/model.hpp"

// Independent identification checker over exact rationals. It never touches
// the expression arena, the probabilistic identity tests, or the layered walk
// products: covariances come from direct trek summation, ranks from exact
// determinants, and solution counts from fundamental-cycle constraints of
// each component reduced with polynomial gcd over the rationals.

namespace treescm {

class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OracleStatus { Identifiable, TwoIdentifiable, Unidentifiable };

struct OracleNode {
    OracleStatus status = OracleStatus::Unidentifiable;
    std::vector<double> solutions;  // sorted candidate values at the sampled truth
};

struct OracleReport {
    RatAssignment truth;
    std::vector<OracleNode> nodes;  // indexed by node id; [0] unused
};

// All node-simple directed cycles of a small directed graph, each once,
// rotated to start at its smallest node. Opposite orientations of the same
// node set are distinct cycles.
inline std::vector<std::vector<int>> enumerate_simple_cycles(
    int num_nodes, const std::vector<std::pair<int, int>>& edges) {
    if (num_nodes > 12)
        throw std::invalid_argument("enumerate_simple_cycles: graph too large");
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_nodes));
    for (auto [u, v] : edges) adj[static_cast<std::size_t>(u)].push_back(v);
    for (auto& a : adj) std::sort(a.begin(), a.end());
    std::vector<std::vector<int>> out;
    std::vector<int> path;
    std::vector<char> on_path(static_cast<std::size_t>(num_nodes), 0);
    auto dfs = [&](auto&& self, int s, int u) -> void {
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (v == s && path.size() >= 2) out.push_back(path);
            if (v <= s || on_path[static_cast<std::size_t>(v)]) continue;
            on_path[static_cast<std::size_t>(v)] = 1;
            path.push_back(v);
            self(self, s, v);
            path.pop_back();
            on_path[static_cast<std::size_t>(v)] = 0;
        }
    };
    for (int s = 0; s < num_nodes; ++s) {
        path.assign(1, s);
        dfs(dfs, s, s);
    }
    return out;
}

namespace detail {

// Dense univariate polynomials over the rationals, coeffs[k] on x^k.
using PolyQ = std::vector<mpq_class>;

inline void poly_norm(PolyQ& p) {
    while (!p.empty() && p.back() == 0) p.pop_back();
}
inline int poly_deg(const PolyQ& p) { return static_cast<int>(p.size()) - 1; }
inline mpq_class poly_eval(const PolyQ& p, const mpq_class& x) {
    mpq_class acc = 0;
    for (std::size_t k = p.size(); k-- > 0;) acc = acc * x + p[k];
    return acc;
}
inline PolyQ poly_rem(PolyQ a, const PolyQ& b) {
    while (poly_deg(a) >= poly_deg(b)) {
        mpq_class f = a.back() / b.back();
        std::size_t shift = a.size() - b.size();
        for (std::size_t k = 0; k < b.size(); ++k) a[shift + k] -= f * b[k];
        poly_norm(a);
        if (a.empty()) break;
    }
    return a;
}
inline PolyQ poly_gcd(PolyQ a, PolyQ b) {
    poly_norm(a);
    poly_norm(b);
    while (!b.empty()) {
        PolyQ r = poly_rem(a, b);
        a = std::move(b);
        b = std::move(r);
    }
    if (!a.empty()) {
        mpq_class lead = a.back();
        for (auto& c : a) c /= lead;
    }
    return a;
}

// Forward equation weight [[b,d],[a,c]] at an exact covariance matrix:
// b = sigma[pi,j], d = -sigma[i,j], a = sigma[pi,pj], c = -sigma[i,pj].
inline Mat2<mpq_class> oracle_weight(const RatSigma& S, const MissingEdge& e, bool forward) {
    Mat2<mpq_class> w{S.at(e.pi, e.j), -S.at(e.i, e.j), S.at(e.pi, e.pj), -S.at(e.i, e.pj)};
    if (forward) return w;
    return Mat2<mpq_class>{w.m11, -w.m01, -w.m10, w.m00};
}

inline mpq_class mobius_q(const Mat2<mpq_class>& m, const mpq_class& x) {
    mpq_class den = m.m10 * x + m.m11;
    if (den == 0) throw OracleError("oracle: mobius pole at a consistent point");
    return (m.m00 * x + m.m01) / den;
}

inline double mobius_d(const Mat2<mpq_class>& m, double x) {
    return (m.m00.get_d() * x + m.m01.get_d()) / (m.m10.get_d() * x + m.m11.get_d());
}

struct OracleComponent {
    std::vector<int> nodes;                         // ascending, base first
    std::map<int, Mat2<mpq_class>> phi;             // base value -> node value
    std::vector<std::pair<int, int>> chords;        // non-tree equations (u, v)
    std::vector<Mat2<mpq_class>> chord_f;           // M(u->v) * phi[u] per chord
};

inline std::vector<OracleNode> oracle_attempt(const TreeScm& m, const RatAssignment& truth) {
    const int nn = m.num_nodes();
    const RatSigma S = sigma_exact_trek(m, truth);
    const MissingEdges miss = m.missing_edges();

    std::vector<char> marked(static_cast<std::size_t>(nn), 0);
    for (const auto& re : miss.root) {
        const mpq_class& den = S.at(0, re.parent);
        if (den == 0) throw OracleError("oracle: vanishing root denominator at sample");
        if (S.at(0, re.node) / den != truth.lambda[static_cast<std::size_t>(re.node)])
            throw OracleError("oracle: root recovery mismatch");
        marked[static_cast<std::size_t>(re.node)] = 1;
    }

    // Exact ranks of the non-root equations at this sample.
    std::vector<int> rank(miss.nonroot.size(), 0);
    for (std::size_t k = 0; k < miss.nonroot.size(); ++k) {
        const auto& e = miss.nonroot[k];
        Mat2<mpq_class> w = oracle_weight(S, e, true);
        if (w.m00 * w.m11 - w.m01 * w.m10 != 0) rank[k] = 2;
        else if (w.m00 != 0 || w.m01 != 0 || w.m10 != 0 || w.m11 != 0) rank[k] = 1;
    }

    // A rank-1 equation must be vacuous once its root-recoverable endpoint is
    // substituted: both coefficients of the free endpoint's line vanish.
    for (std::size_t k = 0; k < miss.nonroot.size(); ++k) {
        if (rank[k] != 1) continue;
        const auto& e = miss.nonroot[k];
        Mat2<mpq_class> w = oracle_weight(S, e, true);  // [[b,d],[a,c]], x at i, y at j
        const mpq_class &b = w.m00, &d = w.m01, &a = w.m10, &c = w.m11;
        bool ok = false;
        if (marked[static_cast<std::size_t>(e.j)]) {
            const mpq_class& v = truth.lambda[static_cast<std::size_t>(e.j)];
            ok = (a * v - b == 0) && (c * v - d == 0);
        }
        if (!ok && marked[static_cast<std::size_t>(e.i)]) {
            const mpq_class& u = truth.lambda[static_cast<std::size_t>(e.i)];
            ok = (a * u + c == 0) && (b * u + d == 0);
        }
        if (!marked[static_cast<std::size_t>(e.i)] && !marked[static_cast<std::size_t>(e.j)])
            throw OracleError("oracle: rank-1 equation with no recoverable endpoint");
        if (!ok) throw OracleError("oracle: rank-1 equation not vacuous at sample");
    }

    // Components over the rank-2 equations.
    std::vector<int> uf(static_cast<std::size_t>(nn));
    for (int v = 0; v < nn; ++v) uf[static_cast<std::size_t>(v)] = v;
    auto find = [&](int v) {
        while (uf[static_cast<std::size_t>(v)] != v) {
            uf[static_cast<std::size_t>(v)] = uf[static_cast<std::size_t>(uf[static_cast<std::size_t>(v)])];
            v = uf[static_cast<std::size_t>(v)];
        }
        return v;
    };
    std::vector<std::size_t> rank2;
    for (std::size_t k = 0; k < miss.nonroot.size(); ++k)
        if (rank[k] == 2) {
            rank2.push_back(k);
            int a = find(miss.nonroot[k].i), b = find(miss.nonroot[k].j);
            if (a != b) uf[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
        }

    std::vector<OracleNode> out(static_cast<std::size_t>(nn));
    for (int v = 1; v < nn; ++v)
        if (marked[static_cast<std::size_t>(v)]) {
            out[static_cast<std::size_t>(v)].status = OracleStatus::Identifiable;
            out[static_cast<std::size_t>(v)].solutions = {
                truth.lambda[static_cast<std::size_t>(v)].get_d()};
        }

    std::map<int, OracleComponent> comps;
    for (std::size_t k : rank2) {
        int root = find(miss.nonroot[k].i);
        comps[root];  // ensure the component exists even before nodes fill in
    }
    for (int v = 1; v < nn; ++v) {
        int r = find(v);
        auto it = comps.find(r);
        if (it != comps.end()) it->second.nodes.push_back(v);
    }

    for (auto& [root, comp] : comps) {
        std::sort(comp.nodes.begin(), comp.nodes.end());
        const int base = comp.nodes.front();

        // Spanning tree by BFS from the base; phi composes edge maps.
        std::map<int, std::vector<std::pair<std::size_t, bool>>> adj;  // v -> (eq, v is i side)
        for (std::size_t k : rank2) {
            const auto& e = miss.nonroot[k];
            if (find(e.i) != root) continue;
            adj[e.i].push_back({k, true});
            adj[e.j].push_back({k, false});
        }
        RatRing rr;
        comp.phi[base] = Mat2<mpq_class>{1, 0, 0, 1};
        std::vector<int> order{base};
        std::vector<std::size_t> tree_eqs;
        for (std::size_t head = 0; head < order.size(); ++head) {
            int u = order[head];
            for (auto [k, u_is_i] : adj[u]) {
                const auto& e = miss.nonroot[k];
                int v = u_is_i ? e.j : e.i;
                if (comp.phi.count(v)) continue;
                Mat2<mpq_class> step = oracle_weight(S, e, /*forward=*/u_is_i);
                comp.phi[v] = mat_mul(rr, step, comp.phi[u]);
                order.push_back(v);
                tree_eqs.push_back(k);
            }
        }
        for (std::size_t k : rank2) {
            const auto& e = miss.nonroot[k];
            if (find(e.i) != root) continue;
            if (std::find(tree_eqs.begin(), tree_eqs.end(), k) != tree_eqs.end()) continue;
            comp.chords.push_back({e.i, e.j});
            Mat2<mpq_class> fw = oracle_weight(S, e, true);
            comp.chord_f.push_back(mat_mul(rr, fw, comp.phi[e.i]));
        }

        const mpq_class& truth_base = truth.lambda[static_cast<std::size_t>(base)];
        // Tree consistency at the sampled truth validates the composed maps.
        for (int v : comp.nodes)
            if (mobius_q(comp.phi[v], truth_base) != truth.lambda[static_cast<std::size_t>(v)])
                throw OracleError("oracle: spanning-tree map disagrees with truth");

        bool pinned = false;
        for (int v : comp.nodes) pinned = pinned || marked[static_cast<std::size_t>(v)];

        if (pinned) {
            // Base is determined by any pin; with consistent data this is the
            // truth itself, so every node resolves to its true value.
            for (std::size_t c = 0; c < comp.chords.size(); ++c) {
                mpq_class lhs = mobius_q(comp.chord_f[c], truth_base);
                if (lhs != truth.lambda[static_cast<std::size_t>(comp.chords[c].second)])
                    throw OracleError("oracle: chord equation fails at pinned truth");
            }
            for (int v : comp.nodes) {
                out[static_cast<std::size_t>(v)].status = OracleStatus::Identifiable;
                out[static_cast<std::size_t>(v)].solutions = {
                    truth.lambda[static_cast<std::size_t>(v)].get_d()};
            }
            continue;
        }

        // Each chord yields a quadratic in the base value via cross
        // multiplication of F(x) = G(x).
        std::vector<PolyQ> constraints;
        for (std::size_t c = 0; c < comp.chords.size(); ++c) {
            const Mat2<mpq_class>& F = comp.chord_f[c];
            const Mat2<mpq_class>& G = comp.phi[comp.chords[c].second];
            PolyQ q{F.m01 * G.m11 - G.m01 * F.m11,
                    F.m00 * G.m11 + F.m01 * G.m10 - G.m00 * F.m11 - G.m01 * F.m10,
                    F.m00 * G.m10 - G.m00 * F.m10};
            poly_norm(q);
            if (!q.empty()) constraints.push_back(std::move(q));
        }

        if (constraints.empty()) {
            for (int v : comp.nodes) out[static_cast<std::size_t>(v)].status =
                OracleStatus::Unidentifiable;
            continue;
        }

        PolyQ g = constraints[0];
        for (std::size_t c = 1; c < constraints.size(); ++c) g = poly_gcd(g, constraints[c]);
        if (poly_deg(g) < 1) throw OracleError("oracle: constraints exclude the truth");
        if (poly_eval(g, truth_base) != 0)
            throw OracleError("oracle: truth is not a constraint root");

        // A candidate base value is admissible when no composed map has a
        // pole there; linear rational forms cannot vanish at irrationals.
        auto admissible = [&](const mpq_class& r) {
            for (int v : comp.nodes) {
                const Mat2<mpq_class>& p = comp.phi[v];
                if (p.m10 * r + p.m11 == 0) return false;
            }
            for (const auto& F : comp.chord_f)
                if (F.m10 * r + F.m11 == 0) return false;
            return true;
        };

        std::vector<mpq_class> rational_roots;
        int irrational_roots = 0;
        if (poly_deg(g) == 1) {
            rational_roots.push_back(-g[0] / g[1]);
        } else {  // degree 2, monic after gcd
            mpq_class beta = g[1] / g[2], gamma = g[0] / g[2];
            mpq_class disc = beta * beta - 4 * gamma;
            if (disc < 0) throw OracleError("oracle: complex constraint roots at real truth");
            if (auto h = rational_sqrt(disc)) {
                rational_roots.push_back((-beta + *h) / 2);
                if (*h != 0) rational_roots.push_back((-beta - *h) / 2);
            } else {
                irrational_roots = 2;
            }
        }
        std::vector<mpq_class> valid;
        for (const auto& r : rational_roots)
            if (admissible(r)) valid.push_back(r);
        const int count = static_cast<int>(valid.size()) + irrational_roots;
        if (count == 0) throw OracleError("oracle: no admissible constraint root");
        if (count > 2) throw OracleError("oracle: more than two constraint roots");

        OracleStatus st =
            count == 1 ? OracleStatus::Identifiable : OracleStatus::TwoIdentifiable;
        for (int v : comp.nodes) {
            auto& node = out[static_cast<std::size_t>(v)];
            node.status = st;
            if (irrational_roots) {
                mpq_class beta = g[1] / g[2], gamma = g[0] / g[2];
                double h = std::sqrt(mpq_class(beta * beta - 4 * gamma).get_d());
                double r1 = (-beta.get_d() + h) / 2, r2 = (-beta.get_d() - h) / 2;
                node.solutions = {mobius_d(comp.phi[v], r1), mobius_d(comp.phi[v], r2)};
            } else {
                for (const auto& r : valid)
                    node.solutions.push_back(mobius_q(comp.phi[v], r).get_d());
            }
            std::sort(node.solutions.begin(), node.solutions.end());
        }
    }
    return out;
}

inline bool oracle_statuses_equal(const std::vector<OracleNode>& a,
                                  const std::vector<OracleNode>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 1; k < a.size(); ++k)
        if (a[k].status != b[k].status) return false;
    return true;
}

}  // namespace detail

// Identification verdicts at a few random exact samples; statuses must be
// reproduced by a majority of samples, which screens out the measure-zero
// parameter coincidences a single sample could hit.
inline OracleReport oracle_identify(const TreeScm& m, std::mt19937_64& rng) {
    std::vector<OracleReport> good;
    for (int attempt = 0; attempt < 6 && good.size() < 3; ++attempt) {
        RatAssignment truth = sample_rat_assignment(m, rng);
        try {
            auto nodes = detail::oracle_attempt(m, truth);
            good.push_back(OracleReport{std::move(truth), std::move(nodes)});
        } catch (const OracleError&) {
            continue;  // resample; persistent failures fall through below
        }
        if (good.size() == 2) {
            if (detail::oracle_statuses_equal(good[0].nodes, good[1].nodes))
                return std::move(good[0]);
        } else if (good.size() == 3) {
            if (detail::oracle_statuses_equal(good[0].nodes, good[2].nodes))
                return std::move(good[0]);
            if (detail::oracle_statuses_equal(good[1].nodes, good[2].nodes))
                return std::move(good[1]);
            throw OracleError("oracle: samples disagree on statuses");
        }
    }
    if (good.size() == 1) return std::move(good[0]);
    throw OracleError("oracle: repeated sampling failed");
}

}  // namespace treescm
