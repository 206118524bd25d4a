#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <utility>

#include "treescm/equation_graph.hpp"
#include "treescm/mat2.hpp"
#include "treescm/pit.hpp"

namespace treescm {

// Walk-search instance: a directed multigraph topology whose edge weights are
// re-instantiated at a fresh random point for every polynomial evaluation.
// entry_degree bounds the degree of one weight entry in the underlying model
// parameters (zero for constant toy weights); one walk step contributes
// entry_degree + 1 to the total degree (weight entry times its tag variable).
struct CycleSearch {
    int num_nodes = 0;
    std::vector<std::pair<int, int>> edges;  // directed, at most one per ordered pair
    std::function<std::vector<Mat2<std::uint64_t>>(PitSession&)> sample_weights;
    std::uint64_t entry_degree = 0;
};

// Model-backed search over an equation graph: every evaluation draws a fresh
// parameter assignment, materializes its covariance matrix, and evaluates the
// symbolic weights there.
inline CycleSearch make_cycle_search(const ExprArena& arena, const EquationGraph& g,
                                     const TreeScm* m) {
    CycleSearch s;
    s.num_nodes = g.num_nodes();
    s.edges.reserve(g.edges().size());
    for (const auto& e : g.edges()) s.edges.emplace_back(e.u, e.v);
    s.entry_degree = m ? sigma_entry_degree(*m) : 0;
    const EquationGraph* gp = &g;
    const ExprArena* ap = &arena;
    s.sample_weights = [gp, ap, m](PitSession& session) {
        const PrimeField& F = session.field();
        SigmaMatrix sig;
        if (m) sig = sigma_matrix(*m, sample_assignment(*m, session), F);
        ExprEval<FieldRing> ev(*ap, FieldRing{&F, m ? &sig : nullptr});
        std::vector<Mat2<std::uint64_t>> out;
        out.reserve(gp->edges().size());
        for (const auto& e : gp->edges())
            out.push_back({ev(e.w.m00), ev(e.w.m01), ev(e.w.m10), ev(e.w.m11)});
        return out;
    };
    return s;
}

namespace detail {

// Diagonal blocks of the layered walk product at one random tag assignment:
// out[r] = sum over closed walks r -> r of length t over enabled edges of
// (product of per-step tags) * (M_{e_t} *...* M_{e_1}). Rows evolve
// independently; the same tag point serves every row.
inline std::vector<Mat2<std::uint64_t>> layered_diagonal(
    const CycleSearch& s, const std::vector<Mat2<std::uint64_t>>& w,
    const std::vector<char>& enabled, const std::vector<int>& active, int t,
    PitSession& session) {
    const PrimeField& F = session.field();
    const std::size_t ne = s.edges.size();
    // Per layer, the tagged weights.
    std::vector<std::vector<Mat2<std::uint64_t>>> tagged(t);
    for (int l = 0; l < t; ++l) {
        tagged[l].resize(ne);
        for (std::size_t e = 0; e < ne; ++e) {
            if (!enabled[e]) continue;
            std::uint64_t tag = session.draw();
            tagged[l][e] = {F.mul(tag, w[e].m00), F.mul(tag, w[e].m01), F.mul(tag, w[e].m10),
                            F.mul(tag, w[e].m11)};
        }
    }
    const Mat2<std::uint64_t> zero{0, 0, 0, 0};
    std::vector<Mat2<std::uint64_t>> out;
    out.reserve(active.size());
    std::vector<Mat2<std::uint64_t>> cur(s.num_nodes), nxt(s.num_nodes);
    std::vector<char> live(s.num_nodes), nlive(s.num_nodes);
    for (int r : active) {
        std::fill(cur.begin(), cur.end(), zero);
        std::fill(live.begin(), live.end(), 0);
        cur[r] = {1, 0, 0, 1};
        live[r] = 1;
        for (int l = 0; l < t; ++l) {
            std::fill(nxt.begin(), nxt.end(), zero);
            std::fill(nlive.begin(), nlive.end(), 0);
            for (std::size_t e = 0; e < ne; ++e) {
                if (!enabled[e]) continue;
                auto [u, v] = s.edges[e];
                if (!live[u]) continue;
                const Mat2<std::uint64_t>& M = tagged[l][e];
                const Mat2<std::uint64_t>& P = cur[u];
                nxt[v].m00 = F.add(nxt[v].m00, F.add(F.mul(M.m00, P.m00), F.mul(M.m01, P.m10)));
                nxt[v].m01 = F.add(nxt[v].m01, F.add(F.mul(M.m00, P.m01), F.mul(M.m01, P.m11)));
                nxt[v].m10 = F.add(nxt[v].m10, F.add(F.mul(M.m10, P.m00), F.mul(M.m11, P.m10)));
                nxt[v].m11 = F.add(nxt[v].m11, F.add(F.mul(M.m10, P.m01), F.mul(M.m11, P.m11)));
                nlive[v] = 1;
            }
            std::swap(cur, nxt);
            std::swap(live, nlive);
        }
        out.push_back(cur[r]);
    }
    return out;
}

inline std::vector<int> active_nodes(const CycleSearch& s, const std::vector<char>& enabled) {
    std::vector<char> seen(s.num_nodes, 0);
    for (std::size_t e = 0; e < s.edges.size(); ++e)
        if (enabled[e]) seen[s.edges[e].first] = seen[s.edges[e].second] = 1;
    std::vector<int> out;
    for (int v = 0; v < s.num_nodes; ++v)
        if (seen[v]) out.push_back(v);
    return out;
}

// One evaluation point of all per-node "closed t-walk weight is not scalar"
// polynomials. Charges three polynomials of degree t*(entry_degree+1) per
// tested node. Returns the per-active-node witness flags.
inline std::vector<char> diagonal_witnesses(const CycleSearch& s,
                                            const std::vector<char>& enabled,
                                            const std::vector<int>& active, int t,
                                            PitSession& session) {
    const std::uint64_t deg = static_cast<std::uint64_t>(t) * (s.entry_degree + 1);
    for (std::size_t k = 0; k < active.size(); ++k) session.charge(3 * deg);
    auto w = s.sample_weights(session);
    auto diag = layered_diagonal(s, w, enabled, active, t, session);
    std::vector<char> hit(active.size(), 0);
    for (std::size_t k = 0; k < active.size(); ++k)
        hit[k] = !mat_is_scalar(diag[k], session.field());
    return hit;
}

}  // namespace detail

// True iff some node (or the given node) lies on a closed walk of length t
// whose weight is not a scalar multiple of the identity. A witness at any
// evaluation point is final; the all-scalar verdict takes `repeats` agreeing
// points.
inline bool has_identifying_walk(const CycleSearch& s, std::optional<int> node, int t,
                                 PitSession& session, int repeats = 3) {
    std::vector<char> enabled(s.edges.size(), 1);
    std::vector<int> active = detail::active_nodes(s, enabled);
    if (node) {
        if (std::find(active.begin(), active.end(), *node) == active.end()) return false;
        active = {*node};
    }
    if (active.empty()) return false;
    for (int rep = 0; rep < repeats; ++rep) {
        auto hit = detail::diagonal_witnesses(s, enabled, active, t, session);
        if (std::find(hit.begin(), hit.end(), char(1)) != hit.end()) return true;
    }
    return false;
}

// Algorithm: find the minimal t admitting an identifying closed walk, then
// shrink the edge set by tentative deletion in lexicographic (source, target)
// order, keeping a deletion only if an identifying t-walk survives. The
// survivors form one simple directed cycle, which is re-verified on a fresh
// weight instantiation before being returned (walk order, smallest node
// first). Returns nothing if no length up to max_len identifies.
inline std::optional<std::vector<int>> find_identifying_cycle(const CycleSearch& s,
                                                              PitSession& session,
                                                              int repeats = 3) {
    std::vector<char> enabled(s.edges.size(), 1);
    std::vector<int> active = detail::active_nodes(s, enabled);
    if (active.size() < 2) return std::nullopt;
    const int max_len = static_cast<int>(active.size());

    auto any_walk = [&](const std::vector<char>& en, int t) {
        std::vector<int> act = detail::active_nodes(s, en);
        if (act.empty()) return false;
        for (int rep = 0; rep < repeats; ++rep) {
            auto hit = detail::diagonal_witnesses(s, en, act, t, session);
            if (std::find(hit.begin(), hit.end(), char(1)) != hit.end()) return true;
        }
        return false;
    };

    int t_found = -1;
    for (int t = 2; t <= max_len; ++t) {
        if (any_walk(enabled, t)) {
            t_found = t;
            break;
        }
    }
    if (t_found < 0) return std::nullopt;

    std::vector<std::size_t> order(s.edges.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s.edges[a] < s.edges[b]; });
    for (std::size_t e : order) {
        enabled[e] = 0;
        if (!any_walk(enabled, t_found)) enabled[e] = 1;
    }

    // The surviving edges must be a single simple cycle of length t_found.
    std::vector<int> next(s.num_nodes, -1);
    int start = s.num_nodes, kept = 0;
    for (std::size_t e = 0; e < s.edges.size(); ++e) {
        if (!enabled[e]) continue;
        ++kept;
        auto [u, v] = s.edges[e];
        if (next[u] != -1)
            throw InconsistencyError("cycle search: surviving edges branch at node " +
                                     std::to_string(u));
        next[u] = v;
        start = std::min(start, u);
    }
    if (kept != t_found)
        throw InconsistencyError("cycle search: " + std::to_string(kept) +
                                 " surviving edges for walk length " +
                                 std::to_string(t_found));
    std::vector<int> cycle;
    int v = start;
    for (int k = 0; k < t_found; ++k) {
        if (v < 0 || next[v] < 0)
            throw InconsistencyError("cycle search: surviving edges do not close a cycle");
        cycle.push_back(v);
        v = next[v];
    }
    if (v != start)
        throw InconsistencyError("cycle search: surviving edges do not close a cycle");

    // Re-verify on fresh weights: the plain cycle product must be non-scalar.
    std::vector<std::size_t> path_edges;
    for (int k = 0; k < t_found; ++k) {
        int a = cycle[k], b = cycle[(k + 1) % t_found];
        for (std::size_t e = 0; e < s.edges.size(); ++e)
            if (enabled[e] && s.edges[e].first == a && s.edges[e].second == b) {
                path_edges.push_back(e);
                break;
            }
    }
    bool verified = false;
    const std::uint64_t deg = static_cast<std::uint64_t>(t_found) * std::max<std::uint64_t>(s.entry_degree, 1);
    for (int rep = 0; rep < repeats && !verified; ++rep) {
        session.charge(3 * deg);
        auto w = s.sample_weights(session);
        FieldRing ring{&session.field(), nullptr};
        Mat2<std::uint64_t> acc = mat_identity(ring);
        for (std::size_t e : path_edges) acc = mat_mul(ring, w[e], acc);
        verified = !mat_is_scalar(acc, session.field());
    }
    if (!verified)
        throw InconsistencyError("cycle search: extracted cycle failed re-verification");
    return cycle;
}

}  // namespace treescm
