#pragma once

#include <json.hpp>

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "treescm/covariance.hpp"
#include "treescm/cyclefind.hpp"
#include "treescm/equation_graph.hpp"
#include "treescm/expr.hpp"
#include "treescm/fastp.hpp"
#include "treescm/model.hpp"
#include "treescm/pit.hpp"
#include "treescm/rank.hpp"

namespace treescm {

enum class NodeStatus { Identifiable, TwoIdentifiable, Unidentifiable };
enum class Provenance { None, RootEdge, RankOne, Propagation, Cycle };

inline const char* to_string(NodeStatus s) {
    switch (s) {
        case NodeStatus::Identifiable: return "identifiable";
        case NodeStatus::TwoIdentifiable: return "2-identifiable";
        default: return "unidentifiable";
    }
}
inline const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::RootEdge: return "root-edge";
        case Provenance::RankOne: return "rank-1";
        case Provenance::Propagation: return "propagation";
        case Provenance::Cycle: return "cycle";
        default: return "";
    }
}

struct NodeResult {
    NodeStatus status = NodeStatus::Unidentifiable;
    Provenance provenance = Provenance::None;
    std::optional<Fastp> fastp;                     // Identifiable
    std::optional<std::pair<Fastp, Fastp>> pair;    // TwoIdentifiable
};

struct ComponentReport {
    std::vector<int> nodes;                       // ascending
    std::vector<std::pair<int, int>> equations;   // rank-2 missing pairs inside
    std::optional<std::vector<int>> cycle;        // identifying cycle when one was sought
};

struct IdentReport {
    std::unique_ptr<ExprArena> arena;  // owns every Fastp expression below
    int num_nodes = 0;
    std::vector<NodeResult> nodes;     // [0] unused
    std::vector<std::tuple<int, int, int>> edge_ranks;  // (i, j, rank)
    std::vector<ComponentReport> components;
    std::vector<std::string> notes;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json out;
        out["num_nodes"] = num_nodes;
        out["nodes"] = nlohmann::ordered_json::array();
        for (int v = 1; v < num_nodes; ++v) {
            const NodeResult& r = nodes[static_cast<std::size_t>(v)];
            nlohmann::ordered_json jn;
            jn["node"] = v;
            jn["status"] = to_string(r.status);
            if (r.status == NodeStatus::Identifiable) {
                jn["fastp"] = serialize_fastp(*arena, *r.fastp);
                jn["provenance"] = to_string(r.provenance);
            } else if (r.status == NodeStatus::TwoIdentifiable) {
                jn["fastp_pair"] = {serialize_fastp(*arena, r.pair->first),
                                    serialize_fastp(*arena, r.pair->second)};
                jn["provenance"] = to_string(r.provenance);
            }
            out["nodes"].push_back(std::move(jn));
        }
        nlohmann::ordered_json diag;
        diag["edge_ranks"] = nlohmann::ordered_json::array();
        for (auto [i, j, rk] : edge_ranks)
            diag["edge_ranks"].push_back({{"i", i}, {"j", j}, {"rank", rk}});
        diag["components"] = nlohmann::ordered_json::array();
        for (const auto& c : components) {
            nlohmann::ordered_json jc;
            jc["nodes"] = c.nodes;
            jc["equations"] = nlohmann::ordered_json::array();
            for (auto [i, j] : c.equations) jc["equations"].push_back({i, j});
            if (c.cycle) jc["cycle"] = *c.cycle;
            else jc["cycle"] = nullptr;
            diag["components"].push_back(std::move(jc));
        }
        diag["notes"] = notes;
        out["diagnostics"] = std::move(diag);
        return out;
    }

    std::string to_text() const {
        std::string out;
        for (int v = 1; v < num_nodes; ++v) {
            const NodeResult& r = nodes[static_cast<std::size_t>(v)];
            out += "node " + std::to_string(v) + ": " + to_string(r.status);
            if (r.status == NodeStatus::Identifiable)
                out += " via " + std::string(to_string(r.provenance)) + ": " +
                       serialize_fastp(*arena, *r.fastp);
            else if (r.status == NodeStatus::TwoIdentifiable)
                out += " via " + std::string(to_string(r.provenance)) + ": " +
                       serialize_fastp(*arena, r.pair->first) + "  or  " +
                       serialize_fastp(*arena, r.pair->second);
            out += "\n";
        }
        for (const auto& c : components) {
            out += "component {";
            for (std::size_t k = 0; k < c.nodes.size(); ++k)
                out += (k ? "," : "") + std::to_string(c.nodes[k]);
            out += "}";
            if (c.cycle) {
                out += " cycle [";
                for (std::size_t k = 0; k < c.cycle->size(); ++k)
                    out += (k ? "," : "") + std::to_string((*c.cycle)[k]);
                out += "]";
            }
            out += "\n";
        }
        for (const auto& n : notes) out += "note: " + n + "\n";
        return out;
    }
};

// Recovery formula for the tree edge into i when the pair {0,i} carries no
// bidirected edge: lambda = sigma[0,i] / sigma[0,parent(i)].
inline Fastp root_identify(ExprArena& a, const TreeScm& m, int i) {
    return fastp_rational(a, a.sigma(0, i), a.sigma(0, m.parent(i)));
}

// Degree budget covering every polynomial the identification run tests. The
// largest tests are the cleared component equations: substituted values carry
// sigma-degree up to 4n, their products up to 8n+1, each sigma entry has
// parameter degree 2n+1; walk products (t <= n factors of degree 2n+2) stay
// below that.
inline std::uint64_t identification_degree_bound(const TreeScm& m) {
    const auto n = static_cast<std::uint64_t>(m.n());
    return (8 * n + 6) * (2 * n + 2);
}

namespace detail {

// Both line coefficients of a rank-1 equation must vanish identically once
// the marked endpoint's recovery formula is substituted; x at i, y at j.
inline bool rank1_vacuous(ExprArena& a, const TreeScm& m, const MissingEdge& e, int which,
                          PitSession& session) {
    const Mat2<ExprRef> w = edge_weight(a, e);  // [[b,d],[a,c]]
    const ExprRef B = w.m00, D = w.m01, A = w.m10, C = w.m11;
    if (which == e.j) {
        const ExprRef num = a.sigma(0, e.j), den = a.sigma(0, e.pj);
        return expr_is_zero_on_model(a, a.sub(a.mul(A, num), a.mul(B, den)), &m, session) &&
               expr_is_zero_on_model(a, a.sub(a.mul(C, num), a.mul(D, den)), &m, session);
    }
    const ExprRef num = a.sigma(0, e.i), den = a.sigma(0, e.pi);
    return expr_is_zero_on_model(a, a.add(a.mul(A, num), a.mul(C, den)), &m, session) &&
           expr_is_zero_on_model(a, a.add(a.mul(B, num), a.mul(D, den)), &m, session);
}

struct ComponentContext {
    std::vector<int> nodes;
    std::vector<MissingEdge> equations;
    std::map<std::pair<int, int>, Mat2<ExprRef>> weight;  // directed lookup
    // BFS spanning tree edges (u -> v) from a given seed, in visit order.
    std::vector<std::pair<int, int>> tree_from(int seed) const {
        std::map<int, std::vector<int>> adj;
        for (const auto& [key, w] : weight) adj[key.first].push_back(key.second);
        std::vector<std::pair<int, int>> tree;
        std::vector<int> order{seed};
        std::map<int, char> seen{{seed, 1}};
        for (std::size_t h = 0; h < order.size(); ++h)
            for (int v : adj[order[h]]) {
                if (seen[v]) continue;
                seen[v] = 1;
                order.push_back(v);
                tree.push_back({order[h], v});
            }
        return tree;
    }
};

// Spanning-tree propagation of a seed value across a component.
inline std::map<int, Fastp> propagate_component(ExprArena& a, const TreeScm& m,
                                                const ComponentContext& ctx, int seed,
                                                const Fastp& value, PitSession& session) {
    std::map<int, Fastp> out{{seed, value}};
    for (auto [u, v] : ctx.tree_from(seed)) {
        try {
            out.emplace(v, propagate(a, ctx.weight.at({u, v}), out.at(u), &m, session));
        } catch (const FastpError& err) {
            throw InconsistencyError("component propagation to node " + std::to_string(v) +
                                     ": " + err.what());
        }
    }
    return out;
}

// Rescue for the case where both branches of the cycle quadratic flunk the
// formal radical test. Over a consistent model that happens only when the
// radicand is the square of a rational covariance function (the sign of that
// root varies over the variety, so neither formal branch tracks one solution):
// the two fixed points are then separately rational, exactly one satisfies the
// whole component, and some equation tells them apart. Pulling each equation
// back to the cycle seed through the spanning-tree transfer maps yields a
// second quadratic; one that is not a multiple of the fixed-point polynomial
// shares exactly the true root with it, so eliminating the quadratic term
// solves for the seed value rationally.
inline std::map<int, Fastp> rational_extraction(ExprArena& a, const TreeScm& m,
                                                const ComponentContext& ctx, int c0,
                                                const Mat2<ExprRef>& W, PitSession& session) {
    ExprRing ring{&a};
    std::map<int, Mat2<ExprRef>> transfer{{c0, mat_identity(ring)}};
    for (auto [u, v] : ctx.tree_from(c0))
        transfer.emplace(v, mat_mul(ring, ctx.weight.at({u, v}), transfer.at(u)));
    // Fixed-point polynomial A*x^2 + Bq*x + Cq of the cycle weight.
    const ExprRef A = W.m10, Bq = a.sub(W.m11, W.m00), Cq = a.neg(W.m01);
    for (const auto& e : ctx.equations) {
        // The equation between the images of the seed under F (source side
        // composed with the edge map) and G (target side) clears to
        // alpha*x^2 + beta*x + gamma.
        Mat2<ExprRef> F = mat_mul(ring, ctx.weight.at({e.i, e.j}), transfer.at(e.i));
        const Mat2<ExprRef>& G = transfer.at(e.j);
        ExprRef alpha = a.sub(a.mul(F.m00, G.m10), a.mul(G.m00, F.m10));
        ExprRef beta = a.sub(a.add(a.mul(F.m00, G.m11), a.mul(F.m01, G.m10)),
                             a.add(a.mul(G.m00, F.m11), a.mul(G.m01, F.m10)));
        ExprRef gamma = a.sub(a.mul(F.m01, G.m11), a.mul(G.m01, F.m11));
        ExprRef den = a.sub(a.mul(alpha, Bq), a.mul(A, beta));
        if (expr_is_zero_on_model(a, den, &m, session)) continue;
        ExprRef num = a.sub(a.mul(A, gamma), a.mul(alpha, Cq));
        auto out = propagate_component(a, m, ctx, c0, fastp_rational(a, num, den), session);
        for (const auto& eq : ctx.equations)
            if (!fastp_satisfies(a, out.at(eq.i), out.at(eq.j), ctx.weight.at({eq.i, eq.j}),
                                 &m, session))
                throw InconsistencyError(
                    "extracted rational root fails the component equations");
        return out;
    }
    throw InconsistencyError(
        "both quadratic branches fail yet no component equation separates them");
}

}  // namespace detail

inline IdentReport run_identification(const TreeScm& m, PitSession& session) {
    IdentReport rep;
    rep.arena = std::make_unique<ExprArena>();
    ExprArena& a = *rep.arena;
    const int nn = m.num_nodes();
    rep.num_nodes = nn;
    rep.nodes.resize(static_cast<std::size_t>(nn));
    const MissingEdges miss = m.missing_edges();

    // Root marks: every pair {0,i} without a bidirected edge yields the
    // linear recovery formula.
    std::vector<char> marked(static_cast<std::size_t>(nn), 0);
    for (const auto& re : miss.root) {
        auto& node = rep.nodes[static_cast<std::size_t>(re.node)];
        node.status = NodeStatus::Identifiable;
        node.provenance = Provenance::RootEdge;
        node.fastp = root_identify(a, m, re.node);
        marked[static_cast<std::size_t>(re.node)] = 1;
    }

    // Generic ranks of the bilinear equations.
    std::vector<EdgeRank> ranks;
    ranks.reserve(miss.nonroot.size());
    for (const auto& e : miss.nonroot) {
        EdgeRank r = edge_rank(m, e, session);
        if (r == EdgeRank::Zero)
            throw InconsistencyError("equation of pair {" + std::to_string(e.i) + "," +
                                     std::to_string(e.j) + "} vanished identically");
        ranks.push_back(r);
        rep.edge_ranks.emplace_back(e.i, e.j, static_cast<int>(r));
    }

    // Rank-1 equations carry no constraint beyond the root marks they imply;
    // verify that and drop them.
    for (std::size_t k = 0; k < miss.nonroot.size(); ++k) {
        if (ranks[k] != EdgeRank::One) continue;
        const auto& e = miss.nonroot[k];
        const bool mi = marked[static_cast<std::size_t>(e.i)],
                   mj = marked[static_cast<std::size_t>(e.j)];
        if (!mi && !mj)
            throw InconsistencyError("rank-1 equation {" + std::to_string(e.i) + "," +
                                     std::to_string(e.j) +
                                     "} has no root-recoverable endpoint");
        bool vacuous = (mj && detail::rank1_vacuous(a, m, e, e.j, session)) ||
                       (mi && detail::rank1_vacuous(a, m, e, e.i, session));
        if (!vacuous)
            throw InconsistencyError("rank-1 equation {" + std::to_string(e.i) + "," +
                                     std::to_string(e.j) +
                                     "} is not vacuous at its root marks");
    }

    // Equation graph H over the rank-2 equations and its components.
    std::vector<MissingEdge> rank2;
    for (std::size_t k = 0; k < miss.nonroot.size(); ++k)
        if (ranks[k] == EdgeRank::Two) rank2.push_back(miss.nonroot[k]);
    EquationGraph h = EquationGraph::from_model(a, m, rank2);

    for (const auto& group : h.components()) {
        if (group.size() < 2) continue;  // isolated nodes keep their mark or default

        detail::ComponentContext ctx;
        ctx.nodes = group;
        for (const auto& e : rank2)
            if (std::find(group.begin(), group.end(), e.i) != group.end())
                ctx.equations.push_back(e);
        for (const auto& e : ctx.equations) {
            ctx.weight[{e.i, e.j}] = edge_weight(a, e, true);
            ctx.weight[{e.j, e.i}] = edge_weight(a, e, false);
        }
        ComponentReport creport;
        creport.nodes = group;
        for (const auto& e : ctx.equations) creport.equations.emplace_back(e.i, e.j);

        int seed = -1;
        for (int v : group)
            if (marked[static_cast<std::size_t>(v)]) {
                seed = v;
                break;
            }

        if (seed >= 0) {
            // Pinned component: spread the seed's formula, cross-check the
            // other marks, and fill in the unmarked nodes.
            auto prop = detail::propagate_component(
                a, m, ctx, seed, *rep.nodes[static_cast<std::size_t>(seed)].fastp, session);
            for (int v : group) {
                if (v == seed) continue;
                auto& node = rep.nodes[static_cast<std::size_t>(v)];
                if (marked[static_cast<std::size_t>(v)]) {
                    if (!fastp_equal(a, prop.at(v), *node.fastp, &m, session))
                        throw InconsistencyError(
                            "propagated value contradicts the root mark at node " +
                            std::to_string(v));
                    continue;
                }
                node.status = NodeStatus::Identifiable;
                node.provenance = Provenance::Propagation;
                node.fastp = prop.at(v);
            }
            rep.components.push_back(std::move(creport));
            continue;
        }

        // Unpinned component: hunt for an identifying cycle.
        EquationGraph cg(nn);
        for (const auto& e : ctx.equations) cg.add_equation(a, e.i, e.j, ctx.weight.at({e.i, e.j}));
        CycleSearch search = make_cycle_search(a, cg, &m);
        auto cyc = find_identifying_cycle(search, session);
        if (!cyc) {
            for (int v : group) rep.nodes[static_cast<std::size_t>(v)].status =
                NodeStatus::Unidentifiable;
            rep.components.push_back(std::move(creport));
            continue;
        }
        creport.cycle = *cyc;
        const int c0 = (*cyc)[0];

        ExprRing ring{&a};
        Mat2<ExprRef> W = mat_identity(ring);
        for (std::size_t k = 0; k < cyc->size(); ++k) {
            int u = (*cyc)[k], v = (*cyc)[(k + 1) % cyc->size()];
            W = mat_mul(ring, ctx.weight.at({u, v}), W);
        }

        CycleRoots roots = roots_from_cycle(a, W, &m, session);
        switch (roots.kind) {
            case CycleRoots::Kind::Infinite:
                throw InconsistencyError("identifying cycle produced a scalar fixed-point map");
            case CycleRoots::Kind::NoSolution:
                throw InconsistencyError(
                    "cycle fixed-point equation has no solution; covariances are inconsistent "
                    "with the model");
            case CycleRoots::Kind::OneRational: {
                auto prop = detail::propagate_component(a, m, ctx, c0, *roots.first, session);
                for (int v : group) {
                    auto& node = rep.nodes[static_cast<std::size_t>(v)];
                    node.status = NodeStatus::Identifiable;
                    node.provenance = v == c0 ? Provenance::Cycle : Provenance::Propagation;
                    node.fastp = prop.at(v);
                }
                break;
            }
            case CycleRoots::Kind::TwoBranches: {
                std::array<std::map<int, Fastp>, 2> branch{
                    detail::propagate_component(a, m, ctx, c0, *roots.first, session),
                    detail::propagate_component(a, m, ctx, c0, *roots.second, session)};
                std::array<bool, 2> alive{true, true};
                for (int b = 0; b < 2; ++b)
                    for (const auto& e : ctx.equations) {
                        if (!fastp_satisfies(a, branch[static_cast<std::size_t>(b)].at(e.i),
                                             branch[static_cast<std::size_t>(b)].at(e.j),
                                             ctx.weight.at({e.i, e.j}), &m, session)) {
                            alive[static_cast<std::size_t>(b)] = false;
                            break;
                        }
                    }
                if (!alive[0] && !alive[1]) {
                    auto rescued = detail::rational_extraction(a, m, ctx, c0, W, session);
                    rep.notes.push_back("component at node " + std::to_string(c0) +
                                        ": perfect-square radicand, rational root extracted");
                    for (int v : group) {
                        auto& node = rep.nodes[static_cast<std::size_t>(v)];
                        node.status = NodeStatus::Identifiable;
                        node.provenance = v == c0 ? Provenance::Cycle : Provenance::Propagation;
                        node.fastp = rescued.at(v);
                    }
                    break;
                }
                for (int v : group) {
                    auto& node = rep.nodes[static_cast<std::size_t>(v)];
                    node.provenance = v == c0 ? Provenance::Cycle : Provenance::Propagation;
                    if (alive[0] && alive[1]) {
                        node.status = NodeStatus::TwoIdentifiable;
                        node.pair = {branch[0].at(v), branch[1].at(v)};
                    } else {
                        node.status = NodeStatus::Identifiable;
                        node.fastp = alive[0] ? branch[0].at(v) : branch[1].at(v);
                    }
                }
                break;
            }
        }
        rep.components.push_back(std::move(creport));
    }

    return rep;
}

}  // namespace treescm
