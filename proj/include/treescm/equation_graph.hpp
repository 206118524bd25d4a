#pragma once

#include <numeric>
#include <span>
#include <vector>

#include "treescm/mat2.hpp"
#include "treescm/model.hpp"

namespace treescm {

// Symbolic weight of the bilinear missing-edge equation, read in direction
// i -> j (x is the coefficient at i, y the one at j):
//   a*x*y - b*x + c*y - d = 0  with  a = σ_{p,q}, b = σ_{p,j},
//   c = -σ_{i,q}, d = -σ_{i,j}
// packed as [[b,d],[a,c]]. The reverse direction carries the adjugate.
inline Mat2<ExprRef> edge_weight(ExprArena& arena, const MissingEdge& e, bool forward = true) {
    Mat2<ExprRef> w{arena.sigma(e.pi, e.j), arena.neg(arena.sigma(e.i, e.j)),
                    arena.sigma(e.pi, e.pj), arena.neg(arena.sigma(e.i, e.pj))};
    if (forward) return w;
    ExprRing ring{&arena};
    return mat_adjugate(ring, w);
}

// Doubly-directed graph over the model's coefficient variables: node i stands
// for the coefficient on the tree edge into i, and every rank-2 missing edge
// {i,j} contributes the directed edge i -> j with its weight plus the reverse
// edge with the adjugate weight.
class EquationGraph {
public:
    struct Edge {
        int u, v;
        Mat2<ExprRef> w;
    };

    explicit EquationGraph(int num_nodes) : num_nodes_(num_nodes) {}

    void add_equation(ExprArena& arena, int u, int v, const Mat2<ExprRef>& forward) {
        if (u < 0 || u >= num_nodes_ || v < 0 || v >= num_nodes_ || u == v)
            throw std::invalid_argument("equation graph: bad node pair");
        ExprRing ring{&arena};
        edges_.push_back({u, v, forward});
        edges_.push_back({v, u, mat_adjugate(ring, forward)});
    }

    static EquationGraph from_model(ExprArena& arena, const TreeScm& m,
                                    std::span<const MissingEdge> rank2_edges) {
        EquationGraph g(m.num_nodes());
        for (const auto& e : rank2_edges) g.add_equation(arena, e.i, e.j, edge_weight(arena, e));
        return g;
    }

    int num_nodes() const { return num_nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }

    std::size_t degree(int v) const {
        std::size_t d = 0;
        for (const auto& e : edges_)
            if (e.u == v) ++d;
        return d;
    }

    // Connected components over the undirected support, every node included
    // (nodes without equations are singletons). Groups and members ascending.
    std::vector<std::vector<int>> components() const {
        std::vector<int> root(num_nodes_);
        std::iota(root.begin(), root.end(), 0);
        auto find = [&](int x) {
            while (root[x] != x) x = root[x] = root[root[x]];
            return x;
        };
        for (const auto& e : edges_) {
            int a = find(e.u), b = find(e.v);
            if (a != b) root[std::max(a, b)] = std::min(a, b);
        }
        std::vector<std::vector<int>> groups;
        std::vector<int> index(num_nodes_, -1);
        for (int v = 0; v < num_nodes_; ++v) {
            int r = find(v);
            if (index[r] < 0) {
                index[r] = static_cast<int>(groups.size());
                groups.emplace_back();
            }
            groups[index[r]].push_back(v);
        }
        return groups;
    }

private:
    int num_nodes_;
    std::vector<Edge> edges_;
};

}  // namespace treescm
