#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "treescm/field.hpp"
#include "treescm/model.hpp"
#include "treescm/pit.hpp"

namespace treescm {

// One point in parameter space: a field value for every edge coefficient
// lambda(parent(i) -> i) and every error covariance omega (diagonal entries
// plus one entry per bidirected pair).
struct ParamAssignment {
    std::vector<std::uint64_t> lambda;      // indexed by child node, [0] unused
    std::vector<std::uint64_t> omega_diag;  // indexed by node
    std::vector<std::uint64_t> omega_off;   // parallel to model.bidirected()

    std::uint64_t omega(const TreeScm& m, int i, int j) const {
        if (i == j) return omega_diag[i];
        int k = m.bidirected_index(i, j);
        return k < 0 ? 0 : omega_off[k];
    }
};

// Number of scalar parameters of the model, and the packing order used by
// point_to_assignment: lambda for nodes 1..n, omega diagonal 0..n, then one
// omega per bidirected pair in lexicographic order.
inline std::size_t num_parameters(const TreeScm& m) {
    return static_cast<std::size_t>(m.n()) + static_cast<std::size_t>(m.n() + 1) +
           m.bidirected().size();
}

inline ParamAssignment point_to_assignment(const TreeScm& m, std::span<const std::uint64_t> pt) {
    if (pt.size() != num_parameters(m))
        throw std::invalid_argument("point_to_assignment: wrong point arity");
    ParamAssignment a;
    a.lambda.assign(m.n() + 1, 0);
    std::size_t k = 0;
    for (int i = 1; i <= m.n(); ++i) a.lambda[i] = pt[k++];
    a.omega_diag.assign(pt.begin() + k, pt.begin() + k + m.n() + 1);
    k += m.n() + 1;
    a.omega_off.assign(pt.begin() + k, pt.end());
    return a;
}

// Uniform draws for every parameter; diagonal omegas are redrawn while zero so
// the error covariance stays nondegenerate.
inline ParamAssignment sample_assignment(const TreeScm& m, PitSession& session) {
    ParamAssignment a;
    a.lambda.assign(m.n() + 1, 0);
    for (int i = 1; i <= m.n(); ++i) a.lambda[i] = session.draw();
    a.omega_diag.resize(m.n() + 1);
    for (auto& w : a.omega_diag)
        do { w = session.draw(); } while (w == 0);
    a.omega_off.resize(m.bidirected().size());
    for (auto& w : a.omega_off) w = session.draw();
    return a;
}

struct SigmaMatrix {
    int nn = 0;  // number of nodes
    std::vector<std::uint64_t> v;
    std::uint64_t at(int i, int j) const { return v[static_cast<std::size_t>(i) * nn + j]; }
    std::uint64_t& at(int i, int j) { return v[static_cast<std::size_t>(i) * nn + j]; }
};

// Covariance matrix of the model at the assignment. The unipotent system
// (I - Lambda) is inverted by back-substitution along topological order:
// path[i][j] is the lambda product along the unique directed path i -> j.
// Then sigma = path^T * Omega * path.
inline SigmaMatrix sigma_matrix(const TreeScm& m, const ParamAssignment& a, const PrimeField& F) {
    const int nn = m.num_nodes();
    std::vector<std::uint64_t> path(static_cast<std::size_t>(nn) * nn, 0);
    for (int i = 0; i < nn; ++i) path[static_cast<std::size_t>(i) * nn + i] = 1;
    for (int j : m.topo_order()) {
        if (j == 0) continue;
        const int p = m.parent(j);
        for (int i = 0; i < nn; ++i) {
            if (i == j) continue;
            path[static_cast<std::size_t>(i) * nn + j] =
                F.mul(path[static_cast<std::size_t>(i) * nn + p], a.lambda[j]);
        }
    }
    // rows of path^T * Omega: c[u][j] = omega_uu * path[u][j] + sum over pairs
    std::vector<std::uint64_t> c(static_cast<std::size_t>(nn) * nn, 0);
    for (int u = 0; u < nn; ++u)
        for (int j = 0; j < nn; ++j)
            c[static_cast<std::size_t>(u) * nn + j] =
                F.mul(a.omega_diag[u], path[static_cast<std::size_t>(u) * nn + j]);
    for (std::size_t k = 0; k < m.bidirected().size(); ++k) {
        auto [u, w] = m.bidirected()[k];
        for (int j = 0; j < nn; ++j) {
            c[static_cast<std::size_t>(u) * nn + j] =
                F.add(c[static_cast<std::size_t>(u) * nn + j],
                      F.mul(a.omega_off[k], path[static_cast<std::size_t>(w) * nn + j]));
            c[static_cast<std::size_t>(w) * nn + j] =
                F.add(c[static_cast<std::size_t>(w) * nn + j],
                      F.mul(a.omega_off[k], path[static_cast<std::size_t>(u) * nn + j]));
        }
    }
    SigmaMatrix s;
    s.nn = nn;
    s.v.assign(static_cast<std::size_t>(nn) * nn, 0);
    for (int i = 0; i < nn; ++i)
        for (int j = i; j < nn; ++j) {
            std::uint64_t acc = 0;
            for (int u = 0; u < nn; ++u)
                acc = F.add(acc, F.mul(path[static_cast<std::size_t>(u) * nn + i],
                                       c[static_cast<std::size_t>(u) * nn + j]));
            s.at(i, j) = acc;
            s.at(j, i) = acc;
        }
    return s;
}

// Independent route to one covariance entry: enumerate treks. In a tree the
// directed paths are unique, so a trek between i and j is a pair of ancestors
// (u, v) with u = v (top weight omega_uu) or {u, v} bidirected. Cross-check
// oracle only; guarded to small models.
inline std::uint64_t sigma_trek_oracle(const TreeScm& m, const ParamAssignment& a,
                                       const PrimeField& F, int i, int j) {
    if (m.num_nodes() > 10)
        throw std::invalid_argument("sigma_trek_oracle: guarded to models with at most 10 nodes");
    auto path_product = [&](int top, int node) {
        std::uint64_t prod = 1;
        while (node != top) {
            prod = F.mul(prod, a.lambda[node]);
            node = m.parent(node);
        }
        return prod;
    };
    std::uint64_t total = 0;
    for (int u : m.ancestors(i))
        for (int v : m.ancestors(j)) {
            std::uint64_t top;
            if (u == v)
                top = a.omega_diag[u];
            else if (m.has_bidirected(u, v))
                top = a.omega(m, u, v);
            else
                continue;
            total = F.add(total, F.mul(top, F.mul(path_product(u, i), path_product(v, j))));
        }
    return total;
}

// Adapter turning "function of the covariance matrix" into a PIT circuit over
// the model parameters. Degree is declared by the caller in lambda/omega
// variables; one sigma entry has total degree at most 2n+1.
template <class Fn>
struct SigmaCircuit {
    const TreeScm* m;
    std::uint64_t deg;
    Fn fn;

    std::size_t num_vars() const { return num_parameters(*m); }
    std::uint64_t degree() const { return deg; }
    std::uint64_t eval(const PrimeField& F, std::span<const std::uint64_t> pt) const {
        ParamAssignment a = point_to_assignment(*m, pt);
        SigmaMatrix s = sigma_matrix(*m, a, F);
        return fn(F, s);
    }
};

template <class Fn>
SigmaCircuit<Fn> make_sigma_circuit(const TreeScm& m, std::uint64_t degree, Fn fn) {
    return SigmaCircuit<Fn>{&m, degree, std::move(fn)};
}

// Degree of one covariance entry in the model parameters.
inline std::uint64_t sigma_entry_degree(const TreeScm& m) {
    return 2 * static_cast<std::uint64_t>(m.n()) + 1;
}

}  // namespace treescm
