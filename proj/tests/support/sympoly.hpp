#pragma once

// Sparse exact multivariate polynomials over Q. Test-only cross-check: the
// randomized modular rank probe is compared against a full symbolic expansion
// of the covariance entries on small models. Variables follow the packing of
// point_to_assignment: lambda for nodes 1..n, then the omega diagonal 0..n,
// then one variable per bidirected pair in lexicographic order.

#include <gmpxx.h>

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "treescm/covariance.hpp"
#include "treescm/model.hpp"

namespace testsupport {

using Monomial = std::vector<int>;

struct SymPoly {
    std::size_t nvars = 0;
    std::map<Monomial, mpq_class> terms;  // nonzero coefficients only

    bool is_zero() const { return terms.empty(); }
};

inline SymPoly sym_zero(std::size_t nvars) { return SymPoly{nvars, {}}; }

inline SymPoly sym_const(std::size_t nvars, const mpq_class& c) {
    SymPoly p{nvars, {}};
    if (c != 0) p.terms.emplace(Monomial(nvars, 0), c);
    return p;
}

inline SymPoly sym_var(std::size_t nvars, std::size_t idx) {
    SymPoly p{nvars, {}};
    Monomial m(nvars, 0);
    m.at(idx) = 1;
    p.terms.emplace(std::move(m), mpq_class(1));
    return p;
}

inline SymPoly operator+(const SymPoly& a, const SymPoly& b) {
    SymPoly r = a;
    for (const auto& [m, c] : b.terms) {
        auto it = r.terms.find(m);
        if (it == r.terms.end()) {
            r.terms.emplace(m, c);
        } else {
            it->second += c;
            if (it->second == 0) r.terms.erase(it);
        }
    }
    return r;
}

inline SymPoly operator-(const SymPoly& a) {
    SymPoly r = a;
    for (auto& [m, c] : r.terms) c = -c;
    return r;
}

inline SymPoly operator-(const SymPoly& a, const SymPoly& b) { return a + (-b); }

inline SymPoly operator*(const SymPoly& a, const SymPoly& b) {
    SymPoly r{a.nvars, {}};
    for (const auto& [ma, ca] : a.terms)
        for (const auto& [mb, cb] : b.terms) {
            Monomial m(a.nvars);
            for (std::size_t k = 0; k < a.nvars; ++k) m[k] = ma[k] + mb[k];
            mpq_class c = ca * cb;
            auto it = r.terms.find(m);
            if (it == r.terms.end()) {
                r.terms.emplace(std::move(m), std::move(c));
            } else {
                it->second += c;
                if (it->second == 0) r.terms.erase(it);
            }
        }
    return r;
}

inline int total_degree(const SymPoly& p) {
    int best = 0;
    for (const auto& [m, c] : p.terms) {
        int d = 0;
        for (int e : m) d += e;
        if (d > best) best = d;
    }
    return best;
}

inline std::size_t var_lambda(const treescm::TreeScm&, int i) {
    return static_cast<std::size_t>(i - 1);
}
inline std::size_t var_omega_diag(const treescm::TreeScm& m, int u) {
    return static_cast<std::size_t>(m.n()) + static_cast<std::size_t>(u);
}
inline std::size_t var_omega_off(const treescm::TreeScm& m, int k) {
    return static_cast<std::size_t>(2 * m.n() + 1) + static_cast<std::size_t>(k);
}

// Product of the edge coefficients along the unique directed path top -> node.
inline SymPoly sym_path(const treescm::TreeScm& m, std::size_t nv, int top, int node) {
    SymPoly p = sym_const(nv, 1);
    while (node != top) {
        p = p * sym_var(nv, var_lambda(m, node));
        node = m.parent(node);
    }
    return p;
}

// Symbolic covariance entry by trek enumeration: a trek between i and j is a
// pair of ancestors (u, v) with u = v or {u, v} bidirected, weighted by the
// top omega times the edge-coefficient products down both sides.
inline SymPoly sigma_symbolic(const treescm::TreeScm& m, int i, int j) {
    const std::size_t nv = treescm::num_parameters(m);
    SymPoly total = sym_zero(nv);
    for (int u : m.ancestors(i))
        for (int v : m.ancestors(j)) {
            SymPoly top = sym_zero(nv);
            if (u == v) {
                top = sym_var(nv, var_omega_diag(m, u));
            } else {
                int k = m.bidirected_index(u, v);
                if (k < 0) continue;
                top = sym_var(nv, var_omega_off(m, k));
            }
            total = total + top * sym_path(m, nv, u, i) * sym_path(m, nv, v, j);
        }
    return total;
}

// Exact evaluation at a rational point packed in point_to_assignment order.
inline mpq_class sym_eval(const SymPoly& p, const std::vector<mpq_class>& pt) {
    mpq_class total = 0;
    for (const auto& [m, c] : p.terms) {
        mpq_class term = c;
        for (std::size_t k = 0; k < p.nvars; ++k)
            for (int e = 0; e < m[k]; ++e) term *= pt[k];
        total += term;
    }
    return total;
}

}  // namespace testsupport
