#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "treescm/covariance.hpp"
#include "treescm/expr.hpp"
#include "treescm/mat2.hpp"
#include "treescm/pit.hpp"

namespace treescm {

class FastpError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Fractional affine square-root term (p + q*sqrt(s)) / (r + t*sqrt(s)) over
// an ExprArena. Rational values embed as q = t = 0, s = 0.
struct Fastp {
    ExprRef p, q, r, t, s;
    bool operator==(const Fastp&) const = default;
};

inline Fastp fastp_rational(ExprArena& a, ExprRef num, ExprRef den) {
    return {num, a.zero(), den, a.zero(), a.zero()};
}

inline bool fastp_is_rational(const ExprArena& a, const Fastp& f) {
    return f.q == a.zero() && f.t == a.zero();
}

// Zero test of a sigma-expression over the model's covariance variety: sigma
// entries are sampled as the model generates them (trek polynomials at random
// parameters), so identities that hold only on the model count as zero. The
// declared degree is the expression's sigma-degree times the degree of one
// covariance entry. Expressions without sigma symbols evaluate exactly.
inline bool expr_is_zero_on_model(const ExprArena& a, ExprRef e, const TreeScm* m,
                                  PitSession& session, int repeats = 3) {
    const PrimeField& F = session.field();
    if (a.sigma_degree(e) == 0) {
        ExprEval<FieldRing> ev(a, FieldRing{&F, nullptr});
        return ev(e) == 0;
    }
    if (!m) throw std::logic_error("expr_is_zero_on_model: sigma symbols without a model");
    const std::uint64_t deg =
        static_cast<std::uint64_t>(a.sigma_degree(e)) * sigma_entry_degree(*m);
    for (int k = 0; k < repeats; ++k) {
        session.charge(deg);
        SigmaMatrix S = sigma_matrix(*m, sample_assignment(*m, session), F);
        ExprEval<FieldRing> ev(a, FieldRing{&F, &S});
        if (ev(e) != 0) return false;
    }
    return true;
}

// Solutions of the fixed-point equation of a cycle weight [[b,d],[a,c]]:
//   a*x^2 + (c - b)*x - d = 0.
struct CycleRoots {
    enum class Kind { TwoBranches, OneRational, NoSolution, Infinite };
    Kind kind;
    std::optional<Fastp> first, second;  // TwoBranches: both; OneRational: first
    ExprRef discriminant = 0;            // meaningful for TwoBranches
};

inline CycleRoots roots_from_cycle(ExprArena& a, const Mat2<ExprRef>& w, const TreeScm* m,
                                   PitSession& session) {
    const ExprRef A = w.m10, B = w.m00, C = w.m11, D = w.m01;
    const ExprRef cmb = a.sub(C, B);
    if (!expr_is_zero_on_model(a, A, m, session)) {
        const ExprRef delta = a.add(a.mul(cmb, cmb), a.mul(a.constant(4), a.mul(A, D)));
        const ExprRef num = a.sub(B, C);  // -(c - b)
        const ExprRef den = a.mul(a.constant(2), A);
        if (expr_is_zero_on_model(a, delta, m, session))
            return {CycleRoots::Kind::OneRational, fastp_rational(a, num, den), std::nullopt,
                    delta};
        Fastp plus{num, a.one(), den, a.zero(), delta};
        Fastp minus{num, a.constant(-1), den, a.zero(), delta};
        return {CycleRoots::Kind::TwoBranches, plus, minus, delta};
    }
    if (!expr_is_zero_on_model(a, cmb, m, session))
        return {CycleRoots::Kind::OneRational, fastp_rational(a, D, cmb), std::nullopt, 0};
    if (!expr_is_zero_on_model(a, D, m, session))
        return {CycleRoots::Kind::NoSolution, std::nullopt, std::nullopt, 0};
    return {CycleRoots::Kind::Infinite, std::nullopt, std::nullopt, 0};
}

namespace detail {

// Shared radicand of two Fastps; a side without sqrt terms adopts the other's.
inline ExprRef common_radicand(const ExprArena& a, const Fastp& x, const Fastp& y) {
    const bool xr = fastp_is_rational(a, x), yr = fastp_is_rational(a, y);
    if (xr) return yr ? x.s : y.s;
    if (yr) return x.s;
    if (x.s != y.s) throw FastpError("fastp: mismatched radicands");
    return x.s;
}

// (x1 + y1*tau)(x2 + y2*tau) with tau^2 = s.
struct QuadPair {
    ExprRef u, v;
};
inline QuadPair quad_mul(ExprArena& a, ExprRef x1, ExprRef y1, ExprRef x2, ExprRef y2,
                         ExprRef s) {
    return {a.add(a.mul(x1, x2), a.mul(s, a.mul(y1, y2))),
            a.add(a.mul(x1, y2), a.mul(y1, x2))};
}

}  // namespace detail

// Moebius action on a Fastp: x -> (M00*x + M01)/(M10*x + M11). The radicand
// passes through untouched, so the result shares the same s node.
inline Fastp apply_mobius(ExprArena& a, const Mat2<ExprRef>& M, const Fastp& x) {
    return {a.add(a.mul(M.m00, x.p), a.mul(M.m01, x.r)),
            a.add(a.mul(M.m00, x.q), a.mul(M.m01, x.t)),
            a.add(a.mul(M.m10, x.p), a.mul(M.m11, x.r)),
            a.add(a.mul(M.m10, x.q), a.mul(M.m11, x.t)), x.s};
}

// Propagation across a rank-2 equation: known value at the source of the
// directed edge carrying weight M yields the value at its target. Degenerate
// denominators (both components identically zero on the model) are an error
// the caller turns into a diagnostic.
inline Fastp propagate(ExprArena& a, const Mat2<ExprRef>& M, const Fastp& x, const TreeScm* m,
                       PitSession& session) {
    Fastp out = apply_mobius(a, M, x);
    if (expr_is_zero_on_model(a, out.r, m, session) &&
        expr_is_zero_on_model(a, out.t, m, session))
        throw FastpError("fastp: degenerate propagation denominator");
    return out;
}

// Does the pair (x at the edge's source, y at its target) satisfy the edge
// equation a*x*y - b*x + c*y - d = 0? Both sides are substituted, denominators
// cleared, and sqrt(s) expanded formally as tau with tau^2 = s; the equation
// holds iff both the tau-free and the tau components vanish (PIT). For a
// perfect-square radicand this test is conservative (it can reject a branch
// that actually satisfies); callers needing exactness there re-check over the
// rationals.
inline bool fastp_satisfies(ExprArena& a, const Fastp& x, const Fastp& y,
                            const Mat2<ExprRef>& M, const TreeScm* m, PitSession& session) {
    const ExprRef s = detail::common_radicand(a, x, y);
    const ExprRef A = M.m10, B = M.m00, C = M.m11, D = M.m01;
    auto nn = detail::quad_mul(a, x.p, x.q, y.p, y.q, s);  // Nx * Ny
    auto nd = detail::quad_mul(a, x.p, x.q, y.r, y.t, s);  // Nx * Dy
    auto dn = detail::quad_mul(a, x.r, x.t, y.p, y.q, s);  // Dx * Ny
    auto dd = detail::quad_mul(a, x.r, x.t, y.r, y.t, s);  // Dx * Dy
    ExprRef U = a.sub(a.add(a.mul(A, nn.u), a.mul(C, dn.u)),
                      a.add(a.mul(B, nd.u), a.mul(D, dd.u)));
    ExprRef V = a.sub(a.add(a.mul(A, nn.v), a.mul(C, dn.v)),
                      a.add(a.mul(B, nd.v), a.mul(D, dd.v)));
    return expr_is_zero_on_model(a, U, m, session) && expr_is_zero_on_model(a, V, m, session);
}

// Evaluation equality of two Fastps sharing a radicand, via cross
// multiplication and the same formal-tau expansion.
inline bool fastp_equal(ExprArena& a, const Fastp& x, const Fastp& y, const TreeScm* m,
                        PitSession& session) {
    const ExprRef s = detail::common_radicand(a, x, y);
    auto lhs = detail::quad_mul(a, x.p, x.q, y.r, y.t, s);
    auto rhs = detail::quad_mul(a, y.p, y.q, x.r, x.t, s);
    return expr_is_zero_on_model(a, a.sub(lhs.u, rhs.u), m, session) &&
           expr_is_zero_on_model(a, a.sub(lhs.v, rhs.v), m, session);
}

// ---- Evaluation ----

// Field evaluation at a concrete covariance matrix; branch is +1 or -1. The
// radicand must be a quadratic residue at the point (it is at any assignment
// generated by the model when the Fastp solves that model's equations).
inline std::uint64_t eval_fastp_field(const ExprArena& a, const Fastp& f, const PrimeField& F,
                                      const SigmaMatrix& S, int branch = +1) {
    ExprEval<FieldRing> ev(a, FieldRing{&F, &S});
    std::uint64_t root = 0;
    if (!fastp_is_rational(a, f)) {
        std::uint64_t sv = ev(f.s);
        root = F.sqrt(sv);  // throws std::domain_error on non-residue
        if (branch < 0) root = F.neg(root);
    }
    std::uint64_t den = F.add(ev(f.r), F.mul(ev(f.t), root));
    if (den == 0) throw FastpError("fastp: zero denominator at evaluation point");
    return F.div(F.add(ev(f.p), F.mul(ev(f.q), root)), den);
}

// Real evaluation over doubles at a dense symmetric sigma matrix.
struct RealSigma {
    int nn = 0;
    std::vector<double> v;  // row-major nn x nn
    double at(int i, int j) const { return v[static_cast<std::size_t>(i) * nn + j]; }
};

struct RealRing {
    using value_type = double;
    const RealSigma* S;
    double add(double x, double y) const { return x + y; }
    double mul(double x, double y) const { return x * y; }
    double neg(double x) const { return -x; }
    double from_int(std::int64_t c) const { return static_cast<double>(c); }
    double sigma(int i, int j) const { return S->at(i, j); }
};

inline double eval_fastp_real(const ExprArena& a, const Fastp& f, const RealSigma& S,
                              int branch = +1) {
    ExprEval<RealRing> ev(a, RealRing{&S});
    double root = 0.0;
    if (!fastp_is_rational(a, f)) {
        double sv = ev(f.s);
        if (sv < 0) throw FastpError("fastp: negative radicand in real evaluation");
        root = std::sqrt(sv) * (branch < 0 ? -1.0 : 1.0);
    }
    double den = ev(f.r) + ev(f.t) * root;
    if (den == 0.0) throw FastpError("fastp: zero denominator at evaluation point");
    return (ev(f.p) + ev(f.q) * root) / den;
}

// ---- Text form ----
// Grammar: atoms σ[i,j] and integers; operators + - * / and sqrt( ); every
// composite is parenthesized, sigma atoms stay bare. Rational Fastps render
// as numerator/denominator; others in the full affine form.

namespace detail {
inline std::string fastp_part(const ExprArena& a, ExprRef e) {
    std::string s = a.to_string(e);
    if (a.node(e).op == ExprArena::Op::Const) return "(" + s + ")";
    return s;  // sigma atoms are bare; Add/Mul/Neg carry their own parentheses
}
}  // namespace detail

inline std::string serialize_fastp(const ExprArena& a, const Fastp& f) {
    using detail::fastp_part;
    if (fastp_is_rational(a, f)) return fastp_part(a, f.p) + "/" + fastp_part(a, f.r);
    const std::string rad = "*sqrt(" + a.to_string(f.s) + ")";
    return "(" + fastp_part(a, f.p) + "+" + fastp_part(a, f.q) + rad + ")/(" +
           fastp_part(a, f.r) + "+" + fastp_part(a, f.t) + rad + ")";
}

// Recursive-descent parser for the grammar above. Arithmetic is closed over
// Fastps with one shared radicand: +, -, * and / combine values; sqrt applies
// to rational subterms only (no nested radicals).
class FastpParser {
public:
    FastpParser(ExprArena& a, std::string_view text) : a_(&a), s_(text) {}

    Fastp parse() {
        Fastp f = parse_expr();
        skip_ws();
        if (k_ != s_.size()) throw FastpError("fastp parse: trailing input");
        return f;
    }

private:
    Fastp parse_expr() {
        Fastp acc = parse_term();
        for (;;) {
            skip_ws();
            if (peek('+')) {
                ++k_;
                acc = f_add(acc, parse_term());
            } else if (peek('-')) {
                ++k_;
                acc = f_add(acc, f_neg(parse_term()));
            } else {
                return acc;
            }
        }
    }

    Fastp parse_term() {
        Fastp acc = parse_factor();
        for (;;) {
            skip_ws();
            if (peek('*')) {
                ++k_;
                acc = f_mul(acc, parse_factor());
            } else if (peek('/')) {
                ++k_;
                acc = f_div(acc, parse_factor());
            } else {
                return acc;
            }
        }
    }

    Fastp parse_factor() {
        skip_ws();
        if (peek('-')) {
            ++k_;
            return f_neg(parse_factor());
        }
        if (peek('(')) {
            ++k_;
            Fastp f = parse_expr();
            expect(')');
            return f;
        }
        if (s_.compare(k_, 5, "sqrt(") == 0) {
            k_ += 5;
            Fastp f = parse_expr();
            expect(')');
            return f_sqrt(f);
        }
        if (s_.compare(k_, 2, "\xcf\x83") == 0) {
            k_ += 2;
            expect('[');
            int i = parse_int_raw();
            expect(',');
            int j = parse_int_raw();
            expect(']');
            return fastp_rational(*a_, a_->sigma(i, j), a_->one());
        }
        if (k_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[k_])))
            return fastp_rational(*a_, a_->constant(parse_int_raw()), a_->one());
        throw FastpError("fastp parse: unexpected input at offset " + std::to_string(k_));
    }

    int parse_int_raw() {
        skip_ws();
        std::size_t start = k_;
        while (k_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[k_]))) ++k_;
        if (k_ == start) throw FastpError("fastp parse: expected integer");
        long long v = 0;
        for (std::size_t i = start; i < k_; ++i) {
            v = v * 10 + (s_[i] - '0');
            if (v > std::numeric_limits<std::int32_t>::max())
                throw FastpError("fastp parse: integer literal too large");
        }
        return static_cast<int>(v);
    }

    // Fastp arithmetic closed over a common radicand.
    Fastp f_neg(const Fastp& x) {
        return {a_->neg(x.p), a_->neg(x.q), x.r, x.t, x.s};
    }
    Fastp f_add(const Fastp& x, const Fastp& y) {
        ExprRef s = detail::common_radicand(*a_, x, y);
        auto nd = detail::quad_mul(*a_, x.p, x.q, y.r, y.t, s);
        auto dn = detail::quad_mul(*a_, x.r, x.t, y.p, y.q, s);
        auto dd = detail::quad_mul(*a_, x.r, x.t, y.r, y.t, s);
        return {a_->add(nd.u, dn.u), a_->add(nd.v, dn.v), dd.u, dd.v, s};
    }
    Fastp f_mul(const Fastp& x, const Fastp& y) {
        ExprRef s = detail::common_radicand(*a_, x, y);
        auto nn = detail::quad_mul(*a_, x.p, x.q, y.p, y.q, s);
        auto dd = detail::quad_mul(*a_, x.r, x.t, y.r, y.t, s);
        return {nn.u, nn.v, dd.u, dd.v, s};
    }
    Fastp f_div(const Fastp& x, const Fastp& y) {
        ExprRef s = detail::common_radicand(*a_, x, y);
        auto nd = detail::quad_mul(*a_, x.p, x.q, y.r, y.t, s);
        auto dn = detail::quad_mul(*a_, x.r, x.t, y.p, y.q, s);
        return {nd.u, nd.v, dn.u, dn.v, s};
    }
    Fastp f_sqrt(const Fastp& x) {
        if (!fastp_is_rational(*a_, x)) throw FastpError("fastp parse: nested radical");
        ExprRef s = a_->mul(x.p, x.r);  // sqrt(p/r) = sqrt(p*r)/r
        return {a_->zero(), a_->one(), x.r, a_->zero(), s};
    }

    bool peek(char c) const { return k_ < s_.size() && s_[k_] == c; }
    void expect(char c) {
        skip_ws();
        if (!peek(c))
            throw FastpError(std::string("fastp parse: expected '") + c + "' at offset " +
                             std::to_string(k_));
        ++k_;
    }
    void skip_ws() {
        while (k_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[k_]))) ++k_;
    }

    ExprArena* a_;
    std::string_view s_;
    std::size_t k_ = 0;
};

inline Fastp parse_fastp(ExprArena& a, std::string_view text) {
    return FastpParser(a, text).parse();
}

}  // namespace treescm
