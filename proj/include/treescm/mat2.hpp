#pragma once

#include <cstdint>
#include <span>

#include "treescm/covariance.hpp"
#include "treescm/expr.hpp"
#include "treescm/field.hpp"

namespace treescm {

// 2x2 weight of a missing-edge equation, laid out as [[b, d], [a, c]]:
// m00 = b, m01 = d, m10 = a, m11 = c. As a Moebius transform it acts by
// x -> (m00*x + m01)/(m10*x + m11).
template <class T>
struct Mat2 {
    T m00, m01, m10, m11;
    bool operator==(const Mat2&) const = default;
};

// Ring concept: value_type, add, mul, neg, from_int, sigma (sigma may throw
// if the ring has no covariance interpretation).
template <class R, class T>
Mat2<T> mat_mul(R& ring, const Mat2<T>& x, const Mat2<T>& y) {
    return {ring.add(ring.mul(x.m00, y.m00), ring.mul(x.m01, y.m10)),
            ring.add(ring.mul(x.m00, y.m01), ring.mul(x.m01, y.m11)),
            ring.add(ring.mul(x.m10, y.m00), ring.mul(x.m11, y.m10)),
            ring.add(ring.mul(x.m10, y.m01), ring.mul(x.m11, y.m11))};
}

// Adjugate: the weight of the reversed edge. mat_mul(M, adj(M)) = det(M)*I.
template <class R, class T>
Mat2<T> mat_adjugate(R& ring, const Mat2<T>& m) {
    return {m.m11, ring.neg(m.m01), ring.neg(m.m10), m.m00};
}

template <class R>
Mat2<typename R::value_type> mat_identity(R& ring) {
    auto zero = ring.from_int(0);
    auto one = ring.from_int(1);
    return {one, zero, zero, one};
}

template <class R, class T>
Mat2<T> mat_scale(R& ring, const T& k, const Mat2<T>& m) {
    return {ring.mul(k, m.m00), ring.mul(k, m.m01), ring.mul(k, m.m10), ring.mul(k, m.m11)};
}

template <class R, class T>
T mat_det(R& ring, const Mat2<T>& m) {
    return ring.add(ring.mul(m.m00, m.m11), ring.neg(ring.mul(m.m01, m.m10)));
}

// Weight of a walk given its edge weights in traversal order: each new edge
// multiplies on the left, W = M_t * ... * M_2 * M_1.
template <class R, class T>
Mat2<T> walk_weight(R& ring, std::span<const Mat2<T>> edges_in_order) {
    Mat2<T> acc = mat_identity(ring);
    for (const auto& m : edges_in_order) acc = mat_mul(ring, m, acc);
    return acc;
}

// ---- Concrete rings ----

struct FieldRing {
    using value_type = std::uint64_t;
    const PrimeField* F;
    const SigmaMatrix* S = nullptr;

    value_type add(value_type x, value_type y) const { return F->add(x, y); }
    value_type mul(value_type x, value_type y) const { return F->mul(x, y); }
    value_type neg(value_type x) const { return F->neg(x); }
    value_type from_int(std::int64_t c) const { return F->from_int(c); }
    value_type sigma(int i, int j) const {
        if (!S) throw std::logic_error("FieldRing: no covariance matrix bound");
        return S->at(i, j);
    }
};

struct ExprRing {
    using value_type = ExprRef;
    ExprArena* arena;

    value_type add(value_type x, value_type y) const { return arena->add(x, y); }
    value_type mul(value_type x, value_type y) const { return arena->mul(x, y); }
    value_type neg(value_type x) const { return arena->neg(x); }
    value_type from_int(std::int64_t c) const { return arena->constant(c); }
    value_type sigma(int i, int j) const { return arena->sigma(i, j); }
};

// In field arithmetic, "is a scalar multiple of the identity" reduces to the
// three entry conditions being zero simultaneously.
inline bool mat_is_scalar(const Mat2<std::uint64_t>& m, const PrimeField& F) {
    return m.m10 == 0 && m.m01 == 0 && F.sub(m.m00, m.m11) == 0;
}

// Evaluate a symbolic weight at a covariance matrix.
inline Mat2<std::uint64_t> mat_eval(const ExprArena& a, const Mat2<ExprRef>& m,
                                    const PrimeField& F, const SigmaMatrix& S) {
    ExprEval<FieldRing> ev(a, FieldRing{&F, &S});
    return {ev(m.m00), ev(m.m01), ev(m.m10), ev(m.m11)};
}

}  // namespace treescm
