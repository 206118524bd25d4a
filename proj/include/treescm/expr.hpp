#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace treescm {

// Reference into an ExprArena. Hash-consing makes structurally equal
// subexpressions reference-equal, so sharing is testable by comparing refs.
using ExprRef = std::uint32_t;

// Immutable DAG of polynomial expressions over covariance symbols sigma[i,j]
// and integer constants. Nodes are interned: building the same expression
// twice yields the same ExprRef. Trivial identities (x+0, x*1, x*0, double
// negation, constant folding) are applied on construction; nothing else is
// rewritten, so equality of values is decided by evaluation, not by shape.
class ExprArena {
public:
    enum class Op : std::uint8_t { Sigma, Const, Add, Mul, Neg };

    struct Node {
        Op op;
        std::int32_t i = 0, j = 0;       // Sigma payload, i <= j
        std::int64_t c = 0;              // Const payload
        ExprRef a = 0, b = 0;            // children
        std::uint32_t sdeg = 0;          // total degree in the sigma symbols
    };

    ExprArena() {
        zero_ = constant(0);
        one_ = constant(1);
    }

    ExprRef zero() const { return zero_; }
    ExprRef one() const { return one_; }

    ExprRef sigma(int i, int j) {
        if (i < 0 || j < 0) throw std::invalid_argument("expr: negative sigma index");
        if (i > j) std::swap(i, j);
        Node n;
        n.op = Op::Sigma;
        n.i = i;
        n.j = j;
        n.sdeg = 1;
        return intern(n);
    }

    ExprRef constant(std::int64_t c) {
        Node n;
        n.op = Op::Const;
        n.c = c;
        return intern(n);
    }

    ExprRef add(ExprRef x, ExprRef y) {
        if (x == zero_) return y;
        if (y == zero_) return x;
        const Node& nx = node(x);
        const Node& ny = node(y);
        if (nx.op == Op::Const && ny.op == Op::Const) {
            __int128 s = static_cast<__int128>(nx.c) + ny.c;
            if (fits_i64(s)) return constant(static_cast<std::int64_t>(s));
        }
        if (x > y) std::swap(x, y);  // commutative: canonical operand order
        Node n;
        n.op = Op::Add;
        n.a = x;
        n.b = y;
        n.sdeg = std::max(node(x).sdeg, node(y).sdeg);
        return intern(n);
    }

    ExprRef mul(ExprRef x, ExprRef y) {
        if (x == zero_ || y == zero_) return zero_;
        if (x == one_) return y;
        if (y == one_) return x;
        const Node& nx = node(x);
        const Node& ny = node(y);
        if (nx.op == Op::Const && ny.op == Op::Const) {
            __int128 p = static_cast<__int128>(nx.c) * ny.c;
            if (fits_i64(p)) return constant(static_cast<std::int64_t>(p));
        }
        if (x > y) std::swap(x, y);
        Node n;
        n.op = Op::Mul;
        n.a = x;
        n.b = y;
        n.sdeg = node(x).sdeg + node(y).sdeg;
        return intern(n);
    }

    ExprRef neg(ExprRef x) {
        const Node& nx = node(x);
        if (nx.op == Op::Const && nx.c != std::numeric_limits<std::int64_t>::min())
            return constant(-nx.c);
        if (nx.op == Op::Neg) return nx.a;
        Node n;
        n.op = Op::Neg;
        n.a = x;
        n.sdeg = nx.sdeg;
        return intern(n);
    }

    ExprRef sub(ExprRef x, ExprRef y) { return add(x, neg(y)); }

    const Node& node(ExprRef r) const { return nodes_[r]; }
    std::uint32_t sigma_degree(ExprRef r) const { return nodes_[r].sdeg; }
    std::size_t size() const { return nodes_.size(); }

    // Grammar: sigma atoms render bare as σ[i,j]; constants as decimal digits;
    // every composite carries its own parentheses.
    std::string to_string(ExprRef r) const {
        std::string out;
        render(r, out);
        return out;
    }

private:
    static bool fits_i64(__int128 v) {
        return v >= std::numeric_limits<std::int64_t>::min() &&
               v <= std::numeric_limits<std::int64_t>::max();
    }

    struct Key {
        std::uint8_t op;
        std::int64_t x, y;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ k.op;
            auto mix = [&h](std::uint64_t v) {
                h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            };
            mix(static_cast<std::uint64_t>(k.x));
            mix(static_cast<std::uint64_t>(k.y));
            return static_cast<std::size_t>(h);
        }
    };

    static Key key_of(const Node& n) {
        switch (n.op) {
            case Op::Sigma: return {0, n.i, n.j};
            case Op::Const: return {1, n.c, 0};
            case Op::Add: return {2, n.a, n.b};
            case Op::Mul: return {3, n.a, n.b};
            case Op::Neg: return {4, n.a, 0};
        }
        throw std::logic_error("expr: bad op");
    }

    ExprRef intern(const Node& n) {
        Key k = key_of(n);
        auto it = memo_.find(k);
        if (it != memo_.end()) return it->second;
        if (nodes_.size() > std::numeric_limits<ExprRef>::max())
            throw std::length_error("expr: arena full");
        ExprRef r = static_cast<ExprRef>(nodes_.size());
        nodes_.push_back(n);
        memo_.emplace(k, r);
        return r;
    }

    void render(ExprRef r, std::string& out) const {
        const Node& n = node(r);
        switch (n.op) {
            case Op::Sigma:
                out += "\xcf\x83[";  // UTF-8 sigma
                out += std::to_string(n.i);
                out += ',';
                out += std::to_string(n.j);
                out += ']';
                return;
            case Op::Const:
                out += std::to_string(n.c);
                return;
            case Op::Add:
                out += '(';
                render(n.a, out);
                out += '+';
                render(n.b, out);
                out += ')';
                return;
            case Op::Mul:
                out += '(';
                render(n.a, out);
                out += '*';
                render(n.b, out);
                out += ')';
                return;
            case Op::Neg:
                out += "(-";
                render(n.a, out);
                out += ')';
                return;
        }
    }

    std::vector<Node> nodes_;
    std::unordered_map<Key, ExprRef, KeyHash> memo_;
    ExprRef zero_ = 0, one_ = 0;
};

// Memoized evaluator over one value ring. The ring supplies the value type
// and the operations, including the interpretation of sigma symbols:
//   struct Ring {
//     using value_type = ...;
//     value_type add(v, v); value_type mul(v, v); value_type neg(v);
//     value_type from_int(std::int64_t); value_type sigma(int i, int j);
//   };
// One evaluator instance caches every node it touches, so evaluating several
// roots over the same assignment shares all common subexpressions.
template <class Ring>
class ExprEval {
public:
    using value_type = typename Ring::value_type;

    ExprEval(const ExprArena& a, Ring ring) : a_(&a), ring_(std::move(ring)) {}

    const value_type& operator()(ExprRef root) {
        if (val_.size() < a_->size()) {
            val_.resize(a_->size());
            has_.resize(a_->size(), 0);
        }
        if (has_[root]) return val_[root];
        std::vector<ExprRef> stack{root};
        while (!stack.empty()) {
            ExprRef r = stack.back();
            if (has_[r]) {
                stack.pop_back();
                continue;
            }
            const auto& n = a_->node(r);
            using Op = ExprArena::Op;
            switch (n.op) {
                case Op::Sigma:
                    val_[r] = ring_.sigma(n.i, n.j);
                    has_[r] = 1;
                    stack.pop_back();
                    break;
                case Op::Const:
                    val_[r] = ring_.from_int(n.c);
                    has_[r] = 1;
                    stack.pop_back();
                    break;
                case Op::Neg:
                    if (has_[n.a]) {
                        val_[r] = ring_.neg(val_[n.a]);
                        has_[r] = 1;
                        stack.pop_back();
                    } else {
                        stack.push_back(n.a);
                    }
                    break;
                case Op::Add:
                case Op::Mul:
                    if (has_[n.a] && has_[n.b]) {
                        val_[r] = n.op == Op::Add ? ring_.add(val_[n.a], val_[n.b])
                                                  : ring_.mul(val_[n.a], val_[n.b]);
                        has_[r] = 1;
                        stack.pop_back();
                    } else {
                        if (!has_[n.a]) stack.push_back(n.a);
                        if (!has_[n.b]) stack.push_back(n.b);
                    }
                    break;
            }
        }
        return val_[root];
    }

private:
    const ExprArena* a_;
    Ring ring_;
    std::vector<value_type> val_;
    std::vector<char> has_;
};

}  // namespace treescm
