#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace treescm {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Missing edge {0, node}: the root pair is not bidirected. Fixes
// lambda(parent -> node) = sigma[0,node] / sigma[0,parent].
struct RootMissingEdge {
    int node;
    int parent;
    bool operator==(const RootMissingEdge&) const = default;
};

// Missing edge {i, j} with 1 <= i < j. Together with p = parent(i),
// q = parent(j) it induces the bilinear constraint
// x*y*sigma[p,q] - x*sigma[p,j] - y*sigma[i,q] + sigma[i,j] = 0
// in x = lambda(p -> i), y = lambda(q -> j).
struct MissingEdge {
    int i;
    int j;
    int pi;
    int pj;
    bool operator==(const MissingEdge&) const = default;
};

struct MissingEdges {
    std::vector<RootMissingEdge> root;    // ascending by node
    std::vector<MissingEdge> nonroot;     // lexicographic by (i, j)
};

// Tree-shaped linear SCM over nodes 0..n: node 0 is the root of the directed
// tree given by parent[], plus a set of bidirected pairs. Immutable after
// construction; construction validates tree shape.
class TreeScm {
public:
    TreeScm(int n, std::vector<int> parent, std::vector<std::pair<int, int>> bidirected)
        : n_(n), parent_(std::move(parent)) {
        if (n_ < 0) throw ModelError("model: n must be nonnegative");
        if (static_cast<int>(parent_.size()) != n_ + 1)
            throw ModelError("model: parent array must have length n+1");
        if (parent_[0] != -1) throw ModelError("model: node 0 is the root and has no parent");
        for (int i = 1; i <= n_; ++i) {
            if (parent_[i] < 0 || parent_[i] > n_)
                throw ModelError("model: parent of node " + std::to_string(i) + " out of range");
            if (parent_[i] == i)
                throw ModelError("model: node " + std::to_string(i) + " is its own parent");
        }
        // Every node must reach the root; equivalently no parent cycle.
        std::vector<int> state(n_ + 1, 0);  // 0 unseen, 1 on path, 2 done
        state[0] = 2;
        for (int i = 1; i <= n_; ++i) {
            int v = i;
            std::vector<int> path;
            while (state[v] == 0) {
                state[v] = 1;
                path.push_back(v);
                v = parent_[v];
            }
            if (state[v] == 1)
                throw ModelError("model: directed part has a cycle through node " + std::to_string(v));
            for (int u : path) state[u] = 2;
        }
        for (auto [a, b] : bidirected) {
            if (a < 0 || a > n_ || b < 0 || b > n_)
                throw ModelError("model: bidirected edge endpoint out of range");
            if (a == b)
                throw ModelError("model: bidirected self-loop at node " + std::to_string(a));
            if (a > b) std::swap(a, b);
            if (!bidir_index_.emplace(std::make_pair(a, b), bidirected_.size()).second)
                throw ModelError("model: duplicate bidirected edge {" + std::to_string(a) + "," +
                                 std::to_string(b) + "}");
            bidirected_.emplace_back(a, b);
        }
        std::vector<std::pair<int, int>> sorted = bidirected_;
        std::sort(sorted.begin(), sorted.end());
        bidirected_ = std::move(sorted);
        bidir_index_.clear();
        for (std::size_t k = 0; k < bidirected_.size(); ++k) bidir_index_[bidirected_[k]] = k;

        children_.assign(n_ + 1, {});
        for (int i = 1; i <= n_; ++i) children_[parent_[i]].push_back(i);
        for (auto& c : children_) std::sort(c.begin(), c.end());
        topo_.reserve(n_ + 1);
        std::vector<int> stack{0};
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            topo_.push_back(v);
            for (auto it = children_[v].rbegin(); it != children_[v].rend(); ++it)
                stack.push_back(*it);
        }
        depth_.assign(n_ + 1, 0);
        for (std::size_t k = 1; k < topo_.size(); ++k)
            depth_[topo_[k]] = depth_[parent_[topo_[k]]] + 1;
    }

    static TreeScm from_json(const nlohmann::json& j);
    static TreeScm parse(std::string_view text);
    static TreeScm from_dot(std::string_view text);
    nlohmann::ordered_json to_json() const;

    int n() const { return n_; }
    int num_nodes() const { return n_ + 1; }
    int parent(int i) const { return parent_[i]; }
    int depth(int i) const { return depth_[i]; }
    const std::vector<int>& topo_order() const { return topo_; }
    const std::vector<int>& children(int i) const { return children_[i]; }
    const std::vector<std::pair<int, int>>& bidirected() const { return bidirected_; }

    bool has_bidirected(int i, int j) const {
        if (i > j) std::swap(i, j);
        return bidir_index_.count({i, j}) > 0;
    }
    // Index into bidirected() for the unordered pair, or -1.
    int bidirected_index(int i, int j) const {
        if (i > j) std::swap(i, j);
        auto it = bidir_index_.find({i, j});
        return it == bidir_index_.end() ? -1 : static_cast<int>(it->second);
    }

    // True iff a lies on the root path of b (inclusive).
    bool is_ancestor(int a, int b) const {
        while (depth_[b] > depth_[a]) b = parent_[b];
        return a == b;
    }

    // Root path of i: i, parent(i), ..., 0.
    std::vector<int> ancestors(int i) const {
        std::vector<int> out{i};
        while (i != 0) { i = parent_[i]; out.push_back(i); }
        return out;
    }

    MissingEdges missing_edges() const {
        MissingEdges out;
        for (int i = 0; i <= n_; ++i)
            for (int j = i + 1; j <= n_; ++j) {
                if (has_bidirected(i, j)) continue;
                if (i == 0)
                    out.root.push_back({j, parent_[j]});
                else
                    out.nonroot.push_back({i, j, parent_[i], parent_[j]});
            }
        return out;
    }

    bool operator==(const TreeScm& o) const {
        return n_ == o.n_ && parent_ == o.parent_ && bidirected_ == o.bidirected_;
    }

private:
    int n_;
    std::vector<int> parent_;                       // parent_[0] == -1
    std::vector<std::pair<int, int>> bidirected_;   // sorted, first < second
    std::map<std::pair<int, int>, std::size_t> bidir_index_;
    std::vector<std::vector<int>> children_;
    std::vector<int> topo_;                         // root first
    std::vector<int> depth_;
};

inline TreeScm TreeScm::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ModelError("model: top-level JSON value must be an object");
    if (!j.contains("n") || !j["n"].is_number_integer())
        throw ModelError("model: missing integer field \"n\"");
    int n = j["n"].get<int>();
    if (!j.contains("parent") || !j["parent"].is_array())
        throw ModelError("model: missing array field \"parent\"");
    const auto& jp = j["parent"];
    std::vector<int> parent;
    parent.reserve(jp.size());
    for (std::size_t k = 0; k < jp.size(); ++k) {
        if (jp[k].is_null()) {
            parent.push_back(-1);
        } else if (jp[k].is_number_integer()) {
            parent.push_back(jp[k].get<int>());
        } else {
            throw ModelError("model: parent[" + std::to_string(k) + "] must be an integer or null");
        }
    }
    if (!parent.empty() && parent[0] != -1)
        throw ModelError("model: parent[0] must be null");
    std::vector<std::pair<int, int>> bi;
    if (j.contains("bidirected")) {
        if (!j["bidirected"].is_array()) throw ModelError("model: \"bidirected\" must be an array");
        for (const auto& e : j["bidirected"]) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
                throw ModelError("model: bidirected entries must be integer pairs");
            bi.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
    }
    return TreeScm(n, std::move(parent), std::move(bi));
}

inline TreeScm TreeScm::parse(std::string_view text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ModelError("model: input is not valid JSON");
    return from_json(j);
}

inline nlohmann::ordered_json TreeScm::to_json() const {
    nlohmann::ordered_json j;
    j["n"] = n_;
    nlohmann::ordered_json jp = nlohmann::ordered_json::array();
    jp.push_back(nullptr);
    for (int i = 1; i <= n_; ++i) jp.push_back(parent_[i]);
    j["parent"] = std::move(jp);
    nlohmann::ordered_json jb = nlohmann::ordered_json::array();
    for (auto [a, b] : bidirected_) jb.push_back(nlohmann::ordered_json::array({a, b}));
    j["bidirected"] = std::move(jb);
    return j;
}

// Minimal DOT reader: integer node ids, "a -> b" directed (parent) edges,
// "a -- b" or "a -> b [dir=both]" bidirected edges. Attributes are otherwise
// ignored.
inline TreeScm TreeScm::from_dot(std::string_view text) {
    std::string s;
    s.reserve(text.size());
    for (std::size_t k = 0; k < text.size(); ++k) {  // strip comments
        if (text.compare(k, 2, "//") == 0 || text[k] == '#') {
            while (k < text.size() && text[k] != '\n') ++k;
            s.push_back('\n');
        } else if (text.compare(k, 2, "/*") == 0) {
            k += 2;
            while (k + 1 < text.size() && text.compare(k, 2, "*/") != 0) ++k;
            ++k;
        } else {
            s.push_back(text[k]);
        }
    }
    struct RawEdge { int a, b; bool both; };
    std::vector<RawEdge> edges;
    int max_node = -1;
    std::size_t k = 0;
    auto skip_ws = [&] { while (k < s.size() && std::isspace(static_cast<unsigned char>(s[k]))) ++k; };
    auto read_int = [&]() -> std::optional<int> {
        skip_ws();
        std::size_t start = k;
        while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
        if (k == start) return std::nullopt;
        return std::stoi(s.substr(start, k - start));
    };
    while (k < s.size()) {
        auto a = read_int();
        if (!a) { ++k; continue; }
        skip_ws();
        bool arrow = s.compare(k, 2, "->") == 0;
        bool undirected = s.compare(k, 2, "--") == 0;
        if (!arrow && !undirected) { max_node = std::max(max_node, *a); continue; }
        k += 2;
        auto b = read_int();
        if (!b) throw ModelError("model: dangling edge operator in DOT input");
        bool both = undirected;
        skip_ws();
        if (k < s.size() && s[k] == '[') {
            std::size_t close = s.find(']', k);
            if (close == std::string::npos) throw ModelError("model: unterminated attribute list in DOT input");
            std::string attrs = s.substr(k, close - k);
            attrs.erase(std::remove_if(attrs.begin(), attrs.end(),
                                       [](unsigned char c) { return std::isspace(c); }),
                        attrs.end());
            if (attrs.find("dir=both") != std::string::npos) both = true;
            k = close + 1;
        }
        edges.push_back({*a, *b, both});
        max_node = std::max({max_node, *a, *b});
    }
    if (max_node < 0) throw ModelError("model: DOT input declares no nodes");
    std::vector<int> parent(max_node + 1, -1);
    std::vector<std::pair<int, int>> bi;
    for (const auto& e : edges) {
        if (e.both) {
            bi.emplace_back(e.a, e.b);
        } else {
            if (e.b == 0) throw ModelError("model: DOT input gives the root a parent");
            if (e.b > max_node || e.b < 0 || e.a < 0 || e.a > max_node)
                throw ModelError("model: DOT edge endpoint out of range");
            if (parent[e.b] != -1)
                throw ModelError("model: node " + std::to_string(e.b) + " has two parents in DOT input");
            parent[e.b] = e.a;
        }
    }
    for (int i = 1; i <= max_node; ++i)
        if (parent[i] == -1)
            throw ModelError("model: node " + std::to_string(i) + " has no parent in DOT input");
    return TreeScm(max_node, std::move(parent), std::move(bi));
}

}  // namespace treescm
