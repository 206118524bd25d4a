// Command-line front end: model ingestion (JSON or DOT), identification runs,
// report emission, and the exact-arithmetic cross-check for small models.
//
// Exit codes: 0 success, 1 input error, 2 randomized-test budget exhausted,
// 3 model inconsistency (including a cross-check disagreement).

#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "treescm/identify.hpp"
#include "treescm/oracle.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kBudgetError = 2;
constexpr int kInconsistency = 3;

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw treescm::ModelError("model: cannot open input file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Extension wins when present; otherwise the first significant byte decides
// (JSON models are objects, DOT starts with a keyword or comment).
bool looks_like_dot(const std::string& path, const std::string& text) {
    if (path.ends_with(".dot") || path.ends_with(".gv")) return true;
    if (path.ends_with(".json")) return false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        return c != '{' && c != '[';
    }
    return false;
}

treescm::TreeScm load_model(const std::string& path) {
    const std::string text = read_input(path);
    return looks_like_dot(path, text) ? treescm::TreeScm::from_dot(text)
                                      : treescm::TreeScm::parse(text);
}

// Attribute lists stay digit-free so the reader round-trips this output.
std::string to_dot(const treescm::TreeScm& m) {
    std::string out = "digraph model {\n";
    for (int v = 1; v <= m.n(); ++v)
        out += "  " + std::to_string(m.parent(v)) + " -> " + std::to_string(v) + ";\n";
    for (auto [a, b] : m.bidirected())
        out += "  " + std::to_string(a) + " -> " + std::to_string(b) +
               " [dir=both, style=dashed];\n";
    out += "}\n";
    return out;
}

void write_out(const std::string& path, const std::string& data) {
    if (path.empty() || path == "-") {
        std::cout << data;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw treescm::ModelError("model: cannot open output file: " + path);
    out << data;
}

const char* to_string(treescm::OracleStatus s) {
    switch (s) {
        case treescm::OracleStatus::Identifiable: return "identifiable";
        case treescm::OracleStatus::TwoIdentifiable: return "2-identifiable";
        default: return "unidentifiable";
    }
}

struct Options {
    std::string input;
    std::string output;
    std::string emit_dot;
    std::string format = "json";
    std::uint64_t seed = 0;
    std::uint64_t prime = treescm::kDefaultPrime;
    double error_prob = 0x1p-40;
    bool oracle_check = false;
};

int run_identify(const Options& opt) {
    if (!treescm::is_prime_u64(opt.prime)) {
        std::cerr << "error: --prime " << opt.prime << " is not prime\n";
        return kInputError;
    }
    treescm::TreeScm m = load_model(opt.input);
    if (!opt.emit_dot.empty()) write_out(opt.emit_dot, to_dot(m));

    treescm::PitSession session(opt.prime, opt.seed, opt.error_prob,
                                treescm::identification_degree_bound(m));
    treescm::IdentReport rep = treescm::run_identification(m, session);

    int oracle_nodes = 0;
    if (opt.oracle_check) {
        if (m.n() > 8) {
            std::cerr << "error: --oracle-check supports at most 8 nodes (got " << m.n()
                      << ")\n";
            return kInputError;
        }
        std::mt19937_64 rng(opt.seed);
        treescm::OracleReport orep = treescm::oracle_identify(m, rng);
        for (int v = 1; v <= m.n(); ++v) {
            const bool agree =
                (rep.nodes[v].status == treescm::NodeStatus::Identifiable &&
                 orep.nodes[v].status == treescm::OracleStatus::Identifiable) ||
                (rep.nodes[v].status == treescm::NodeStatus::TwoIdentifiable &&
                 orep.nodes[v].status == treescm::OracleStatus::TwoIdentifiable) ||
                (rep.nodes[v].status == treescm::NodeStatus::Unidentifiable &&
                 orep.nodes[v].status == treescm::OracleStatus::Unidentifiable);
            if (!agree) {
                std::cerr << "error: cross-check mismatch at node " << v
                          << ": randomized engine reports "
                          << treescm::to_string(rep.nodes[v].status)
                          << ", exact solver reports " << to_string(orep.nodes[v].status)
                          << "\n";
                return kInconsistency;
            }
        }
        oracle_nodes = m.n();
    }

    std::string payload;
    if (opt.format == "json") {
        nlohmann::ordered_json out = rep.to_json();
        out["pit"] = {{"seed", opt.seed},
                      {"prime", opt.prime},
                      {"trials", session.trials_used()}};
        if (opt.oracle_check)
            out["oracle_check"] = {{"nodes", oracle_nodes}, {"agreement", true}};
        payload = out.dump(2) + "\n";
    } else {
        payload = rep.to_text();
        if (opt.oracle_check)
            payload += "oracle check: statuses agree on all " + std::to_string(oracle_nodes) +
                       " nodes\n";
    }
    write_out(opt.output, payload);
    return kOk;
}

int run_graph(const Options& opt) {
    treescm::TreeScm m = load_model(opt.input);
    if (!opt.emit_dot.empty()) write_out(opt.emit_dot, to_dot(m));
    write_out(opt.output,
              opt.format == "dot" ? to_dot(m) : m.to_json().dump(2) + "\n");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"identifiability of tree-shaped linear SCMs from observed covariances"};
    app.require_subcommand(1);
    Options opt;

    CLI::App* identify = app.add_subcommand(
        "identify", "classify every edge coefficient and emit recovery formulas");
    identify->add_option("input", opt.input, "model file (JSON or DOT), or - for stdin")
        ->required();
    identify->add_option("--seed", opt.seed, "random seed (default 0)");
    identify->add_option("--error-prob", opt.error_prob,
                         "one-sided error budget in (0,1) (default 2^-40)");
    identify->add_option("--prime", opt.prime, "field modulus, a prime in [2^61, 2^63)");
    identify->add_option("--format", opt.format, "output format (default json)")
        ->check(CLI::IsMember({"json", "text"}));
    identify->add_flag("--oracle-check", opt.oracle_check,
                       "cross-check statuses against the exact rational solver (n <= 8)");
    identify->add_option("--emit-dot", opt.emit_dot, "also write the model as DOT to this path");
    identify->add_option("-o,--output", opt.output, "write the report here instead of stdout");

    CLI::App* graph = app.add_subcommand(
        "graph", "parse a model and echo it in canonical form");
    graph->add_option("input", opt.input, "model file (JSON or DOT), or - for stdin")
        ->required();
    graph->add_option("--format", opt.format, "output format (default json)")
        ->check(CLI::IsMember({"json", "dot"}));
    graph->add_option("--emit-dot", opt.emit_dot, "also write the model as DOT to this path");
    graph->add_option("-o,--output", opt.output, "write the output here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }

    try {
        return identify->parsed() ? run_identify(opt) : run_graph(opt);
    } catch (const treescm::PitBudgetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBudgetError;
    } catch (const treescm::InconsistencyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInconsistency;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
}
