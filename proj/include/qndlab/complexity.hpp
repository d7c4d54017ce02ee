// Copyright 2026 The qndlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "qndlab/hilbert.hpp"
#include "qndlab/qram.hpp"

namespace qndlab {

/// Primitive gates available to the preparation search.
struct GateSet {
    std::vector<GateKind> gates;
    bool allow_ancilla = false;
    int ancilla_qubits = 0;  // used only when allow_ancilla; at most 2
    int max_qubits = 4;

    static GateSet from_names(const std::vector<std::string> &names, int max_qubits = 4) {
        GateSet gs;
        gs.max_qubits = max_qubits;
        for (const auto &n : names) {
            auto g = gate_from_name(n);
            if (!g) {
                throw std::invalid_argument("unknown gate '" + n + "'");
            }
            if (std::find(gs.gates.begin(), gs.gates.end(), *g) == gs.gates.end()) {
                gs.gates.push_back(*g);
            }
        }
        gs.validate();
        return gs;
    }

    static Eigen::MatrixXcd unitary(GateKind g) {
        if (g == GateKind::CNOT) {
            Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(4, 4);
            m(0, 0) = m(1, 1) = m(2, 3) = m(3, 2) = 1.0;
            return m;
        }
        auto a = gate_matrix(g);
        Eigen::MatrixXcd m(2, 2);
        m << a[0], a[1], a[2], a[3];
        return m;
    }

    void validate() const {
        if (gates.empty()) {
            throw std::invalid_argument("gate set is empty");
        }
        for (GateKind g : gates) {
            Eigen::MatrixXcd u = unitary(g);
            if (u.rows() != (Eigen::Index{1} << gate_arity(g))) {
                throw std::invalid_argument("gate arity does not match its matrix");
            }
            Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(u.rows(), u.cols());
            if ((u.adjoint() * u - id).cwiseAbs().maxCoeff() > 1e-9) {
                throw std::invalid_argument("gate " + std::string(gate_name(g)) + " is not unitary");
            }
        }
        if (ancilla_qubits < 0 || ancilla_qubits > 2) {
            throw std::invalid_argument("ancilla count must be in 0..2");
        }
    }

    int ancillas() const { return allow_ancilla ? ancilla_qubits : 0; }
};

struct SearchStats {
    size_t nodes_expanded = 0;
    size_t table_size = 0;
    double wall_seconds = 0.0;
    bool truncated = false;  // node budget hit before maxLen was exhausted
};

struct ComplexityReport {
    StateVector target;
    double eps = 0.0;

    std::optional<int> deterministic_length;
    Program deterministic_witness;
    double deterministic_distance = std::numeric_limits<double>::quiet_NaN();

    std::optional<int> nondet_length;
    Program nondet_witness;
    ClassicalRecord accept_record;
    double nondet_cost_bits = std::numeric_limits<double>::infinity();
    double nondet_distance = std::numeric_limits<double>::quiet_NaN();

    SearchStats stats;

    size_t deterministic_program_bytes() const { return deterministic_length ? deterministic_witness.to_text().size() : 0; }
    size_t nondet_program_bytes() const { return nondet_length ? nondet_witness.to_text().size() : 0; }
};

struct SearchLimits {
    size_t max_nodes = 5'000'000;
    double grid = 1e-6;  // canonicalization grid for the transposition table
};

namespace detail {

struct SearchMove {
    Instruction ins;  // Measure moves carry cbit 0; renumbered when materialized
    std::string key;  // ordering key; witnesses are lexicographically minimal in it
};

inline std::vector<SearchMove> search_moves(const GateSet &gs, int n, bool with_measure) {
    std::vector<SearchMove> moves;
    for (GateKind g : gs.gates) {
        if (gate_arity(g) == 1) {
            for (int q = 0; q < n; ++q) {
                GateOp op{g, {q, 0}};
                moves.push_back({op, gate_text(op)});
            }
        } else {
            for (int c = 0; c < n; ++c) {
                for (int t = 0; t < n; ++t) {
                    if (c != t) {
                        GateOp op{g, {c, t}};
                        moves.push_back({op, gate_text(op)});
                    }
                }
            }
        }
    }
    if (with_measure) {
        for (int q = 0; q < n; ++q) {
            moves.push_back({Measure{q, 0}, "measure " + std::to_string(q)});
        }
    }
    std::sort(moves.begin(), moves.end(), [](const SearchMove &a, const SearchMove &b) { return a.key < b.key; });
    return moves;
}

/// Global phase fixed by making the first non-negligible amplitude real
/// positive, then every component rounded to the grid.
struct StateKey {
    std::vector<int64_t> cells;
    int measurements = 0;
    bool operator==(const StateKey &) const = default;
};

struct StateKeyHash {
    size_t operator()(const StateKey &k) const {
        uint64_t h = 1469598103934665603ull ^ static_cast<uint64_t>(k.measurements);
        for (int64_t c : k.cells) {
            h ^= static_cast<uint64_t>(c);
            h *= 1099511628211ull;
        }
        return static_cast<size_t>(h);
    }
};

inline StateKey make_key(const Amplitudes &amps, int measurements, double grid) {
    Complex phase = 1.0;
    for (const auto &a : amps) {
        if (std::abs(a) > 10 * grid) {
            phase = std::conj(a) / std::abs(a);
            break;
        }
    }
    StateKey key;
    key.cells.reserve(2 * amps.size());
    key.measurements = measurements;
    for (const auto &a : amps) {
        const Complex r = a * phase;
        key.cells.push_back(static_cast<int64_t>(std::llround(r.real() / grid)));
        key.cells.push_back(static_cast<int64_t>(std::llround(r.imag() / grid)));
    }
    return key;
}

struct SearchNode {
    Amplitudes state;
    double probability = 1.0;
    int measurements = 0;
    int depth = 0;
    int32_t parent = -1;
    uint16_t move = 0;
    uint8_t outcome = 0;
    // Position of the parent in its sorted frontier; (parent_rank, move,
    // outcome) orders siblings-of-a-level lexicographically by path.
    int64_t parent_rank = -1;
};

struct SearchResult {
    std::optional<int> length;
    int32_t node = -1;
    double distance = 0.0;
};

/// Level-by-level deepening over instruction sequences with a transposition
/// table keyed on canonicalized (state, measurements used). Returns the
/// shortest accepted node; among those the one with the highest branch
/// probability, then the lexicographically smallest path.
inline SearchResult preparation_search(std::span<const Complex> goal, int n, const std::vector<SearchMove> &moves,
                                       int max_meas, double eps, int max_len, const SearchLimits &limits,
                                       std::vector<SearchNode> &arena, SearchStats &stats) {
    constexpr double kProbTie = 1e-12;
    constexpr double kPrune = 1e-12;
    std::unordered_map<StateKey, int32_t, StateKeyHash> table;
    arena.clear();
    SearchNode root;
    root.state.assign(uint64_t{1} << n, 0.0);
    root.state[0] = 1.0;
    arena.push_back(root);
    table.emplace(make_key(arena[0].state, 0, limits.grid), 0);
    std::vector<int32_t> frontier{0};

    for (int depth = 0;; ++depth) {
        SearchResult best;
        double best_prob = -1.0;
        for (int32_t id : frontier) {
            const auto &node = arena[static_cast<size_t>(id)];
            const double dist = phase_min_distance(goal, node.state);
            if (dist <= eps && node.probability > best_prob + kProbTie) {
                best = {depth, id, dist};
                best_prob = node.probability;
            }
        }
        if (best.length) {
            stats.table_size = table.size();
            return best;
        }
        if (depth == max_len || frontier.empty()) {
            stats.table_size = table.size();
            return {};
        }

        std::vector<int32_t> next;
        for (size_t rank = 0; rank < frontier.size(); ++rank) {
            const int32_t pid = frontier[rank];
            ++stats.nodes_expanded;
            for (size_t mi = 0; mi < moves.size(); ++mi) {
                const auto &mv = moves[mi];
                std::array<Amplitudes, 2> out_states;
                std::array<double, 2> out_prob{0.0, 0.0};
                int children = 0;
                const SearchNode &parent = arena[static_cast<size_t>(pid)];
                if (const auto *g = std::get_if<GateOp>(&mv.ins)) {
                    out_states[0] = parent.state;
                    apply_gate(out_states[0], n, *g);
                    out_prob[0] = parent.probability;
                    children = 1;
                } else {
                    if (parent.measurements >= max_meas) {
                        continue;
                    }
                    const int q = std::get<Measure>(mv.ins).qubit;
                    const double p1 = probability_of_one(parent.state, n, q);
                    const std::array<double, 2> mass{1.0 - p1, p1};
                    if (parent.probability * mass[0] < kPrune || parent.probability * mass[1] < kPrune) {
                        continue;  // outcome is certain; the measurement changes nothing
                    }
                    for (int o = 0; o < 2; ++o) {
                        out_states[static_cast<size_t>(o)] = parent.state;
                        collapse(out_states[static_cast<size_t>(o)], n, q, o, mass[static_cast<size_t>(o)]);
                        out_prob[static_cast<size_t>(o)] = parent.probability * mass[static_cast<size_t>(o)];
                    }
                    children = 2;
                }
                const int child_meas = parent.measurements + (children == 2 ? 1 : 0);
                for (int o = 0; o < children; ++o) {
                    StateKey key = make_key(out_states[static_cast<size_t>(o)], child_meas, limits.grid);
                    auto it = table.find(key);
                    bool reopen = false;
                    if (it != table.end()) {
                        SearchNode &seen = arena[static_cast<size_t>(it->second)];
                        // a shallower copy with less mass must not shadow this one
                        reopen = seen.depth < depth + 1 && out_prob[static_cast<size_t>(o)] > seen.probability + kProbTie;
                    }
                    if (it != table.end() && !reopen) {
                        SearchNode &seen = arena[static_cast<size_t>(it->second)];
                        if (seen.depth == depth + 1 && out_prob[static_cast<size_t>(o)] > seen.probability + kProbTie) {
                            seen.probability = out_prob[static_cast<size_t>(o)];
                            seen.parent = pid;
                            seen.move = static_cast<uint16_t>(mi);
                            seen.outcome = static_cast<uint8_t>(o);
                            seen.parent_rank = static_cast<int64_t>(rank);
                            seen.state = std::move(out_states[static_cast<size_t>(o)]);
                        }
                        continue;
                    }
                    if (arena.size() >= limits.max_nodes) {
                        stats.truncated = true;
                        stats.table_size = table.size();
                        return {};
                    }
                    SearchNode child;
                    child.state = std::move(out_states[static_cast<size_t>(o)]);
                    child.probability = out_prob[static_cast<size_t>(o)];
                    child.measurements = child_meas;
                    child.depth = depth + 1;
                    child.parent = pid;
                    child.move = static_cast<uint16_t>(mi);
                    child.outcome = static_cast<uint8_t>(o);
                    child.parent_rank = static_cast<int64_t>(rank);
                    const auto id = static_cast<int32_t>(arena.size());
                    arena.push_back(std::move(child));
                    if (reopen) {
                        it->second = id;
                    } else {
                        table.emplace(std::move(key), id);
                    }
                    next.push_back(id);
                }
            }
        }
        std::sort(next.begin(), next.end(), [&](int32_t a, int32_t b) {
            const auto &x = arena[static_cast<size_t>(a)];
            const auto &y = arena[static_cast<size_t>(b)];
            return std::tie(x.parent_rank, x.move, x.outcome) < std::tie(y.parent_rank, y.move, y.outcome);
        });
        frontier = std::move(next);
    }
}

/// Rebuilds the program (and accepted outcomes) along a node's path.
inline std::pair<Program, ClassicalRecord> materialize(const std::vector<SearchNode> &arena,
                                                       const std::vector<SearchMove> &moves, int32_t id, int n) {
    std::vector<int32_t> path;
    for (int32_t cur = id; arena[static_cast<size_t>(cur)].parent >= 0; cur = arena[static_cast<size_t>(cur)].parent) {
        path.push_back(cur);
    }
    std::reverse(path.begin(), path.end());
    Program p;
    p.num_qubits = n;
    ClassicalRecord record;
    for (int32_t cur : path) {
        const auto &node = arena[static_cast<size_t>(cur)];
        Instruction ins = moves[node.move].ins;
        if (auto *m = std::get_if<Measure>(&ins)) {
            m->cbit = static_cast<int>(record.size());
            record.push_back(node.outcome);
        }
        p.instructions.push_back(ins);
    }
    p.num_cbits = static_cast<int>(record.size());
    return {std::move(p), std::move(record)};
}

inline Amplitudes search_goal(const StateVector &target, const GateSet &gs) {
    if (target.num_qubits() > gs.max_qubits) {
        throw std::invalid_argument("target has more qubits than the gate set allows");
    }
    Amplitudes zeros(uint64_t{1} << gs.ancillas(), 0.0);
    zeros[0] = 1.0;
    return kron(target, zeros);
}

}  // namespace detail

/// Shortest gate sequence from |0...0> to within phase-minimized distance
/// eps of the target (ancillas, if enabled, must return to |0>).
inline ComplexityReport deterministic_complexity(const StateVector &target, const GateSet &gs, double eps, int max_len,
                                                 const SearchLimits &limits = {}) {
    if (eps <= 0.0) {
        throw std::invalid_argument("eps must be positive");
    }
    gs.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const int n = target.num_qubits() + gs.ancillas();
    const Amplitudes goal = detail::search_goal(target, gs);
    const auto moves = detail::search_moves(gs, n, false);
    std::vector<detail::SearchNode> arena;
    ComplexityReport report;
    report.target = target;
    report.eps = eps;
    auto found = detail::preparation_search(goal, n, moves, 0, eps, max_len, limits, arena, report.stats);
    if (found.length) {
        report.deterministic_length = found.length;
        report.deterministic_witness = detail::materialize(arena, moves, found.node, n).first;
        report.deterministic_distance = found.distance;
    }
    report.stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

/// Shortest program of gates and measurements (at most max_meas of them)
/// having some nonzero-probability branch within eps of the target. The
/// reported cost is -log2 of the best such branch probability at that length.
inline ComplexityReport nondeterministic_complexity(const StateVector &target, const GateSet &gs, double eps,
                                                    int max_len, int max_meas, const SearchLimits &limits = {}) {
    if (eps <= 0.0) {
        throw std::invalid_argument("eps must be positive");
    }
    if (max_meas < 0) {
        throw std::invalid_argument("max_meas must be non-negative");
    }
    gs.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const int n = target.num_qubits() + gs.ancillas();
    const Amplitudes goal = detail::search_goal(target, gs);
    const auto moves = detail::search_moves(gs, n, max_meas > 0);
    std::vector<detail::SearchNode> arena;
    ComplexityReport report;
    report.target = target;
    report.eps = eps;
    auto found = detail::preparation_search(goal, n, moves, max_meas, eps, max_len, limits, arena, report.stats);
    if (found.length) {
        auto [program, record] = detail::materialize(arena, moves, found.node, n);
        report.nondet_length = found.length;
        report.nondet_witness = std::move(program);
        report.accept_record = std::move(record);
        report.nondet_cost_bits = std::max(0.0, -std::log2(arena[static_cast<size_t>(found.node)].probability));
        report.nondet_distance = found.distance;
    }
    report.stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

/// Both searches on one target; stats accumulate.
inline ComplexityReport compare_complexity(const StateVector &target, const GateSet &gs, double eps, int max_len,
                                           int max_meas, const SearchLimits &limits = {}) {
    ComplexityReport det = deterministic_complexity(target, gs, eps, max_len, limits);
    ComplexityReport nd = nondeterministic_complexity(target, gs, eps, max_len, max_meas, limits);
    nd.deterministic_length = det.deterministic_length;
    nd.deterministic_witness = std::move(det.deterministic_witness);
    nd.deterministic_distance = det.deterministic_distance;
    nd.stats.nodes_expanded += det.stats.nodes_expanded;
    nd.stats.table_size += det.stats.table_size;
    nd.stats.wall_seconds += det.stats.wall_seconds;
    nd.stats.truncated = nd.stats.truncated || det.stats.truncated;
    return nd;
}

struct ReplayCheck {
    bool ok = false;
    double distance = 0.0;
    double probability = 0.0;
};

/// Executes a witness through the interpreter and locates the branch with
/// the given record (empty record: the unique leaf of a unitary program).
inline ReplayCheck replay_witness(const Program &witness, const ClassicalRecord &record, std::span<const Complex> goal,
                                  double eps) {
    SimOptions opt;
    opt.max_qubits = std::max(opt.max_qubits, witness.num_qubits);
    OutcomeTree tree = enumerate_branches(witness, opt);
    for (int i : tree.leaves()) {
        const auto &leaf = tree.node(i);
        if (leaf.record == record && !leaf.rejected) {
            const double dist = phase_min_distance(goal, leaf.state);
            return {dist <= eps, dist, leaf.probability};
        }
    }
    return {};
}

inline nlohmann::json to_json(const ComplexityReport &r, bool with_timing = false) {
    auto length_json = [](const std::optional<int> &len) { return len ? nlohmann::json(*len) : nlohmann::json(nullptr); };
    nlohmann::json j{{"target", to_json(r.target)}, {"eps", r.eps}};
    j["deterministic_length"] = length_json(r.deterministic_length);
    if (r.deterministic_length) {
        j["deterministic_witness"] = r.deterministic_witness.to_text();
        j["deterministic_program_bytes"] = r.deterministic_program_bytes();
        j["deterministic_distance"] = r.deterministic_distance;
    }
    j["nondet_length"] = length_json(r.nondet_length);
    if (r.nondet_length) {
        j["nondet_witness"] = r.nondet_witness.to_text();
        j["nondet_program_bytes"] = r.nondet_program_bytes();
        j["accept_record"] = record_text(r.accept_record);
        j["nondet_cost_bits"] = r.nondet_cost_bits;
        j["nondet_distance"] = r.nondet_distance;
    }
    nlohmann::json stats{{"nodes_expanded", r.stats.nodes_expanded},
                         {"table_size", r.stats.table_size},
                         {"truncated", r.stats.truncated}};
    if (with_timing) {
        stats["wall_seconds"] = r.stats.wall_seconds;
    }
    j["search_stats"] = std::move(stats);
    return j;
}

}  // namespace qndlab
