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

#include <array>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "qndlab/hilbert.hpp"
#include "qndlab/rng.hpp"

namespace qndlab {

enum class GateKind : uint8_t { H, X, Y, Z, S, Sdg, T, Tdg, CNOT };

inline constexpr std::array<GateKind, 9> kAllGates = {GateKind::H, GateKind::X,   GateKind::Y,
                                                      GateKind::Z, GateKind::S,   GateKind::Sdg,
                                                      GateKind::T, GateKind::Tdg, GateKind::CNOT};

inline std::string_view gate_name(GateKind g) {
    switch (g) {
        case GateKind::H: return "h";
        case GateKind::X: return "x";
        case GateKind::Y: return "y";
        case GateKind::Z: return "z";
        case GateKind::S: return "s";
        case GateKind::Sdg: return "sdg";
        case GateKind::T: return "t";
        case GateKind::Tdg: return "tdg";
        case GateKind::CNOT: return "cnot";
    }
    return "?";
}

inline std::optional<GateKind> gate_from_name(std::string_view name) {
    for (GateKind g : kAllGates) {
        if (gate_name(g) == name) {
            return g;
        }
    }
    if (name == "cx") return GateKind::CNOT;
    if (name == "sdag") return GateKind::Sdg;
    if (name == "tdag") return GateKind::Tdg;
    return std::nullopt;
}

inline int gate_arity(GateKind g) { return g == GateKind::CNOT ? 2 : 1; }

using Matrix2 = std::array<Complex, 4>;  // row-major

inline Matrix2 gate_matrix(GateKind g) {
    const double r = 1.0 / std::numbers::sqrt2;
    const Complex i{0.0, 1.0};
    const Complex w = std::polar(1.0, std::numbers::pi / 4);
    switch (g) {
        case GateKind::H: return {r, r, r, -r};
        case GateKind::X: return {0.0, 1.0, 1.0, 0.0};
        case GateKind::Y: return {0.0, -i, i, 0.0};
        case GateKind::Z: return {1.0, 0.0, 0.0, -1.0};
        case GateKind::S: return {1.0, 0.0, 0.0, i};
        case GateKind::Sdg: return {1.0, 0.0, 0.0, -i};
        case GateKind::T: return {1.0, 0.0, 0.0, w};
        case GateKind::Tdg: return {1.0, 0.0, 0.0, std::conj(w)};
        case GateKind::CNOT: break;
    }
    throw std::invalid_argument("cnot has no 2x2 matrix");
}

struct GateOp {
    GateKind kind;
    std::array<int, 2> qubits{0, 0};  // control, target for cnot
    bool operator==(const GateOp &) const = default;
};

struct Measure {
    int qubit;
    int cbit;
    bool operator==(const Measure &) const = default;
};

struct CondGate {
    int cbit;
    int value;
    GateOp gate;
    bool operator==(const CondGate &) const = default;
};

struct Postselect {
    int cbit;
    int value;
    bool operator==(const Postselect &) const = default;
};

struct Halt {
    bool operator==(const Halt &) const = default;
};

using Instruction = std::variant<GateOp, Measure, CondGate, Postselect, Halt>;

inline std::string gate_text(const GateOp &g) {
    std::string s(gate_name(g.kind));
    s += ' ' + std::to_string(g.qubits[0]);
    if (gate_arity(g.kind) == 2) {
        s += ' ' + std::to_string(g.qubits[1]);
    }
    return s;
}

/// Canonical one-line text of an instruction, as accepted by parse_program.
inline std::string instruction_text(const Instruction &ins) {
    return std::visit(
        [](const auto &op) -> std::string {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, GateOp>) {
                return gate_text(op);
            } else if constexpr (std::is_same_v<T, Measure>) {
                return "measure " + std::to_string(op.qubit) + " -> c" + std::to_string(op.cbit);
            } else if constexpr (std::is_same_v<T, CondGate>) {
                return "cif c" + std::to_string(op.cbit) + "=" + std::to_string(op.value) + " " + gate_text(op.gate);
            } else if constexpr (std::is_same_v<T, Postselect>) {
                return "postselect c" + std::to_string(op.cbit) + "=" + std::to_string(op.value);
            } else {
                return "halt";
            }
        },
        ins);
}

class ParseError : public std::runtime_error {
  public:
    ParseError(int line, const std::string &what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

struct Program {
    int num_qubits = 0;
    int num_cbits = 0;
    std::vector<Instruction> instructions;

    /// Throws std::out_of_range naming the offending instruction index.
    void validate() const {
        if (num_qubits < 0 || num_cbits < 0) {
            throw std::invalid_argument("register sizes must be non-negative");
        }
        for (size_t i = 0; i < instructions.size(); ++i) {
            if (auto why = check_instruction(instructions[i])) {
                throw std::out_of_range("instruction " + std::to_string(i) + ": " + *why);
            }
        }
    }

    std::optional<std::string> check_instruction(const Instruction &ins) const {
        auto qubit_ok = [&](int q) { return q >= 0 && q < num_qubits; };
        auto cbit_ok = [&](int c) { return c >= 0 && c < num_cbits; };
        auto gate_ok = [&](const GateOp &g) -> std::optional<std::string> {
            if (!qubit_ok(g.qubits[0]) || (gate_arity(g.kind) == 2 && !qubit_ok(g.qubits[1]))) {
                return "qubit index out of range";
            }
            if (gate_arity(g.kind) == 2 && g.qubits[0] == g.qubits[1]) {
                return "two-qubit gate needs distinct qubits";
            }
            return std::nullopt;
        };
        return std::visit(
            [&](const auto &op) -> std::optional<std::string> {
                using T = std::decay_t<decltype(op)>;
                if constexpr (std::is_same_v<T, GateOp>) {
                    return gate_ok(op);
                } else if constexpr (std::is_same_v<T, Measure>) {
                    if (!qubit_ok(op.qubit)) return "qubit index out of range";
                    if (!cbit_ok(op.cbit)) return "classical bit index out of range";
                    return std::nullopt;
                } else if constexpr (std::is_same_v<T, CondGate>) {
                    if (!cbit_ok(op.cbit)) return "classical bit index out of range";
                    if (op.value != 0 && op.value != 1) return "condition value must be 0 or 1";
                    return gate_ok(op.gate);
                } else if constexpr (std::is_same_v<T, Postselect>) {
                    if (!cbit_ok(op.cbit)) return "classical bit index out of range";
                    if (op.value != 0 && op.value != 1) return "postselect value must be 0 or 1";
                    return std::nullopt;
                } else {
                    return std::nullopt;
                }
            },
            ins);
    }

    size_t measurement_count() const {
        size_t c = 0;
        for (const auto &ins : instructions) {
            c += std::holds_alternative<Measure>(ins);
        }
        return c;
    }

    bool unitary_only() const {
        for (const auto &ins : instructions) {
            if (!std::holds_alternative<GateOp>(ins) && !std::holds_alternative<Halt>(ins)) {
                return false;
            }
        }
        return true;
    }

    std::string to_text() const {
        std::string out = "qubits " + std::to_string(num_qubits) + "\ncbits " + std::to_string(num_cbits) + "\n";
        for (const auto &ins : instructions) {
            out += instruction_text(ins);
            out += '\n';
        }
        return out;
    }

    bool operator==(const Program &) const = default;
};

namespace detail {

inline std::vector<std::string> tokenize_line(std::string line) {
    for (auto &ch : line) {
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    std::string spaced;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line.compare(i, 2, "->") == 0) {
            spaced += " -> ";
            ++i;
        } else if (line[i] == '=' || line[i] == ';') {
            spaced += ' ';
            spaced += line[i];
            spaced += ' ';
        } else {
            spaced += line[i];
        }
    }
    std::istringstream in(spaced);
    std::vector<std::string> tokens;
    std::string t;
    while (in >> t) {
        tokens.push_back(t);
    }
    return tokens;
}

inline int parse_int(const std::string &tok, int line, const char *what) {
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        throw ParseError(line, std::string("expected ") + what + ", got '" + tok + "'");
    }
    try {
        return std::stoi(tok);
    } catch (const std::out_of_range &) {
        throw ParseError(line, std::string(what) + " too large: '" + tok + "'");
    }
}

inline int parse_cbit(const std::string &tok, int line) {
    if (tok.size() < 2 || tok[0] != 'c') {
        throw ParseError(line, "expected classical bit 'cK', got '" + tok + "'");
    }
    return parse_int(tok.substr(1), line, "classical bit index");
}

/// Parses `<gate> q [q2]` from tokens[pos..].
inline GateOp parse_gate(const std::vector<std::string> &tokens, size_t pos, int line) {
    auto kind = gate_from_name(tokens[pos]);
    if (!kind) {
        throw ParseError(line, "unknown gate '" + tokens[pos] + "'");
    }
    const size_t need = static_cast<size_t>(gate_arity(*kind));
    if (tokens.size() - pos - 1 != need) {
        throw ParseError(line, "gate '" + tokens[pos] + "' takes " + std::to_string(need) + " qubit index(es)");
    }
    GateOp g{*kind, {0, 0}};
    for (size_t i = 0; i < need; ++i) {
        g.qubits[i] = parse_int(tokens[pos + 1 + i], line, "qubit index");
    }
    return g;
}

/// Parses `cK = V` at tokens[pos..pos+2].
inline std::pair<int, int> parse_condition(const std::vector<std::string> &tokens, size_t pos, int line) {
    if (tokens.size() < pos + 3 || tokens[pos + 1] != "=") {
        throw ParseError(line, "expected condition 'cK=V'");
    }
    int c = parse_cbit(tokens[pos], line);
    int v = parse_int(tokens[pos + 2], line, "bit value");
    if (v > 1) {
        throw ParseError(line, "bit value must be 0 or 1");
    }
    return {c, v};
}

}  // namespace detail

/// Parses the line-based program format:
///   qubits N | cbits M | <gate> q [q2] | measure q -> cK |
///   cif cK=V <gate> q [q2] | postselect cK=V | halt
/// Case-insensitive, '#' starts a comment. Without a `cbits` line the
/// classical register is sized to the largest referenced bit.
inline Program parse_program(std::string_view text) {
    Program p;
    std::optional<int> declared_qubits, declared_cbits;
    std::vector<int> lines;
    int max_cbit = -1;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) {
            raw.resize(hash);
        }
        auto tok = detail::tokenize_line(raw);
        if (tok.empty()) {
            continue;
        }
        const std::string &op = tok[0];
        if (op == "qubits" || op == "cbits") {
            if (tok.size() != 2) {
                throw ParseError(line_no, "'" + op + "' takes one integer");
            }
            auto &slot = op == "qubits" ? declared_qubits : declared_cbits;
            if (slot) {
                throw ParseError(line_no, "duplicate '" + op + "' declaration");
            }
            slot = detail::parse_int(tok[1], line_no, "register size");
            continue;
        }
        Instruction ins;
        if (op == "measure") {
            if (tok.size() != 4 || tok[2] != "->") {
                throw ParseError(line_no, "expected 'measure q -> cK'");
            }
            Measure m{detail::parse_int(tok[1], line_no, "qubit index"), detail::parse_cbit(tok[3], line_no)};
            max_cbit = std::max(max_cbit, m.cbit);
            ins = m;
        } else if (op == "cif") {
            auto [c, v] = detail::parse_condition(tok, 1, line_no);
            if (tok.size() < 5) {
                throw ParseError(line_no, "expected 'cif cK=V <gate> q [q2]'");
            }
            max_cbit = std::max(max_cbit, c);
            ins = CondGate{c, v, detail::parse_gate(tok, 4, line_no)};
        } else if (op == "postselect") {
            auto [c, v] = detail::parse_condition(tok, 1, line_no);
            if (tok.size() != 4) {
                throw ParseError(line_no, "unexpected tokens after postselect condition");
            }
            max_cbit = std::max(max_cbit, c);
            ins = Postselect{c, v};
        } else if (op == "halt") {
            if (tok.size() != 1) {
                throw ParseError(line_no, "'halt' takes no arguments");
            }
            ins = Halt{};
        } else {
            ins = detail::parse_gate(tok, 0, line_no);
        }
        p.instructions.push_back(ins);
        lines.push_back(line_no);
    }
    if (!declared_qubits) {
        throw ParseError(line_no, "missing 'qubits N' declaration");
    }
    p.num_qubits = *declared_qubits;
    p.num_cbits = declared_cbits.value_or(max_cbit + 1);
    for (size_t i = 0; i < p.instructions.size(); ++i) {
        if (auto why = p.check_instruction(p.instructions[i])) {
            throw ParseError(lines[i], *why);
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Simulation kernels. States are raw amplitude vectors here; qubit q of n
// owns bit (n - 1 - q) of the amplitude index.

inline void apply_gate(Amplitudes &amps, int num_qubits, const GateOp &g) {
    if (g.kind == GateKind::CNOT) {
        const uint64_t cmask = uint64_t{1} << (num_qubits - 1 - g.qubits[0]);
        const uint64_t tmask = uint64_t{1} << (num_qubits - 1 - g.qubits[1]);
        for (uint64_t i = 0; i < amps.size(); ++i) {
            if ((i & cmask) && !(i & tmask)) {
                std::swap(amps[i], amps[i | tmask]);
            }
        }
        return;
    }
    const Matrix2 m = gate_matrix(g.kind);
    const uint64_t stride = uint64_t{1} << (num_qubits - 1 - g.qubits[0]);
    for (uint64_t i = 0; i < amps.size(); ++i) {
        if (i & stride) {
            continue;
        }
        const Complex a0 = amps[i], a1 = amps[i | stride];
        amps[i] = m[0] * a0 + m[1] * a1;
        amps[i | stride] = m[2] * a0 + m[3] * a1;
    }
}

/// Probability of reading 1 on the qubit, for a normalized state.
inline double probability_of_one(const Amplitudes &amps, int num_qubits, int qubit) {
    const uint64_t mask = uint64_t{1} << (num_qubits - 1 - qubit);
    double p = 0.0;
    for (uint64_t i = 0; i < amps.size(); ++i) {
        if (i & mask) {
            p += std::norm(amps[i]);
        }
    }
    return p;
}

/// Projects onto the outcome and renormalizes by the given outcome mass.
inline void collapse(Amplitudes &amps, int num_qubits, int qubit, int outcome, double mass) {
    const uint64_t mask = uint64_t{1} << (num_qubits - 1 - qubit);
    const double scale = mass > 0.0 ? 1.0 / std::sqrt(mass) : 0.0;
    for (uint64_t i = 0; i < amps.size(); ++i) {
        const bool one = (i & mask) != 0;
        if (one == (outcome == 1)) {
            amps[i] *= scale;
        } else {
            amps[i] = 0.0;
        }
    }
}

struct SimOptions {
    int max_qubits = 12;
    int max_branchings = 16;
    int postselect_retries = 1000;
    double prune_threshold = 1e-12;
};

class PostselectionError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class BranchCapError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using ClassicalRecord = std::vector<uint8_t>;

inline std::string record_text(const ClassicalRecord &r) {
    std::string s;
    for (auto b : r) {
        s += b ? '1' : '0';
    }
    return s;
}

namespace detail {

inline Amplitudes initial_amplitudes(const Program &p, const std::optional<StateVector> &initial,
                                     const SimOptions &opt) {
    p.validate();
    if (p.num_qubits > opt.max_qubits) {
        throw std::invalid_argument("program uses " + std::to_string(p.num_qubits) +
                                    " qubits, above the exact-simulation cap of " + std::to_string(opt.max_qubits));
    }
    if (initial) {
        if (initial->num_qubits() != p.num_qubits) {
            throw std::invalid_argument("initial state width does not match the program register");
        }
        auto a = initial->amplitudes();
        return Amplitudes(a.begin(), a.end());
    }
    Amplitudes amps(uint64_t{1} << p.num_qubits);
    amps[0] = 1.0;
    return amps;
}

}  // namespace detail

struct SampleResult {
    ClassicalRecord record;
    StateVector state;
    int attempts = 1;
};

/// One seeded execution with Born-rule sampling. A failed postselection
/// restarts the program from the initial state on a fresh substream.
inline SampleResult run_sampled(const Program &p, uint64_t seed, const SimOptions &opt = {},
                                const std::optional<StateVector> &initial = std::nullopt) {
    const Amplitudes start = detail::initial_amplitudes(p, initial, opt);
    const int n = p.num_qubits;
    for (int attempt = 0; attempt < std::max(1, opt.postselect_retries); ++attempt) {
        Rng rng = substream(seed, StreamTag::Postselect, static_cast<uint64_t>(attempt));
        Amplitudes amps = start;
        ClassicalRecord record(static_cast<size_t>(p.num_cbits), 0);
        bool rejected = false;
        for (const auto &ins : p.instructions) {
            if (const auto *g = std::get_if<GateOp>(&ins)) {
                apply_gate(amps, n, *g);
            } else if (const auto *m = std::get_if<Measure>(&ins)) {
                const double p1 = probability_of_one(amps, n, m->qubit);
                const int outcome = rng.uniform() < p1 ? 1 : 0;
                collapse(amps, n, m->qubit, outcome, outcome ? p1 : 1.0 - p1);
                record[static_cast<size_t>(m->cbit)] = static_cast<uint8_t>(outcome);
            } else if (const auto *c = std::get_if<CondGate>(&ins)) {
                if (record[static_cast<size_t>(c->cbit)] == c->value) {
                    apply_gate(amps, n, c->gate);
                }
            } else if (const auto *ps = std::get_if<Postselect>(&ins)) {
                if (record[static_cast<size_t>(ps->cbit)] != ps->value) {
                    rejected = true;
                    break;
                }
            } else {
                break;  // halt
            }
        }
        if (!rejected) {
            return {std::move(record), StateVector::normalized(std::move(amps)), attempt + 1};
        }
    }
    throw PostselectionError("postselection failed after " + std::to_string(opt.postselect_retries) + " attempts");
}

struct OutcomeNode {
    ClassicalRecord record;
    double probability = 0.0;
    StateVector state;  // state entering the split for internal nodes; final state for leaves
    std::array<int, 2> children{-1, -1};  // keyed by outcome; -1 = absent
    int parent = -1;
    int measured_qubit = -1;  // set on internal nodes
    int measured_cbit = -1;
    double pruned_probability = 0.0;  // mass of dropped sub-threshold branches below this node
    bool rejected = false;            // failed a postselection

    bool is_leaf() const { return children[0] < 0 && children[1] < 0; }
};

/// Every measurement branch of a program, with exact probabilities.
class OutcomeTree {
  public:
    const std::vector<OutcomeNode> &nodes() const { return nodes_; }
    const OutcomeNode &root() const { return nodes_.front(); }
    const OutcomeNode &node(int i) const { return nodes_.at(static_cast<size_t>(i)); }

    std::vector<int> leaves() const {
        std::vector<int> out;
        for (size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].is_leaf()) {
                out.push_back(static_cast<int>(i));
            }
        }
        return out;
    }

    double leaf_probability_sum() const {
        double s = 0.0;
        for (int i : leaves()) {
            s += nodes_[static_cast<size_t>(i)].probability;
        }
        return s;
    }

    double pruned_probability() const {
        double s = 0.0;
        for (const auto &n : nodes_) {
            s += n.pruned_probability;
        }
        return s;
    }

  private:
    friend OutcomeTree enumerate_branches(const Program &, const SimOptions &, const std::optional<StateVector> &);
    std::vector<OutcomeNode> nodes_;
};

namespace detail {

struct BranchBuilder {
    const Program &program;
    const SimOptions &opt;
    std::vector<OutcomeNode> &nodes;

    void run(int node, size_t pc, Amplitudes amps, ClassicalRecord record, int branchings) {
        const int n = program.num_qubits;
        auto finish = [&](bool rejected) {
            auto &leaf = nodes[static_cast<size_t>(node)];
            leaf.state = StateVector::normalized(std::move(amps));
            leaf.record = std::move(record);
            leaf.rejected = rejected;
        };
        for (; pc < program.instructions.size(); ++pc) {
            const auto &ins = program.instructions[pc];
            if (const auto *g = std::get_if<GateOp>(&ins)) {
                apply_gate(amps, n, *g);
            } else if (const auto *c = std::get_if<CondGate>(&ins)) {
                if (record[static_cast<size_t>(c->cbit)] == c->value) {
                    apply_gate(amps, n, c->gate);
                }
            } else if (const auto *ps = std::get_if<Postselect>(&ins)) {
                if (record[static_cast<size_t>(ps->cbit)] != ps->value) {
                    finish(true);
                    return;
                }
            } else if (const auto *m = std::get_if<Measure>(&ins)) {
                const double p1 = probability_of_one(amps, n, m->qubit);
                const std::array<double, 2> mass{1.0 - p1, p1};
                const double here = nodes[static_cast<size_t>(node)].probability;
                const bool split = here * mass[0] >= opt.prune_threshold && here * mass[1] >= opt.prune_threshold;
                if (!split) {
                    // One surviving branch: collapse in place, keep walking the same node.
                    const int outcome = here * mass[1] >= opt.prune_threshold ? 1 : 0;
                    nodes[static_cast<size_t>(node)].pruned_probability += here * mass[1 - outcome];
                    nodes[static_cast<size_t>(node)].probability = here * mass[outcome];
                    collapse(amps, n, m->qubit, outcome, mass[outcome]);
                    record[static_cast<size_t>(m->cbit)] = static_cast<uint8_t>(outcome);
                    continue;
                }
                if (branchings >= opt.max_branchings) {
                    throw BranchCapError("branch cap of " + std::to_string(opt.max_branchings) + " exceeded");
                }
                {
                    auto &self = nodes[static_cast<size_t>(node)];
                    self.state = StateVector::normalized(amps);
                    self.record = record;
                    self.measured_qubit = m->qubit;
                    self.measured_cbit = m->cbit;
                }
                for (int outcome = 0; outcome < 2; ++outcome) {
                    OutcomeNode child;
                    child.parent = node;
                    child.probability = here * mass[static_cast<size_t>(outcome)];
                    const int id = static_cast<int>(nodes.size());
                    nodes.push_back(std::move(child));
                    nodes[static_cast<size_t>(node)].children[static_cast<size_t>(outcome)] = id;
                    Amplitudes branch = amps;
                    collapse(branch, n, m->qubit, outcome, mass[static_cast<size_t>(outcome)]);
                    ClassicalRecord r = record;
                    r[static_cast<size_t>(m->cbit)] = static_cast<uint8_t>(outcome);
                    run(id, pc + 1, std::move(branch), std::move(r), branchings + 1);
                }
                return;
            } else {
                break;  // halt
            }
        }
        finish(false);
    }
};

}  // namespace detail

/// Exact enumeration of all measurement outcomes. A measurement whose
/// outcome has probability below opt.prune_threshold does not split: that
/// mass is recorded in pruned_probability on the node instead.
inline OutcomeTree enumerate_branches(const Program &p, const SimOptions &opt = {},
                                      const std::optional<StateVector> &initial = std::nullopt) {
    Amplitudes start = detail::initial_amplitudes(p, initial, opt);
    OutcomeTree tree;
    OutcomeNode root;
    root.probability = 1.0;
    tree.nodes_.push_back(std::move(root));
    detail::BranchBuilder builder{p, opt, tree.nodes_};
    builder.run(0, 0, std::move(start), ClassicalRecord(static_cast<size_t>(p.num_cbits), 0), 0);
    return tree;
}

using LeafPredicate = std::function<bool(const OutcomeNode &)>;

/// Leaves whose record has the given value on every listed classical bit.
inline LeafPredicate record_matches(std::vector<std::pair<int, int>> bits) {
    return [bits = std::move(bits)](const OutcomeNode &leaf) {
        if (leaf.rejected) {
            return false;
        }
        for (auto [c, v] : bits) {
            if (leaf.record.at(static_cast<size_t>(c)) != v) {
                return false;
            }
        }
        return true;
    };
}

inline double accepted_probability(const OutcomeTree &tree, const LeafPredicate &accept) {
    double total = 0.0;
    for (int i : tree.leaves()) {
        const auto &leaf = tree.node(i);
        if (accept(leaf)) {
            total += leaf.probability;
        }
    }
    return total;
}

/// Degree of nondeterminism in bits: -log2 of the accepted leaf mass.
inline double nondet_cost(const OutcomeTree &tree, const LeafPredicate &accept) {
    const double p = accepted_probability(tree, accept);
    if (p <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return std::max(0.0, -std::log2(std::min(p, 1.0)));
}

inline nlohmann::json to_json(const OutcomeTree &tree, bool with_states = false) {
    std::function<nlohmann::json(int)> emit = [&](int i) {
        const auto &n = tree.node(i);
        nlohmann::json j{{"record", record_text(n.record)}, {"prob", n.probability}};
        if (n.rejected) {
            j["rejected"] = true;
        }
        if (n.pruned_probability > 0.0) {
            j["pruned_prob"] = n.pruned_probability;
        }
        if (!n.is_leaf()) {
            j["measured_qubit"] = n.measured_qubit;
            j["cbit"] = n.measured_cbit;
        }
        if (with_states) {
            j["state"] = to_json(n.state);
        }
        nlohmann::json kids = nlohmann::json::object();
        for (int outcome = 0; outcome < 2; ++outcome) {
            if (n.children[static_cast<size_t>(outcome)] >= 0) {
                kids[std::to_string(outcome)] = emit(n.children[static_cast<size_t>(outcome)]);
            }
        }
        j["children"] = std::move(kids);
        return j;
    };
    return emit(0);
}

}  // namespace qndlab
