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
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qndlab/hilbert.hpp"
#include "qndlab/qram.hpp"
#include "qndlab/random_source.hpp"
#include "qndlab/rng.hpp"

namespace qndlab {

/// Inclusive qubit range; empty when first > last.
struct QubitRange {
    int first = 0;
    int last = -1;

    int width() const { return last >= first ? last - first + 1 : 0; }
    bool contains(int q) const { return q >= first && q <= last; }
    bool operator==(const QubitRange &) const = default;
};

/// Program on registers x and y whose measured output bit defines the
/// probabilistic relation R(x, y). Qubits outside x and y start in |0>.
struct RelationCircuit {
    Program program;
    QubitRange x;
    QubitRange y;
    int output_bit = 0;

    void validate() const {
        program.validate();
        for (auto r : {x, y}) {
            if (r.width() > 0 && (r.first < 0 || r.last >= program.num_qubits)) {
                throw std::out_of_range("register range outside the program's qubits");
            }
        }
        if (x.width() > 0 && y.width() > 0 && x.first <= y.last && y.first <= x.last) {
            throw std::invalid_argument("x and y registers overlap");
        }
        if (y.width() == 0) {
            throw std::invalid_argument("y register must be nonempty");
        }
        if (output_bit < 0 || output_bit >= program.num_cbits) {
            throw std::out_of_range("output bit outside the classical register");
        }
        // Only gates are conditional, so one unconditional measurement into
        // the output bit ahead of any halt covers every branch.
        int writes = 0;
        for (const auto &ins : program.instructions) {
            if (std::holds_alternative<Halt>(ins) && writes == 0) {
                throw std::invalid_argument("halt before the output bit is measured");
            }
            if (const auto *m = std::get_if<Measure>(&ins); m && m->cbit == output_bit) {
                ++writes;
            }
        }
        if (writes != 1) {
            throw std::invalid_argument("output bit must be measured exactly once (found " + std::to_string(writes) + ")");
        }
    }
};

/// Joint input x (on x qubits) and y (on y qubits), zeros elsewhere.
inline StateVector joint_input(const RelationCircuit &rel, const StateVector &x, const StateVector &y) {
    if (x.num_qubits() != rel.x.width() || y.num_qubits() != rel.y.width()) {
        throw std::invalid_argument("input widths do not match the relation's registers");
    }
    const int n = rel.program.num_qubits;
    auto scatter = [n](uint64_t compact, QubitRange r) {
        uint64_t full = 0;
        const int w = r.width();
        for (int b = 0; b < w; ++b) {
            if ((compact >> (w - 1 - b)) & 1) {
                full |= uint64_t{1} << (n - 1 - (r.first + b));
            }
        }
        return full;
    };
    Amplitudes amps(uint64_t{1} << n, 0.0);
    for (uint64_t ix = 0; ix < x.dim(); ++ix) {
        if (x[ix] == 0.0) continue;
        for (uint64_t iy = 0; iy < y.dim(); ++iy) {
            amps[scatter(ix, rel.x) | scatter(iy, rel.y)] = x[ix] * y[iy];
        }
    }
    return StateVector::normalized(std::move(amps));
}

/// Exact P(output = 1) on input x (x) y (x) |0...0>, conditioned on passing
/// any postselections.
inline double eval_relation_exact(const RelationCircuit &rel, const StateVector &x, const StateVector &y,
                                  const SimOptions &opt = {}) {
    rel.validate();
    OutcomeTree tree = enumerate_branches(rel.program, opt, joint_input(rel, x, y));
    double kept = 0.0, ones = 0.0;
    for (int i : tree.leaves()) {
        const auto &leaf = tree.node(i);
        if (leaf.rejected) continue;
        kept += leaf.probability;
        if (leaf.record[static_cast<size_t>(rel.output_bit)] == 1) {
            ones += leaf.probability;
        }
    }
    if (kept <= 0.0) {
        throw std::runtime_error("every branch fails postselection");
    }
    return ones / kept;
}

struct QNDConfig {
    double accept_threshold = 0.75;
    double reject_threshold = 0.25;
    size_t net_size = 64;
    std::optional<size_t> trials_per_witness;  // nullopt = exact mode
    uint64_t seed = 0;

    void validate() const {
        if (!(0.0 <= reject_threshold && reject_threshold < accept_threshold && accept_threshold <= 1.0)) {
            throw std::invalid_argument("thresholds must satisfy 0 <= reject < accept <= 1");
        }
        if (trials_per_witness && *trials_per_witness == 0) {
            throw std::invalid_argument("trials_per_witness must be positive");
        }
    }

    bool exact() const { return !trials_per_witness.has_value(); }
};

enum class Decision { Accept, Reject, Gap };

inline std::string_view decision_name(Decision d) {
    switch (d) {
        case Decision::Accept: return "Accept";
        case Decision::Reject: return "Reject";
        case Decision::Gap: return "Gap";
    }
    return "?";
}

/// A witness for the y register: a classical string or a general state.
struct Witness {
    StateVector state;
    std::optional<uint64_t> basis_index;

    std::string bits() const { return bit_string(*basis_index, state.num_qubits()); }
};

struct QNDVerdict {
    Decision decision = Decision::Reject;
    Witness best_witness;
    double best_probability = -1.0;
    size_t witnesses_tried = 0;
    std::optional<std::pair<double, double>> best_interval;  // sampled mode only
};

/// Wilson score interval at 99% confidence.
inline std::pair<double, double> wilson_interval(size_t successes, size_t trials) {
    constexpr double z = 2.5758293035489004;
    const double n = static_cast<double>(trials);
    const double phat = static_cast<double>(successes) / n;
    const double denom = 1.0 + z * z / n;
    const double center = (phat + z * z / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n));
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace detail {

enum class Band { Above, Below, Between };

struct WitnessScore {
    double probability;
    Band band;
    std::optional<std::pair<double, double>> interval;
};

inline WitnessScore score_witness(const RelationCircuit &rel, const StateVector &x, const StateVector &y,
                                  const QNDConfig &cfg, uint64_t witness_index) {
    if (cfg.exact()) {
        const double p = eval_relation_exact(rel, x, y);
        Band band = p > cfg.accept_threshold ? Band::Above : p < cfg.reject_threshold ? Band::Below : Band::Between;
        return {p, band, std::nullopt};
    }
    // x and y are re-prepared from their descriptions on every trial.
    Rng seeds = substream(cfg.seed, StreamTag::Bernoulli, witness_index);
    size_t ones = 0;
    const size_t trials = *cfg.trials_per_witness;
    for (size_t t = 0; t < trials; ++t) {
        auto run = run_sampled(rel.program, seeds(), {}, joint_input(rel, x, y));
        ones += run.record[static_cast<size_t>(rel.output_bit)];
    }
    auto ci = wilson_interval(ones, trials);
    Band band = ci.first > cfg.accept_threshold ? Band::Above
                : ci.second < cfg.reject_threshold ? Band::Below
                                                   : Band::Between;
    return {static_cast<double>(ones) / static_cast<double>(trials), band, ci};
}

/// Scores witnesses in order; stops at the first one above threshold.
template <typename NextWitness>
QNDVerdict decide(const RelationCircuit &rel, const StateVector &x, const QNDConfig &cfg, size_t count,
                  NextWitness &&next) {
    rel.validate();
    cfg.validate();
    QNDVerdict v;
    bool all_below = true;
    for (size_t i = 0; i < count; ++i) {
        Witness w = next(i);
        WitnessScore s = score_witness(rel, x, w.state, cfg, i);
        ++v.witnesses_tried;
        if (s.band == Band::Above || s.probability > v.best_probability) {
            v.best_probability = s.probability;
            v.best_witness = std::move(w);
            v.best_interval = s.interval;
        }
        if (s.band == Band::Above) {
            v.decision = Decision::Accept;
            return v;
        }
        all_below = all_below && s.band == Band::Below;
    }
    v.decision = all_below ? Decision::Reject : Decision::Gap;
    return v;
}

inline Witness basis_witness(int ny, uint64_t index) { return {StateVector::basis(ny, index), index}; }

}  // namespace detail

/// Witness at position i of the total-nondeterminism search: the 2^ny
/// classical strings first, then the seeded Haar net.
inline Witness total_qnd_witness(int ny, const QNDConfig &cfg, size_t i) {
    const uint64_t basis = uint64_t{1} << ny;
    if (i < basis) {
        return detail::basis_witness(ny, i);
    }
    Rng rng = substream(cfg.seed, StreamTag::Witness, i - basis);
    return {sample_haar_state(ny, rng), std::nullopt};
}

/// Searches y over classical strings plus a Haar net of cfg.net_size states.
inline QNDVerdict solve_total_qnd(const RelationCircuit &rel, const StateVector &x, const QNDConfig &cfg) {
    const int ny = rel.y.width();
    const size_t count = (size_t{1} << ny) + cfg.net_size;
    return detail::decide(rel, x, cfg, count, [&](size_t i) { return total_qnd_witness(ny, cfg, i); });
}

/// Classical-witness baseline: y ranges over the 2^max_y_bits basis strings.
inline QNDVerdict solve_classical_nd(const RelationCircuit &rel, const StateVector &x, int max_y_bits,
                                     const QNDConfig &cfg) {
    if (max_y_bits != rel.y.width()) {
        throw std::invalid_argument("max_y_bits must equal the y register width");
    }
    return detail::decide(rel, x, cfg, size_t{1} << max_y_bits,
                          [&](size_t i) { return detail::basis_witness(max_y_bits, i); });
}

/// Tries `samples` independent Haar witnesses.
inline QNDVerdict random_witness_search(const RelationCircuit &rel, const StateVector &x, size_t samples,
                                        const QNDConfig &cfg) {
    if (samples == 0) {
        throw std::invalid_argument("random_witness_search needs samples >= 1");
    }
    const int ny = rel.y.width();
    return detail::decide(rel, x, cfg, samples, [&](size_t i) {
        Rng rng = substream(cfg.seed, StreamTag::RandomWitness, i);
        return Witness{sample_haar_state(ny, rng), std::nullopt};
    });
}

namespace detail {

inline QubitRange parse_range(const std::string &tok, int line) {
    if (tok == "none") {
        return {};
    }
    const auto dots = tok.find("..");
    try {
        if (dots == std::string::npos) {
            int q = std::stoi(tok);
            return {q, q};
        }
        return {std::stoi(tok.substr(0, dots)), std::stoi(tok.substr(dots + 2))};
    } catch (const std::logic_error &) {
        throw ParseError(line, "bad register range '" + tok + "'");
    }
}

}  // namespace detail

/// Program text preceded by a header line `xreg a..b ; yreg c..d ; out cK`.
inline RelationCircuit parse_relation(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    std::string rest;
    std::optional<RelationCircuit> rel;
    while (std::getline(in, raw)) {
        ++line_no;
        if (rel) {
            rest += raw;
            rest += '\n';
            continue;
        }
        std::string body = raw.substr(0, raw.find('#'));
        auto tok = detail::tokenize_line(body);
        if (tok.empty()) {
            rest += '\n';
            continue;
        }
        RelationCircuit r;
        bool have_x = false, have_y = false, have_out = false;
        for (size_t i = 0; i < tok.size(); ++i) {
            if (tok[i] == ";") continue;
            if (i + 1 >= tok.size()) {
                throw ParseError(line_no, "header field '" + tok[i] + "' needs a value");
            }
            if (tok[i] == "xreg") {
                r.x = detail::parse_range(tok[++i], line_no);
                have_x = true;
            } else if (tok[i] == "yreg") {
                r.y = detail::parse_range(tok[++i], line_no);
                have_y = true;
            } else if (tok[i] == "out") {
                r.output_bit = detail::parse_cbit(tok[++i], line_no);
                have_out = true;
            } else {
                throw ParseError(line_no, "expected header 'xreg a..b ; yreg c..d ; out cK'");
            }
        }
        if (!have_x || !have_y || !have_out) {
            throw ParseError(line_no, "relation header needs xreg, yreg and out");
        }
        rel = std::move(r);
        rest += '\n';  // keep program line numbers aligned with the file
    }
    if (!rel) {
        throw ParseError(line_no, "missing relation header");
    }
    rel->program = parse_program(rest);
    rel->validate();
    return *rel;
}

inline nlohmann::json to_json(const Witness &w) {
    if (w.basis_index) {
        return {{"kind", "basis"}, {"bits", w.bits()}};
    }
    nlohmann::json j = to_json(w.state);
    j["kind"] = "state";
    return j;
}

inline nlohmann::json to_json(const QNDConfig &cfg) {
    nlohmann::json j{{"accept_threshold", cfg.accept_threshold},
                     {"reject_threshold", cfg.reject_threshold},
                     {"net_size", cfg.net_size},
                     {"seed", cfg.seed}};
    j["trials_per_witness"] = cfg.trials_per_witness ? nlohmann::json(*cfg.trials_per_witness) : nlohmann::json("exact");
    return j;
}

inline nlohmann::json to_json(const QNDVerdict &v, const QNDConfig &cfg) {
    nlohmann::json j{{"decision", decision_name(v.decision)},
                     {"best_probability", v.best_probability},
                     {"witness", v.witnesses_tried ? to_json(v.best_witness) : nlohmann::json(nullptr)},
                     {"witnesses_tried", v.witnesses_tried},
                     {"config", to_json(cfg)}};
    if (v.best_interval) {
        j["best_interval"] = {v.best_interval->first, v.best_interval->second};
    }
    return j;
}

}  // namespace qndlab
