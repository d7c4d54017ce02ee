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
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "qndlab/complexity.hpp"
#include "qndlab/hilbert.hpp"
#include "qndlab/qnd.hpp"
#include "qndlab/qram.hpp"
#include "qndlab/random_source.hpp"
#include "qndlab/rng.hpp"
#include "qndlab/state_net.hpp"

namespace qndlab {

/// Bad experiment description; maps to exit code 1.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
    std::string kind;
    std::map<std::string, std::string> parameters;
    uint64_t seed = 0;
    std::string output_path;
    std::string format = "json";
};

inline const std::set<std::string> &experiment_kinds() {
    static const std::set<std::string> kinds{"haar-mixed", "kcopy-exact", "kcopy-sample",
                                             "net-coverage", "complexity", "qnd"};
    return kinds;
}

namespace detail {

inline std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Flat `key = value` lines grouped under `[section]` headers. Keys in
/// [experiment] (kind, seed, out, format) fill the spec itself; keys in any
/// other section become parameters.
inline ExperimentSpec parse_config(std::string_view text, ExperimentSpec spec = {}) {
    std::istringstream in{std::string(text)};
    std::string raw, section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = detail::trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ValidationError("config line " + std::to_string(line_no) + ": unterminated section header");
            }
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (section == "experiment") {
            if (key == "kind") {
                spec.kind = value;
            } else if (key == "seed") {
                try {
                    spec.seed = std::stoull(value);
                } catch (const std::logic_error &) {
                    throw ValidationError("config line " + std::to_string(line_no) + ": seed must be an integer");
                }
            } else if (key == "out") {
                spec.output_path = value;
            } else if (key == "format") {
                spec.format = value;
            } else {
                throw ValidationError("config line " + std::to_string(line_no) + ": unknown experiment key '" + key + "'");
            }
        } else {
            spec.parameters[key] = value;
        }
    }
    return spec;
}

/// Typed access to the parameter map with field-level error messages.
class Params {
  public:
    explicit Params(const ExperimentSpec &spec) : spec_(spec) {}

    bool has(const std::string &key) const { return spec_.parameters.count(key) > 0; }

    std::string str(const std::string &key, std::optional<std::string> fallback = std::nullopt) const {
        auto it = spec_.parameters.find(key);
        if (it == spec_.parameters.end()) {
            if (fallback) return *fallback;
            throw ValidationError(spec_.kind + ": missing required parameter '" + key + "'");
        }
        return it->second;
    }

    int64_t integer(const std::string &key, std::optional<int64_t> fallback = std::nullopt, int64_t lo = 0,
                    int64_t hi = std::numeric_limits<int64_t>::max()) const {
        if (!has(key) && fallback) return *fallback;
        const std::string v = str(key);
        int64_t out = 0;
        try {
            size_t used = 0;
            out = std::stoll(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::logic_error &) {
            throw ValidationError(spec_.kind + ": parameter '" + key + "' must be an integer, got '" + v + "'");
        }
        if (out < lo || out > hi) {
            throw ValidationError(spec_.kind + ": parameter '" + key + "' = " + v + " outside [" + std::to_string(lo) +
                                  ", " + std::to_string(hi) + "]");
        }
        return out;
    }

    double real(const std::string &key, std::optional<double> fallback = std::nullopt) const {
        if (!has(key) && fallback) return *fallback;
        return parse_real(key, str(key));
    }

    std::vector<double> real_list(const std::string &key) const {
        std::vector<double> out;
        for (const auto &item : split(str(key))) out.push_back(parse_real(key, item));
        return out;
    }

    std::vector<size_t> size_list(const std::string &key) const {
        std::vector<size_t> out;
        for (const auto &item : split(str(key))) {
            try {
                size_t used = 0;
                long long v = std::stoll(item, &used);
                if (used != item.size() || v < 1) throw std::invalid_argument(item);
                out.push_back(static_cast<size_t>(v));
            } catch (const std::logic_error &) {
                throw ValidationError(spec_.kind + ": parameter '" + key + "' needs positive integers, got '" + item + "'");
            }
        }
        return out;
    }

    static std::vector<std::string> split(const std::string &s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = detail::trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

  private:
    double parse_real(const std::string &key, const std::string &v) const {
        try {
            size_t used = 0;
            double out = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::logic_error &) {
            throw ValidationError(spec_.kind + ": parameter '" + key + "' must be a number, got '" + v + "'");
        }
    }

    const ExperimentSpec &spec_;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Report body is a pure function of (spec, seed); `meta` holds the
/// timestamp and timings and is the only part allowed to vary between runs.
struct ReportDocument {
    nlohmann::json body;
    nlohmann::json meta = nlohmann::json::object();
    std::optional<Table> table;
};

inline std::string csv_field(const std::string &s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string to_csv(const Table &t) {
    std::string out;
    auto row = [&](const std::vector<std::string> &cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += csv_field(cells[i]);
        }
        out += "\r\n";
    };
    row(t.header);
    for (const auto &r : t.rows) row(r);
    return out;
}

/// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
    std::array<char, 32> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline nlohmann::json report_json(const ReportDocument &doc) {
    nlohmann::json j = doc.body;
    j["meta"] = doc.meta;
    return j;
}

/// Writes via a temporary sibling file and rename, so readers never see a
/// partial report.
inline void write_report(const ReportDocument &doc, const std::filesystem::path &path, const std::string &format) {
    std::string payload;
    if (format == "json") {
        payload = report_json(doc).dump(2) + "\n";
    } else if (format == "csv") {
        if (!doc.table) {
            throw ValidationError("this report has no tabular form");
        }
        payload = to_csv(*doc.table);
    } else {
        throw ValidationError("unknown format '" + format + "' (expected json or csv)");
    }
    const auto parent = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
    if (!std::filesystem::is_directory(parent)) {
        throw std::runtime_error("output directory does not exist: " + parent.string());
    }
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        }
        out << payload;
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("cannot move report into place at " + path.string());
    }
}

inline std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot read file '" + path + "'");
    }
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

namespace detail {

/// Preset name (zero, one, plus, bell, ghz3) or path to a state JSON file.
inline StateVector load_target(const std::string &spec) {
    const double r = 1.0 / std::sqrt(2.0);
    if (spec == "zero") return StateVector::zero(1);
    if (spec == "one") return StateVector::basis(1, 1);
    if (spec == "plus") return StateVector::from_amplitudes({r, r});
    if (spec == "bell") return StateVector::from_amplitudes({r, 0.0, 0.0, r});
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(spec));
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError("target file '" + spec + "' is not valid JSON: " + e.what());
    }
    try {
        return state_from_json(j);
    } catch (const std::exception &e) {
        throw ValidationError("target file '" + spec + "': " + e.what());
    }
}

inline ReportDocument run_haar_mixed(const ExperimentSpec &spec, const Params &p) {
    const int n = static_cast<int>(p.integer("n", std::nullopt, 1, 10));
    const auto samples = static_cast<size_t>(p.integer("samples", 200000, 1));
    const auto shots = static_cast<size_t>(p.integer("shots", 100000, 1));
    const uint64_t dim = uint64_t{1} << n;
    DensityAccumulator acc(dim);
    for (size_t i = 0; i < samples; ++i) {
        Rng rng = substream(spec.seed, StreamTag::Experiment, i);
        acc.add(sample_haar(dim, rng));
    }
    const Eigen::MatrixXcd rho = acc.mean();
    const double dev = max_entry_deviation(rho, DensityMatrix::maximally_mixed(dim).matrix());
    std::vector<size_t> counts(dim, 0);
    for (size_t s = 0; s < shots; ++s) {
        Rng rng = substream(spec.seed, StreamTag::Shot, s);
        Amplitudes psi = sample_haar(dim, rng);
        double u = rng.uniform(), acc_p = 0.0;
        uint64_t outcome = dim - 1;
        for (uint64_t b = 0; b < dim; ++b) {
            acc_p += std::norm(psi[b]);
            if (u < acc_p) {
                outcome = b;
                break;
            }
        }
        ++counts[outcome];
    }
    double tv = 0.0;
    Table table{{"outcome", "count", "frequency"}, {}};
    for (uint64_t b = 0; b < dim; ++b) {
        const double f = static_cast<double>(counts[b]) / static_cast<double>(shots);
        tv += 0.5 * std::abs(f - 1.0 / static_cast<double>(dim));
        table.rows.push_back({bit_string(b, n),
                              std::to_string(counts[b]), format_number(f)});
    }
    ReportDocument doc;
    doc.body["result"] = {{"dim", dim},
                          {"samples", samples},
                          {"max_entry_deviation", dev},
                          {"shots", shots},
                          {"tv_from_uniform", tv},
                          {"counts", counts}};
    doc.table = std::move(table);
    return doc;
}

inline ReportDocument run_kcopy_exact(const ExperimentSpec &, const Params &p) {
    const auto d = static_cast<uint64_t>(p.integer("d", std::nullopt, 1));
    const auto k = static_cast<uint32_t>(p.integer("k", std::nullopt, 1, 16));
    DensityMatrix rho = k_copy_density_exact(d, k);
    DensityMatrix sym = symmetric_projector_density(d, k);
    ReportDocument doc;
    doc.body["result"] = {{"d", d},
                          {"k", k},
                          {"blocks", multiset_count(d, k).str()},
                          {"block_probability", block_probability(MultisetLabel::from_pairs(d, {{1, k}}))},
                          {"max_deviation_from_symmetric_projector", max_entry_deviation(rho.matrix(), sym.matrix())},
                          {"rho", to_json(rho)}};
    Table table{{"row", "col", "re", "im"}, {}};
    for (size_t i = 0; i < rho.dim(); ++i) {
        for (size_t j = 0; j < rho.dim(); ++j) {
            table.rows.push_back({std::to_string(i), std::to_string(j), format_number(rho(i, j).real()),
                                  format_number(rho(i, j).imag())});
        }
    }
    doc.table = std::move(table);
    return doc;
}

inline ReportDocument run_kcopy_sample(const ExperimentSpec &spec, const Params &p) {
    const auto d = static_cast<uint64_t>(p.integer("d", std::nullopt, 1));
    const auto k = static_cast<uint32_t>(p.integer("k", std::nullopt, 1, 64));
    const auto samples = static_cast<size_t>(p.integer("samples", 10000, 1));
    std::string mode = p.str("mode", "auto");
    if (mode == "auto") {
        try {
            tensor_dim(d, k, kDefaultTensorCap);
            mode = "vector";
        } catch (const std::invalid_argument &) {
            mode = "label";
        }
    }
    if (mode != "vector" && mode != "label") {
        throw ValidationError("kcopy-sample: mode must be auto, vector or label");
    }
    ReportDocument doc;
    nlohmann::json result{{"d", d}, {"k", k}, {"samples", samples}, {"mode", mode}};
    Table table{{"draw", "rank", "label"}, {}};
    std::map<std::string, size_t> rank_counts;
    std::optional<DensityAccumulator> acc;
    if (mode == "vector") {
        acc.emplace(tensor_dim(d, k, kDefaultTensorCap));
    }
    for (size_t i = 0; i < samples; ++i) {
        Rng rng = substream(spec.seed, StreamTag::Experiment, i);
        MultisetLabel label = sample_multiset_uniform(d, k, rng);
        const std::string rank = multiset_rank(label).str();
        ++rank_counts[rank];
        if (acc) {
            acc->add(block_state(label).vector);
        }
        if (i < 20) {
            table.rows.push_back({std::to_string(i), rank, to_json(label).dump()});
        }
    }
    result["labels_total"] = multiset_count(d, k).str();
    result["distinct_labels_seen"] = rank_counts.size();
    if (acc) {
        result["max_deviation_from_exact"] = max_entry_deviation(acc->mean(), k_copy_density_exact(d, k).matrix());
    }
    doc.body["result"] = std::move(result);
    doc.table = std::move(table);
    return doc;
}

inline ReportDocument run_net_coverage(const ExperimentSpec &spec, const Params &p) {
    const auto d = static_cast<uint64_t>(p.integer("d", std::nullopt, 1, 1 << 16));
    const auto sizes = p.size_list("net-size");
    const auto epsilons = p.real_list("eps");
    for (double e : epsilons) {
        if (e < 0.0) throw ValidationError("net-coverage: eps values must be non-negative");
    }
    const auto trials = static_cast<size_t>(p.integer("trials", 10000, 1));
    auto rows = coverage_sweep(d, sizes, epsilons, trials, spec.seed);
    Table table{{"d", "M", "eps", "trials", "fraction", "radius_estimate", "seed"}, {}};
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto &r : rows) {
        table.rows.push_back({std::to_string(r.d), std::to_string(r.size), format_number(r.eps), std::to_string(r.trials),
                              format_number(r.fraction), format_number(r.radius_estimate), std::to_string(r.seed)});
        jrows.push_back({{"d", r.d},
                         {"M", r.size},
                         {"eps", r.eps},
                         {"trials", r.trials},
                         {"fraction", r.fraction},
                         {"radius_estimate", r.radius_estimate},
                         {"seed", r.seed}});
    }
    ReportDocument doc;
    doc.body["result"] = {{"rows", std::move(jrows)}};
    if (p.has("target-fraction")) {
        const double target = p.real("target-fraction");
        const auto max_size = static_cast<size_t>(p.integer("max-net-size", 100000, 1));
        nlohmann::json req = nlohmann::json::object();
        for (double e : epsilons) {
            auto m = required_net_size(d, e, target, trials, spec.seed, max_size);
            req[format_number(e)] = m ? nlohmann::json(*m) : nlohmann::json(nullptr);
        }
        doc.body["result"]["required_net_size"] = std::move(req);
    }
    doc.table = std::move(table);
    return doc;
}

inline ReportDocument run_complexity(const ExperimentSpec &, const Params &p) {
    const StateVector target = load_target(p.str("target"));
    GateSet gs = GateSet::from_names(Params::split(p.str("gates", "h,t,cnot")),
                                     static_cast<int>(p.integer("max-qubits", 4, 1, 8)));
    gs.ancilla_qubits = static_cast<int>(p.integer("ancilla", 0, 0, 2));
    gs.allow_ancilla = gs.ancilla_qubits > 0;
    const double eps = p.real("eps", 1e-3);
    if (eps <= 0.0) throw ValidationError("complexity: eps must be positive");
    const int max_len = static_cast<int>(p.integer("max-len", 6, 0, 64));
    const int max_meas = static_cast<int>(p.integer("max-meas", 2, 0, 16));
    ComplexityReport r = compare_complexity(target, gs, eps, max_len, max_meas);
    ReportDocument doc;
    doc.body["result"] = to_json(r);
    doc.meta["search_wall_seconds"] = r.stats.wall_seconds;
    auto cell = [](const std::optional<int> &v) { return v ? std::to_string(*v) : std::string(); };
    doc.table = Table{{"deterministic_length", "nondet_length", "nondet_cost_bits", "deterministic_program_bytes",
                       "nondet_program_bytes"},
                      {{cell(r.deterministic_length), cell(r.nondet_length), format_number(r.nondet_cost_bits),
                        std::to_string(r.deterministic_program_bytes()), std::to_string(r.nondet_program_bytes())}}};
    return doc;
}

/// `bits` string such as 01, a state JSON file, or default all-zero.
inline StateVector load_x(const Params &p, int width) {
    if (!p.has("x")) {
        return StateVector::zero(width);
    }
    const std::string v = p.str("x");
    if (!v.empty() && v.find_first_not_of("01") == std::string::npos) {
        if (static_cast<int>(v.size()) != width) {
            throw ValidationError("qnd: x bit string width does not match xreg");
        }
        return StateVector::basis(width, std::stoull(v, nullptr, 2));
    }
    return load_target(v);
}

inline ReportDocument run_qnd(const ExperimentSpec &spec, const Params &p) {
    RelationCircuit rel;
    const std::string path = p.str("program");
    try {
        rel = parse_relation(read_file(path));
    } catch (const ParseError &e) {
        throw ValidationError(path + ": " + e.what());
    }
    QNDConfig cfg;
    cfg.seed = spec.seed;
    cfg.accept_threshold = p.real("accept", 0.75);
    cfg.reject_threshold = p.real("reject", 0.25);
    cfg.net_size = static_cast<size_t>(p.integer("net-size", 64, 0));
    if (p.has("trials")) {
        cfg.trials_per_witness = static_cast<size_t>(p.integer("trials", std::nullopt, 1));
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument &e) {
        throw ValidationError(std::string("qnd: ") + e.what());
    }
    const StateVector x = load_x(p, rel.x.width());
    const std::string mode = p.str("mode", "total");
    QNDVerdict v;
    if (mode == "total") {
        v = solve_total_qnd(rel, x, cfg);
    } else if (mode == "classical") {
        v = solve_classical_nd(rel, x, rel.y.width(), cfg);
    } else if (mode == "random") {
        v = random_witness_search(rel, x, static_cast<size_t>(p.integer("samples", 64, 1)), cfg);
    } else {
        throw ValidationError("qnd: mode must be total, classical or random");
    }
    ReportDocument doc;
    doc.body["result"] = to_json(v, cfg);
    doc.body["result"]["mode"] = mode;
    doc.table = Table{{"decision", "best_probability", "witnesses_tried"},
                      {{std::string(decision_name(v.decision)), format_number(v.best_probability),
                        std::to_string(v.witnesses_tried)}}};
    return doc;
}

}  // namespace detail

/// Validates and dispatches to the owning module.
inline ReportDocument run_experiment(const ExperimentSpec &spec) {
    if (!experiment_kinds().count(spec.kind)) {
        throw ValidationError("unknown experiment kind '" + spec.kind + "'");
    }
    if (spec.format != "json" && spec.format != "csv") {
        throw ValidationError("format must be json or csv");
    }
    const auto t0 = std::chrono::steady_clock::now();
    Params p(spec);
    ReportDocument doc;
    if (spec.kind == "haar-mixed") doc = detail::run_haar_mixed(spec, p);
    else if (spec.kind == "kcopy-exact") doc = detail::run_kcopy_exact(spec, p);
    else if (spec.kind == "kcopy-sample") doc = detail::run_kcopy_sample(spec, p);
    else if (spec.kind == "net-coverage") doc = detail::run_net_coverage(spec, p);
    else if (spec.kind == "complexity") doc = detail::run_complexity(spec, p);
    else doc = detail::run_qnd(spec, p);
    doc.body["kind"] = spec.kind;
    doc.body["seed"] = spec.seed;
    doc.body["params"] = spec.parameters;
    const auto now = std::chrono::system_clock::now();
    doc.meta["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    doc.meta["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return doc;
}

}  // namespace qndlab
