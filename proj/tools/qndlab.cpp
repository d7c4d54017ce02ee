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


#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "qndlab/harness.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// Flags whose values land in the parameter map under the same key.
const char *const kParamFlags[] = {"d", "k", "n", "samples", "shots", "eps", "net-size", "trials", "max-len",
                                   "max-meas", "program", "target", "gates", "ancilla", "mode", "x",
                                   "accept", "reject", "target-fraction", "max-net-size", "max-qubits"};

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"qndlab: quantum randomness and nondeterminism experiments"};
    std::string kind;
    std::optional<uint64_t> seed;
    std::string out, format, config;
    std::map<std::string, std::string> flag_values;

    app.add_option("kind", kind, "haar-mixed | kcopy-exact | kcopy-sample | net-coverage | complexity | qnd (may come from --config)");
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("--out", out, "report path (default: stdout)");
    app.add_option("--format", format, "json | csv");
    app.add_option("--config", config, "key=value config file; flags override its values");
    for (const char *name : kParamFlags) {
        app.add_option(std::string("--") + name, flag_values[name]);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : kExitValidation;
    }

    try {
        qndlab::ExperimentSpec spec;
        if (!config.empty()) {
            spec = qndlab::parse_config(qndlab::read_file(config));
        }
        if (!kind.empty()) spec.kind = kind;
        if (spec.kind.empty()) throw qndlab::ValidationError("experiment kind is required");
        if (seed) spec.seed = *seed;
        if (!out.empty()) spec.output_path = out;
        if (!format.empty()) spec.format = format;
        for (const char *name : kParamFlags) {
            if (app.count(std::string("--") + name) > 0) {
                spec.parameters[name] = flag_values[name];
            }
        }
        qndlab::ReportDocument doc = qndlab::run_experiment(spec);
        if (spec.output_path.empty()) {
            if (spec.format == "csv") {
                if (!doc.table) throw qndlab::ValidationError("this report has no tabular form");
                std::cout << qndlab::to_csv(*doc.table);
            } else {
                std::cout << qndlab::report_json(doc).dump(2) << "\n";
            }
        } else {
            qndlab::write_report(doc, spec.output_path, spec.format);
        }
    } catch (const qndlab::ValidationError &e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
