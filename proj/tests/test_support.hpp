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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "qndlab/qram.hpp"
#include "qndlab/rng.hpp"

namespace qndlab::testing {

/// Upper-tail p-value of Pearson's chi-square statistic. Categories with
/// zero expected mass must have zero observations.
inline double chi_square_p(const std::vector<double> &observed, const std::vector<double> &probabilities) {
    double total = 0.0;
    for (double o : observed) total += o;
    double stat = 0.0;
    int cells = 0;
    for (size_t i = 0; i < observed.size(); ++i) {
        const double e = probabilities[i] * total;
        if (e <= 0.0) {
            if (observed[i] > 0.0) return 0.0;
            continue;
        }
        stat += (observed[i] - e) * (observed[i] - e) / e;
        ++cells;
    }
    if (cells < 2) return 1.0;
    boost::math::chi_squared dist(cells - 1);
    return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Random well-formed program: gates, measurements, conditional gates and
/// the occasional postselection, on n qubits.
inline Program random_program(uint64_t seed, int n, int length, bool allow_postselect = false) {
    Rng rng(seed);
    Program p;
    p.num_qubits = n;
    p.num_cbits = n;
    auto random_gate = [&]() {
        GateKind g = kAllGates[rng.below(kAllGates.size())];
        if (gate_arity(g) == 2 && n < 2) g = GateKind::H;
        GateOp op{g, {static_cast<int>(rng.below(static_cast<uint64_t>(n))), 0}};
        if (gate_arity(g) == 2) {
            do {
                op.qubits[1] = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
            } while (op.qubits[1] == op.qubits[0]);
        }
        return op;
    };
    for (int i = 0; i < length; ++i) {
        const auto r = rng.below(10);
        if (r < 6) {
            p.instructions.push_back(random_gate());
        } else if (r < 8) {
            p.instructions.push_back(Measure{static_cast<int>(rng.below(static_cast<uint64_t>(n))),
                                             static_cast<int>(rng.below(static_cast<uint64_t>(n)))});
        } else if (r < 9 || !allow_postselect) {
            p.instructions.push_back(CondGate{static_cast<int>(rng.below(static_cast<uint64_t>(n))),
                                              static_cast<int>(rng.below(2)), random_gate()});
        } else {
            p.instructions.push_back(Postselect{static_cast<int>(rng.below(static_cast<uint64_t>(n))),
                                                static_cast<int>(rng.below(2))});
        }
    }
    return p;
}

}  // namespace qndlab::testing
