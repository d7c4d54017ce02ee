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
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "qndlab/hilbert.hpp"
#include "qndlab/random_source.hpp"
#include "qndlab/rng.hpp"

namespace qndlab {

/// Finite candidate cover of the unit sphere in C^d.
struct Net {
    uint64_t d = 0;
    std::vector<Amplitudes> points;
    uint64_t seed = 0;

    size_t size() const { return points.size(); }
};

/// Point i is Haar-sampled from its own substream, so a net of size M is a
/// prefix of the net of size M' > M built from the same seed.
inline Amplitudes net_point(uint64_t d, uint64_t seed, uint64_t index) {
    Rng rng = substream(seed, StreamTag::NetPoint, index);
    return sample_haar(d, rng);
}

inline Amplitudes coverage_test_state(uint64_t d, uint64_t seed, uint64_t trial) {
    Rng rng = substream(seed, StreamTag::CoverageTrial, trial);
    return sample_haar(d, rng);
}

inline Net build_random_net(uint64_t d, size_t size, uint64_t seed) {
    if (d == 0 || size == 0) {
        throw std::invalid_argument("net needs d >= 1 and at least one point");
    }
    Net net{d, {}, seed};
    net.points.reserve(size);
    for (size_t i = 0; i < size; ++i) {
        net.points.push_back(net_point(d, seed, i));
    }
    return net;
}

inline double nearest_distance(const Net &net, std::span<const Complex> psi) {
    double best_overlap = 0.0;
    for (const auto &p : net.points) {
        best_overlap = std::max(best_overlap, std::abs(inner_product(p, psi)));
    }
    return std::sqrt(std::clamp(2.0 - 2.0 * best_overlap, 0.0, 2.0));
}

struct CoverageStats {
    double fraction = 0.0;
    double radius_estimate = 0.0;
};

/// Both statistics over the same seeded test states.
inline CoverageStats measure_coverage(const Net &net, double eps, size_t trials, uint64_t seed) {
    if (net.points.empty()) {
        throw std::invalid_argument("net is empty");
    }
    if (trials == 0) {
        throw std::invalid_argument("coverage needs at least one trial");
    }
    if (eps < 0.0) {
        throw std::invalid_argument("eps must be non-negative");
    }
    size_t covered = 0;
    double radius = 0.0;
    for (size_t t = 0; t < trials; ++t) {
        const double dist = nearest_distance(net, coverage_test_state(net.d, seed, t));
        covered += dist <= eps;
        radius = std::max(radius, dist);
    }
    return {static_cast<double>(covered) / static_cast<double>(trials), radius};
}

inline double coverage_fraction(const Net &net, double eps, size_t trials, uint64_t seed) {
    return measure_coverage(net, eps, trials, seed).fraction;
}

/// Largest nearest-point distance seen; a lower bound on the covering radius.
inline double covering_radius_estimate(const Net &net, size_t trials, uint64_t seed) {
    return measure_coverage(net, std::sqrt(2.0), trials, seed).radius_estimate;
}

/// Smallest M such that the seed-extending random net of size M covers at
/// least target_fraction of the seeded test states at eps. Computed exactly
/// from each trial's first hit index, so it agrees with coverage_fraction on
/// build_random_net(d, M, seed). nullopt if max_size points do not suffice.
inline std::optional<size_t> required_net_size(uint64_t d, double eps, double target_fraction, size_t trials,
                                               uint64_t seed, size_t max_size) {
    if (trials == 0 || target_fraction <= 0.0 || target_fraction > 1.0) {
        throw std::invalid_argument("required_net_size needs trials >= 1 and target in (0, 1]");
    }
    std::vector<Amplitudes> points;
    std::vector<size_t> first_hit(trials, std::numeric_limits<size_t>::max());
    for (size_t t = 0; t < trials; ++t) {
        const Amplitudes psi = coverage_test_state(d, seed, t);
        for (size_t i = 0; i < max_size; ++i) {
            if (i == points.size()) {
                points.push_back(net_point(d, seed, i));
            }
            // Same comparison as nearest_distance(...) <= eps.
            const double overlap = std::abs(inner_product(points[i], psi));
            if (std::sqrt(std::clamp(2.0 - 2.0 * overlap, 0.0, 2.0)) <= eps) {
                first_hit[t] = i;
                break;
            }
        }
    }
    std::sort(first_hit.begin(), first_hit.end());
    auto need = static_cast<size_t>(std::ceil(target_fraction * static_cast<double>(trials) - 1e-9));
    need = std::clamp<size_t>(need, 1, trials);
    const size_t hit = first_hit[need - 1];
    if (hit == std::numeric_limits<size_t>::max()) {
        return std::nullopt;
    }
    return hit + 1;
}

struct CoverageRow {
    uint64_t d;
    size_t size;
    double eps;
    size_t trials;
    double fraction;
    double radius_estimate;
    uint64_t seed;
};

inline std::vector<CoverageRow> coverage_sweep(uint64_t d, const std::vector<size_t> &sizes,
                                               const std::vector<double> &epsilons, size_t trials, uint64_t seed) {
    std::vector<CoverageRow> rows;
    for (size_t m : sizes) {
        const Net net = build_random_net(d, m, seed);
        for (double eps : epsilons) {
            auto stats = measure_coverage(net, eps, trials, seed);
            rows.push_back({d, m, eps, trials, stats.fraction, stats.radius_estimate, seed});
        }
    }
    return rows;
}

inline nlohmann::json to_json(const Net &net) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto &p : net.points) {
        nlohmann::json j = amplitudes_to_json(p);
        j["d"] = net.d;
        if (is_power_of_two(net.d)) {
            j["n"] = std::countr_zero(net.d);
        }
        points.push_back(std::move(j));
    }
    return points;
}

}  // namespace qndlab
