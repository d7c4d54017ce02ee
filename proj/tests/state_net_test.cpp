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


#include "qndlab/state_net.hpp"

#include <algorithm>
#include <cmath>

#include "gtest/gtest.h"

using namespace qndlab;

namespace {
const double kSqrt2 = std::sqrt(2.0);
}

TEST(BuildRandomNet, construction) {
    auto single = build_random_net(2, 1, 0);
    EXPECT_EQ(single.size(), 1u);
    auto net = build_random_net(4, 100, 3);
    ASSERT_EQ(net.size(), 100u);
    for (const auto &p : net.points) {
        EXPECT_EQ(p.size(), 4u);
        EXPECT_NEAR(std::sqrt(norm_squared(p)), 1.0, 1e-9);
    }
    EXPECT_EQ(build_random_net(4, 100, 3).points, net.points);
    EXPECT_NE(build_random_net(4, 100, 4).points, net.points);
    EXPECT_THROW(build_random_net(4, 0, 3), std::invalid_argument);
}

TEST(BuildRandomNet, larger_nets_extend_smaller_ones) {
    auto small = build_random_net(3, 10, 8), big = build_random_net(3, 25, 8);
    EXPECT_TRUE(std::equal(small.points.begin(), small.points.end(), big.points.begin()));
}

TEST(CoverageFraction, extremes) {
    for (uint64_t d : {2u, 4u, 8u}) {
        for (uint64_t seed = 0; seed < 5; ++seed) {
            auto net = build_random_net(d, 1, seed);
            EXPECT_EQ(coverage_fraction(net, kSqrt2, 2000, seed + 100), 1.0);
            EXPECT_EQ(coverage_fraction(net, 0.0, 2000, seed + 100), 0.0);
        }
    }
}

// Independent oracle: fresh Haar pairs, counting |<u|v>| >= 1 - eps^2/2.
TEST(CoverageFraction, singleton_matches_cap_measure) {
    const double eps = 1.0;
    const int trials = 20000;
    Rng oracle_rng(0xC0FFEE);
    int hits = 0;
    for (int t = 0; t < trials; ++t) {
        auto u = sample_haar(2, oracle_rng), v = sample_haar(2, oracle_rng);
        hits += std::abs(inner_product(u, v)) >= 1.0 - eps * eps / 2.0;
    }
    const double oracle = static_cast<double>(hits) / trials;
    double mean = 0.0;
    const int nets = 5;
    for (uint64_t seed = 0; seed < nets; ++seed) {
        mean += coverage_fraction(build_random_net(2, 1, seed), eps, trials, seed + 50) / nets;
    }
    const double se = std::sqrt(oracle * (1 - oracle) / trials) * std::sqrt(1.0 + 1.0 / nets);
    EXPECT_NEAR(mean, oracle, 3 * se);
    EXPECT_NEAR(oracle, 0.75, 3 * std::sqrt(0.75 * 0.25 / trials));  // 1 - (1/2)^2 at d = 2
}

TEST(CoverageFraction, monotone_in_eps_and_size) {
    const uint64_t seed = 21;
    const std::vector<double> eps{0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, kSqrt2};
    double prev_size_row = -1;
    for (size_t m : {1u, 2u, 5u, 10u, 50u, 200u}) {
        auto net = build_random_net(4, m, seed);
        double prev = -1.0;
        std::vector<double> row;
        for (double e : eps) {
            double f = coverage_fraction(net, e, 3000, seed);
            EXPECT_GE(f, prev);
            prev = f;
            row.push_back(f);
        }
        EXPECT_GE(row[3], prev_size_row);
        prev_size_row = row[3];
    }
}

TEST(CoveringRadius, bounds) {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        EXPECT_LE(covering_radius_estimate(build_random_net(8, 1, seed), 1000, seed), kSqrt2 + 1e-9);
    }
    Net basis{2, {{1.0, 0.0}, {0.0, 1.0}}, 0};
    const double r = covering_radius_estimate(basis, 10000, 5);
    EXPECT_LT(r, kSqrt2);
    EXPECT_LE(r, std::sqrt(2.0 - std::sqrt(2.0)) + 1e-12);  // overlap with the nearer basis state >= 1/sqrt 2
}

TEST(CoveringRadius, median_non_increasing_in_net_size) {
    double previous = 10.0;
    for (size_t m : {1u, 4u, 16u, 64u}) {
        std::vector<double> estimates;
        for (uint64_t seed = 0; seed < 10; ++seed) {
            estimates.push_back(covering_radius_estimate(build_random_net(2, m, seed), 2000, seed + 1000));
        }
        std::nth_element(estimates.begin(), estimates.begin() + 5, estimates.end());
        EXPECT_LE(estimates[5], previous);
        previous = estimates[5];
    }
}

TEST(RequiredNetSize, agrees_with_direct_coverage) {
    const uint64_t seed = 6;
    auto m = required_net_size(4, 0.9, 0.95, 2000, seed, 10000);
    ASSERT_TRUE(m.has_value());
    EXPECT_GE(coverage_fraction(build_random_net(4, *m, seed), 0.9, 2000, seed), 0.95);
    if (*m > 1) {
        EXPECT_LT(coverage_fraction(build_random_net(4, *m - 1, seed), 0.9, 2000, seed), 0.95);
    }
    EXPECT_FALSE(required_net_size(8, 0.05, 0.99, 100, seed, 50).has_value());
}

TEST(RequiredNetSize, finer_eps_needs_far_larger_nets) {
    auto coarse = required_net_size(4, 0.9, 0.99, 10000, 1, 200000);
    auto fine = required_net_size(4, 0.3, 0.99, 10000, 1, 200000);
    ASSERT_TRUE(coarse && fine);
    EXPECT_GE(static_cast<double>(*fine), 10.0 * static_cast<double>(*coarse));
}

TEST(CoverageSweep, rows_and_json) {
    auto rows = coverage_sweep(2, {1, 3}, {0.5, 1.0}, 100, 9);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[3].size, 3u);
    EXPECT_EQ(rows[3].eps, 1.0);
    auto j = to_json(build_random_net(4, 3, 1));
    ASSERT_EQ(j.size(), 3u);
    EXPECT_EQ(j[0].at("n"), 2);
    EXPECT_EQ(j[0].at("re").size(), 4u);
}
