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


#include "qndlab/random_source.hpp"

#include <chrono>
#include <cmath>
#include <map>

#include "gtest/gtest.h"
#include "test_support.hpp"

using namespace qndlab;
using qndlab::testing::chi_square_p;

namespace {

/// Monte Carlo estimate of E[prod |psi_j|^{2 m_j}] with its standard error.
std::pair<double, double> monte_carlo_moment(const std::vector<uint32_t> &m, int samples, uint64_t seed) {
    Rng rng(seed);
    double sum = 0.0, sum2 = 0.0;
    for (int s = 0; s < samples; ++s) {
        auto psi = sample_haar(m.size(), rng);
        double v = 1.0;
        for (size_t j = 0; j < m.size(); ++j) v *= std::pow(std::norm(psi[j]), m[j]);
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / samples;
    return {mean, std::sqrt((sum2 / samples - mean * mean) / samples)};
}

Eigen::MatrixXcd random_unitary(int dim, Rng &rng) {
    Eigen::MatrixXcd g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = Complex(rng.normal(), rng.normal());
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    return qr.householderQ();
}

}  // namespace

TEST(Combinatorics, binomials) {
    EXPECT_EQ(binomial(5, 2), 10);
    EXPECT_EQ(binomial(3, 5), 0);
    EXPECT_EQ(multiset_count(3, 2), 6);
    EXPECT_EQ(multiset_count(1000000, 3), BigInt("166667166667000000"));
}

TEST(MultisetLabel, construction_and_invariants) {
    auto l = MultisetLabel::from_multiplicities({2, 0, 1});
    EXPECT_EQ(l.d(), 3u);
    EXPECT_EQ(l.k(), 3u);
    EXPECT_EQ(l.sorted_sequence(), (std::vector<uint64_t>{1, 1, 3}));
    EXPECT_EQ(l.multiplicity(2), 0u);
    EXPECT_EQ(MultisetLabel::from_sequence(3, {3, 1, 1}), l);
    EXPECT_THROW(MultisetLabel::from_multiplicities({0, 0}), std::invalid_argument);
    EXPECT_THROW(MultisetLabel::from_sequence(2, {3}), std::out_of_range);
    EXPECT_THROW(MultisetLabel::from_multiplicities({}), std::invalid_argument);
}

TEST(MomentEvenPowers, trivial_value) {
    EXPECT_EQ(moment_even_powers_exact(MultisetLabel::from_multiplicities({1, 0})), BigRational(1, 2));
}

TEST(MomentEvenPowers, closed_form_agrees_with_monte_carlo) {
    struct Case {
        std::vector<uint32_t> m;
        BigRational expected;
    };
    // Expected values from the Monte Carlo oracle, recognized as these rationals.
    for (const auto &c : {Case{{2, 0}, BigRational(1, 3)}, Case{{1, 1, 0}, BigRational(1, 12)}}) {
        auto label = MultisetLabel::from_multiplicities(c.m);
        EXPECT_EQ(moment_even_powers_exact(label), c.expected);
        auto [mean, se] = monte_carlo_moment(c.m, 1000000, 99);
        EXPECT_NEAR(mean, moment_even_powers(label), 3 * se);
    }
}

TEST(BlockProbability, examples) {
    EXPECT_EQ(block_probability_exact(MultisetLabel::from_multiplicities({1, 1})), BigRational(1, 3));
    EXPECT_EQ(block_probability_exact(MultisetLabel::from_multiplicities({2, 0})), BigRational(1, 3));
    EXPECT_EQ(permutation_count(MultisetLabel::from_multiplicities({1, 1})), 2);
}

TEST(BlockProbability, uniform_over_labels_and_normalized) {
    for (uint64_t d = 1; d <= 4; ++d) {
        for (uint32_t k = 1; k <= 4; ++k) {
            const double expected = 1.0 / multiset_count(d, k).convert_to<double>();
            BigRational total = 0;
            for (const auto &label : enumerate_labels(d, k)) {
                EXPECT_NEAR(block_probability(label), expected, 1e-12);
                total += block_probability_exact(label);
            }
            EXPECT_EQ(total, 1);
        }
    }
}

TEST(BlockProbability, huge_dimension_does_not_overflow) {
    auto label = MultisetLabel::from_pairs(uint64_t{1} << 40, {{5, 2}, {77, 1}});
    const double d = std::ldexp(1.0, 40);
    EXPECT_NEAR(moment_even_powers(label) * d * (d + 1) * (d + 2) / 2.0, 1.0, 1e-12);
    EXPECT_NEAR(block_probability(label) * multiset_count(uint64_t{1} << 40, 3).convert_to<double>(), 1.0, 1e-12);
}

TEST(KCopyDensity, single_copy_is_maximally_mixed) {
    EXPECT_LT(max_entry_deviation(k_copy_density_exact(2, 1).matrix(), DensityMatrix::maximally_mixed(2).matrix()),
              1e-15);
}

TEST(KCopyDensity, two_qubit_matrix_matches_hand_projector) {
    Eigen::MatrixXcd expected(4, 4);
    const double a = 1.0 / 3, b = 1.0 / 6;
    expected << a, 0, 0, 0, 0, b, b, 0, 0, b, b, 0, 0, 0, 0, a;
    EXPECT_LT(max_entry_deviation(k_copy_density_exact(2, 2).matrix(), expected), 1e-12);
}

TEST(KCopyDensity, block_and_projector_constructions_agree) {
    for (uint64_t d = 1; d <= 3; ++d) {
        for (uint32_t k = 1; k <= 3; ++k) {
            auto blocks = k_copy_density_exact(d, k);
            EXPECT_NEAR(blocks.matrix().trace().real(), 1.0, 1e-12);
            EXPECT_LT(max_entry_deviation(blocks.matrix(), symmetric_projector_density(d, k).matrix()), 1e-12);
        }
    }
}

TEST(KCopyDensity, commutes_with_copy_transpositions) {
    for (uint64_t d = 2; d <= 3; ++d) {
        for (uint32_t k = 2; k <= 3; ++k) {
            const Eigen::MatrixXcd rho = k_copy_density_exact(d, k).matrix();
            for (size_t i = 0; i < k; ++i) {
                for (size_t j = i + 1; j < k; ++j) {
                    std::vector<size_t> perm(k);
                    std::iota(perm.begin(), perm.end(), 0);
                    std::swap(perm[i], perm[j]);
                    const Eigen::MatrixXcd p = copy_permutation_matrix(d, perm).cast<Complex>();
                    EXPECT_LT((p * rho - rho * p).cwiseAbs().maxCoeff(), 1e-10);
                }
            }
        }
    }
}

TEST(KCopyDensity, monte_carlo_tensor_power_converges) {
    for (uint64_t d = 2; d <= 3; ++d) {
        for (uint32_t k = 1; k <= 2; ++k) {
            Rng rng(1000 + d * 10 + k);
            DensityAccumulator acc(tensor_dim(d, k, kDefaultTensorCap));
            for (int s = 0; s < 100000; ++s) acc.add(tensor_power(sample_haar(d, rng), k));
            EXPECT_LT(max_entry_deviation(acc.mean(), k_copy_density_exact(d, k).matrix()), 5e-3);
        }
    }
}

TEST(KCopyDensity, cap_enforced) {
    EXPECT_THROW(k_copy_density_exact(5, 6), std::invalid_argument);
    EXPECT_THROW(block_state(MultisetLabel::from_pairs(100, {{1, 2}}), 1000), std::invalid_argument);
}

TEST(Unranking, lexicographic_order) {
    EXPECT_EQ(multiset_unrank(3, 2, 0).sorted_sequence(), (std::vector<uint64_t>{1, 1}));
    EXPECT_EQ(multiset_unrank(3, 2, 1).sorted_sequence(), (std::vector<uint64_t>{1, 2}));
    EXPECT_EQ(multiset_unrank(3, 2, 3).sorted_sequence(), (std::vector<uint64_t>{2, 2}));
    EXPECT_EQ(multiset_unrank(3, 2, 5).sorted_sequence(), (std::vector<uint64_t>{3, 3}));
    EXPECT_THROW(multiset_unrank(3, 2, 6), std::out_of_range);
}

TEST(Unranking, rank_is_inverse_and_order_preserving) {
    for (uint64_t d = 1; d <= 6; ++d) {
        for (uint32_t k = 1; k <= 4; ++k) {
            std::vector<uint64_t> previous;
            const BigInt count = multiset_count(d, k);
            for (BigInt r = 0; r < count; ++r) {
                auto label = multiset_unrank(d, k, r);
                EXPECT_EQ(multiset_rank(label), r);
                auto seq = label.sorted_sequence();
                EXPECT_TRUE(std::is_sorted(seq.begin(), seq.end()));
                EXPECT_LT(previous, seq);
                previous = seq;
            }
        }
    }
}

TEST(Unranking, beyond_64_bit_ranks) {
    const uint64_t d = uint64_t{1} << 50;
    const uint32_t k = 6;
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        auto label = sample_multiset_uniform(d, k, rng);
        EXPECT_EQ(label.k(), k);
        EXPECT_EQ(multiset_unrank(d, k, multiset_rank(label)), label);
    }
    EXPECT_GT(multiset_count(d, k), BigInt(std::numeric_limits<uint64_t>::max()));
}

TEST(SampleMultisetUniform, chi_square_uniform_d2_k2) {
    std::vector<double> counts(3, 0.0);
    for (uint64_t seed = 0; seed < 100000; ++seed) {
        counts[multiset_rank(sample_multiset_uniform(2, 2, seed)).convert_to<size_t>()] += 1;
    }
    EXPECT_GT(chi_square_p(counts, std::vector<double>(3, 1.0 / 3)), 0.001);
    for (double c : counts) EXPECT_NEAR(c / 100000, 1.0 / 3, 3 * std::sqrt(2.0 / 9 / 100000));
}

TEST(SampleMultisetUniform, huge_d_label_only) {
    const auto t0 = std::chrono::steady_clock::now();
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        auto label = sample_multiset_uniform(1000000, 3, seed);
        EXPECT_EQ(label.k(), 3u);
        EXPECT_LE(label.pairs().size(), 3u);
    }
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1.0);
}

TEST(BlockState, examples) {
    const double r = 1.0 / std::sqrt(2.0);
    auto b11 = block_state(MultisetLabel::from_multiplicities({1, 1}));
    EXPECT_EQ(b11.vector, (Amplitudes{0.0, r, r, 0.0}));
    auto b20 = block_state(MultisetLabel::from_multiplicities({2, 0}));
    EXPECT_EQ(b20.vector, (Amplitudes{1.0, 0.0, 0.0, 0.0}));
    auto b111 = block_state(MultisetLabel::from_multiplicities({1, 1, 1}));
    int support = 0;
    for (uint64_t i = 0; i < b111.vector.size(); ++i) {
        if (b111.vector[i] != 0.0) {
            ++support;
            EXPECT_NEAR(b111.vector[i].real(), 1.0 / std::sqrt(6.0), 1e-15);
            auto seq = index_sequence(3, 3, i);
            std::sort(seq.begin(), seq.end());
            EXPECT_EQ(seq, (std::vector<uint64_t>{1, 2, 3}));
        }
    }
    EXPECT_EQ(support, 6);
}

TEST(BlockState, support_is_exactly_the_permutation_class) {
    for (const auto &label : enumerate_labels(3, 3)) {
        auto b = block_state(label);
        EXPECT_NEAR(norm_squared(b.vector), 1.0, 1e-12);
        for (uint64_t i = 0; i < b.vector.size(); ++i) {
            const bool in_class = MultisetLabel::from_sequence(3, index_sequence(3, 3, i)) == label;
            EXPECT_EQ(b.vector[i] != 0.0, in_class);
            if (in_class) EXPECT_GT(b.vector[i].real(), 0.0);
        }
    }
}

TEST(KCopySource, exact_expectation_over_labels) {
    for (uint64_t d = 1; d <= 3; ++d) {
        for (uint32_t k = 1; k <= 3; ++k) {
            const auto labels = enumerate_labels(d, k);
            Eigen::MatrixXcd avg = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(tensor_dim(d, k, 4096)),
                                                          static_cast<Eigen::Index>(tensor_dim(d, k, 4096)));
            for (const auto &label : labels) {
                auto b = block_state(label);
                Eigen::Map<const Eigen::VectorXcd> v(b.vector.data(), static_cast<Eigen::Index>(b.vector.size()));
                avg += v * v.adjoint() / static_cast<double>(labels.size());
            }
            EXPECT_LT(max_entry_deviation(avg, k_copy_density_exact(d, k).matrix()), 1e-12);
        }
    }
}

TEST(KCopySource, monte_carlo_d3_k3) {
    DensityAccumulator acc(27);
    for (uint64_t seed = 0; seed < 100000; ++seed) acc.add(sample_k_copy_source(3, 3, seed).vector);
    EXPECT_LT(max_entry_deviation(acc.mean(), k_copy_density_exact(3, 3).matrix()), 5e-3);
}

TEST(KCopySource, single_copy_expectation) {
    DensityAccumulator acc(2);
    for (const auto &label : enumerate_labels(2, 1)) acc.add(block_state(label).vector);
    EXPECT_LT(max_entry_deviation(acc.mean(), DensityMatrix::maximally_mixed(2).matrix()), 1e-15);
}

TEST(SampleHaar, one_dimension_is_a_phase) {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto v = sample_haar(1, seed);
        ASSERT_EQ(v.size(), 1u);
        EXPECT_NEAR(std::abs(v[0]), 1.0, 1e-15);
    }
    EXPECT_THROW(sample_haar(0, 1), std::invalid_argument);
}

TEST(SampleHaar, coordinate_mean) {
    Rng rng(17);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += std::norm(sample_haar(2, rng)[0]);
    // |psi_1|^2 is uniform on [0, 1] at d = 2.
    EXPECT_NEAR(sum / n, 0.5, 3 * std::sqrt(1.0 / 12 / n));
}

TEST(SampleHaar, deterministic_given_seed) { EXPECT_EQ(sample_haar(5, 123), sample_haar(5, 123)); }

// |(U psi)_0|^2 must follow the Haar marginal P(<= t) = 1 - (1 - t)^(d-1),
// and Born outcomes of U psi must be uniform.
TEST(SampleHaar, unitary_invariance) {
    Rng rng(2718);
    for (int dim : {2, 4}) {
        const Eigen::MatrixXcd u = random_unitary(dim, rng);
        const int bins = 10, n = 50000;
        std::vector<double> marginal(bins, 0.0), outcomes(dim, 0.0), probs(bins);
        for (int b = 0; b < bins; ++b) {
            auto cdf = [dim](double t) { return 1.0 - std::pow(1.0 - t, dim - 1); };
            probs[b] = cdf((b + 1.0) / bins) - cdf(static_cast<double>(b) / bins);
        }
        for (int s = 0; s < n; ++s) {
            auto psi = sample_haar(static_cast<uint64_t>(dim), rng);
            Eigen::VectorXcd v = u * Eigen::Map<Eigen::VectorXcd>(psi.data(), dim);
            marginal[std::min(bins - 1, static_cast<int>(std::norm(v(0)) * bins))] += 1;
            double r = rng.uniform(), acc = 0.0;
            int outcome = dim - 1;
            for (int b = 0; b < dim; ++b) {
                acc += std::norm(v(b));
                if (r < acc) {
                    outcome = b;
                    break;
                }
            }
            outcomes[outcome] += 1;
        }
        EXPECT_GT(chi_square_p(marginal, probs), 0.001) << "d=" << dim;
        EXPECT_GT(chi_square_p(outcomes, std::vector<double>(dim, 1.0 / dim)), 0.001) << "d=" << dim;
    }
}

TEST(LabelJson, dense_and_sparse_forms) {
    auto small = MultisetLabel::from_multiplicities({0, 2, 1});
    auto js = to_json(small);
    EXPECT_EQ(js.at("m"), (std::vector<uint32_t>{0, 2, 1}));
    EXPECT_EQ(label_from_json(js), small);

    auto big = MultisetLabel::from_pairs(1000000, {{17, 1}, {999999, 2}});
    auto jb = to_json(big);
    EXPECT_FALSE(jb.contains("m"));
    EXPECT_EQ(jb.at("pairs").size(), 2u);
    EXPECT_EQ(label_from_json(jb), big);

    EXPECT_THROW(label_from_json(nlohmann::json{{"d", 3}, {"k", 2}, {"m", {1, 0, 0}}}), std::invalid_argument);
}
