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
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "qndlab/hilbert.hpp"
#include "qndlab/rng.hpp"

namespace qndlab {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

inline BigInt binomial(uint64_t n, uint64_t k) {
    if (k > n) {
        return 0;
    }
    k = std::min(k, n - k);
    BigInt r = 1;
    for (uint64_t i = 0; i < k; ++i) {
        r *= n - i;
        r /= i + 1;
    }
    return r;
}

inline BigInt factorial(uint64_t n) {
    BigInt r = 1;
    for (uint64_t i = 2; i <= n; ++i) {
        r *= i;
    }
    return r;
}

/// Number of type classes of length-k sequences over d symbols.
inline BigInt multiset_count(uint64_t d, uint64_t k) { return binomial(d + k - 1, k); }

/// Multiplicity vector of a permutation class of sequences over {1..d}.
/// Stored sparsely as (coordinate, multiplicity) pairs, coordinates 1-based
/// and ascending, so that d can be far larger than anything materialized.
class MultisetLabel {
  public:
    static MultisetLabel from_multiplicities(const std::vector<uint32_t> &m) {
        if (m.empty()) {
            throw std::invalid_argument("label needs d >= 1");
        }
        std::vector<std::pair<uint64_t, uint32_t>> pairs;
        for (size_t j = 0; j < m.size(); ++j) {
            if (m[j] > 0) {
                pairs.emplace_back(j + 1, m[j]);
            }
        }
        return from_pairs(m.size(), std::move(pairs));
    }

    static MultisetLabel from_pairs(uint64_t d, std::vector<std::pair<uint64_t, uint32_t>> pairs) {
        if (d == 0) {
            throw std::invalid_argument("label needs d >= 1");
        }
        std::sort(pairs.begin(), pairs.end());
        uint64_t k = 0;
        std::vector<std::pair<uint64_t, uint32_t>> merged;
        for (auto [j, mult] : pairs) {
            if (j < 1 || j > d) {
                throw std::out_of_range("label coordinate " + std::to_string(j) + " outside 1.." + std::to_string(d));
            }
            if (mult == 0) {
                continue;
            }
            if (!merged.empty() && merged.back().first == j) {
                merged.back().second += mult;
            } else {
                merged.emplace_back(j, mult);
            }
            k += mult;
        }
        if (k == 0) {
            throw std::invalid_argument("label needs k >= 1");
        }
        return MultisetLabel(d, static_cast<uint32_t>(k), std::move(merged));
    }

    /// From any sequence with entries in 1..d (order irrelevant).
    static MultisetLabel from_sequence(uint64_t d, const std::vector<uint64_t> &seq) {
        std::vector<std::pair<uint64_t, uint32_t>> pairs;
        for (auto s : seq) {
            pairs.emplace_back(s, 1);
        }
        return from_pairs(d, std::move(pairs));
    }

    uint64_t d() const { return d_; }
    uint32_t k() const { return k_; }
    const std::vector<std::pair<uint64_t, uint32_t>> &pairs() const { return pairs_; }

    uint32_t multiplicity(uint64_t j) const {
        auto it = std::lower_bound(pairs_.begin(), pairs_.end(), std::make_pair(j, uint32_t{0}));
        return it != pairs_.end() && it->first == j ? it->second : 0;
    }

    std::vector<uint32_t> multiplicities() const {
        std::vector<uint32_t> m(d_, 0);
        for (auto [j, mult] : pairs_) {
            m[j - 1] = mult;
        }
        return m;
    }

    /// Representative sorted sequence s_1 <= ... <= s_k.
    std::vector<uint64_t> sorted_sequence() const {
        std::vector<uint64_t> s;
        s.reserve(k_);
        for (auto [j, mult] : pairs_) {
            s.insert(s.end(), mult, j);
        }
        return s;
    }

    bool operator==(const MultisetLabel &) const = default;

  private:
    MultisetLabel(uint64_t d, uint32_t k, std::vector<std::pair<uint64_t, uint32_t>> pairs)
        : d_(d), k_(k), pairs_(std::move(pairs)) {}

    uint64_t d_;
    uint32_t k_;
    std::vector<std::pair<uint64_t, uint32_t>> pairs_;
};

/// N_s = k! / prod m_j!, the number of distinct rearrangements.
inline BigInt permutation_count(const MultisetLabel &label) {
    BigInt r = factorial(label.k());
    for (auto [j, mult] : label.pairs()) {
        r /= factorial(mult);
    }
    return r;
}

/// E[prod_j |psi_j|^{2 m_j}] over Haar psi in C^d, exactly:
/// (prod m_j!) (d-1)! / (k+d-1)!  =  (prod m_j!) / (d (d+1) ... (d+k-1)).
inline BigRational moment_even_powers_exact(const MultisetLabel &label) {
    BigInt num = 1;
    for (auto [j, mult] : label.pairs()) {
        num *= factorial(mult);
    }
    BigInt den = 1;
    for (uint64_t i = 0; i < label.k(); ++i) {
        den *= label.d() + i;
    }
    return BigRational(num, den);
}

inline double moment_even_powers(const MultisetLabel &label) {
    return moment_even_powers_exact(label).convert_to<double>();
}

inline BigRational block_probability_exact(const MultisetLabel &label) {
    return BigRational(permutation_count(label)) * moment_even_powers_exact(label);
}

inline double block_probability(const MultisetLabel &label) {
    return block_probability_exact(label).convert_to<double>();
}

namespace detail {

/// Nondecreasing sequences of length len with entries in {v..d}.
inline BigInt tail_count(uint64_t d, uint64_t v, uint64_t len) { return binomial(d - v + len, len); }

}  // namespace detail

/// Rank of a label among all labels of the same (d, k), in lexicographic
/// order of sorted sequences.
inline BigInt multiset_rank(const MultisetLabel &label) {
    const uint64_t d = label.d();
    BigInt rank = 0;
    uint64_t start = 1;
    uint64_t len = label.k();
    for (uint64_t s : label.sorted_sequence()) {
        rank += detail::tail_count(d, start, len) - detail::tail_count(d, s, len);
        start = s;
        --len;
    }
    return rank;
}

/// Inverse of multiset_rank. Each position binary-searches its value, so the
/// cost is O(k log d) binomials and nothing of size d is allocated.
inline MultisetLabel multiset_unrank(uint64_t d, uint32_t k, BigInt rank) {
    if (d == 0 || k == 0) {
        throw std::invalid_argument("unrank needs d >= 1 and k >= 1");
    }
    if (rank < 0 || rank >= multiset_count(d, k)) {
        throw std::out_of_range("multiset rank out of range");
    }
    std::vector<std::pair<uint64_t, uint32_t>> pairs;
    uint64_t start = 1;
    for (uint64_t len = k; len >= 1; --len) {
        const BigInt base = detail::tail_count(d, start, len);
        // Largest v in [start, d] with base - tail_count(v) <= rank.
        uint64_t lo = start, hi = d;
        while (lo < hi) {
            uint64_t mid = lo + (hi - lo + 1) / 2;
            if (base - detail::tail_count(d, mid, len) <= rank) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        rank -= base - detail::tail_count(d, lo, len);
        if (!pairs.empty() && pairs.back().first == lo) {
            ++pairs.back().second;
        } else {
            pairs.emplace_back(lo, 1);
        }
        start = lo;
    }
    return MultisetLabel::from_pairs(d, std::move(pairs));
}

/// Uniform integer in [0, bound) by masked rejection over 64-bit words.
inline BigInt uniform_below(const BigInt &bound, Rng &rng) {
    if (bound <= 0) {
        throw std::invalid_argument("uniform_below needs a positive bound");
    }
    if (bound <= std::numeric_limits<uint64_t>::max()) {
        return BigInt(rng.below(bound.convert_to<uint64_t>()));
    }
    const unsigned bits = boost::multiprecision::msb(bound) + 1;
    const unsigned words = (bits + 63) / 64;
    const BigInt mask = (BigInt(1) << bits) - 1;
    while (true) {
        BigInt v = 0;
        for (unsigned w = 0; w < words; ++w) {
            v = (v << 64) | BigInt(rng());
        }
        v &= mask;
        if (v < bound) {
            return v;
        }
    }
}

/// Draws a label uniformly among all C(d+k-1, k) type classes.
inline MultisetLabel sample_multiset_uniform(uint64_t d, uint32_t k, Rng &rng) {
    if (d == 0 || k == 0) {
        throw std::invalid_argument("sample_multiset_uniform needs d >= 1 and k >= 1");
    }
    return multiset_unrank(d, k, uniform_below(multiset_count(d, k), rng));
}

inline MultisetLabel sample_multiset_uniform(uint64_t d, uint32_t k, uint64_t seed) {
    Rng rng(seed);
    return sample_multiset_uniform(d, k, rng);
}

inline std::vector<MultisetLabel> enumerate_labels(uint64_t d, uint32_t k) {
    const BigInt count = multiset_count(d, k);
    if (count > 1'000'000) {
        throw std::invalid_argument("too many labels to enumerate");
    }
    std::vector<MultisetLabel> out;
    for (BigInt r = 0; r < count; ++r) {
        out.push_back(multiset_unrank(d, k, r));
    }
    return out;
}

inline constexpr uint64_t kDefaultTensorCap = 4096;

/// d^k, or throws if it exceeds cap.
inline uint64_t tensor_dim(uint64_t d, uint32_t k, uint64_t cap) {
    uint64_t dim = 1;
    for (uint32_t i = 0; i < k; ++i) {
        if (dim > cap / d) {
            throw std::invalid_argument("d^k = " + std::to_string(d) + "^" + std::to_string(k) +
                                        " exceeds the cap of " + std::to_string(cap));
        }
        dim *= d;
    }
    return dim;
}

/// Basis index of a sequence over {1..d}; the first copy is most significant.
inline uint64_t sequence_index(uint64_t d, const std::vector<uint64_t> &seq) {
    uint64_t idx = 0;
    for (uint64_t s : seq) {
        idx = idx * d + (s - 1);
    }
    return idx;
}

inline std::vector<uint64_t> index_sequence(uint64_t d, uint32_t k, uint64_t idx) {
    std::vector<uint64_t> seq(k);
    for (uint32_t i = k; i-- > 0;) {
        seq[i] = idx % d + 1;
        idx /= d;
    }
    return seq;
}

struct BlockState {
    MultisetLabel label;
    Amplitudes vector;  // dimension d^k
};

/// Uniform positive superposition of every distinct rearrangement of the
/// label's sequence.
inline BlockState block_state(const MultisetLabel &label, uint64_t cap = kDefaultTensorCap) {
    const uint64_t dim = tensor_dim(label.d(), label.k(), cap);
    Amplitudes v(dim);
    auto seq = label.sorted_sequence();
    const double amp = 1.0 / std::sqrt(permutation_count(label).convert_to<double>());
    do {
        v[sequence_index(label.d(), seq)] = amp;
    } while (std::next_permutation(seq.begin(), seq.end()));
    return {label, std::move(v)};
}

/// Exact k-copy Haar density matrix assembled block by block.
inline DensityMatrix k_copy_density_exact(uint64_t d, uint32_t k, uint64_t cap = kDefaultTensorCap) {
    const auto dim = static_cast<Eigen::Index>(tensor_dim(d, k, cap));
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
    for (const auto &label : enumerate_labels(d, k)) {
        const double weight = block_probability(label);
        auto seq = label.sorted_sequence();
        std::vector<Eigen::Index> support;
        do {
            support.push_back(static_cast<Eigen::Index>(sequence_index(d, seq)));
        } while (std::next_permutation(seq.begin(), seq.end()));
        const double entry = weight / static_cast<double>(support.size());
        for (auto i : support) {
            for (auto j : support) {
                rho(i, j) += entry;
            }
        }
    }
    return DensityMatrix::from_matrix(std::move(rho));
}

/// Matrix of the operator sending |s_1 .. s_k> to |s_perm[0] .. s_perm[k-1]>.
inline Eigen::MatrixXd copy_permutation_matrix(uint64_t d, const std::vector<size_t> &perm, uint64_t cap = kDefaultTensorCap) {
    const auto k = static_cast<uint32_t>(perm.size());
    const uint64_t dim = tensor_dim(d, k, cap);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (uint64_t col = 0; col < dim; ++col) {
        auto seq = index_sequence(d, k, col);
        std::vector<uint64_t> out(k);
        for (uint32_t i = 0; i < k; ++i) {
            out[i] = seq[perm[i]];
        }
        p(static_cast<Eigen::Index>(sequence_index(d, out)), static_cast<Eigen::Index>(col)) = 1.0;
    }
    return p;
}

/// Symmetric-subspace projector (1/k!) sum_pi P_pi, normalized by its rank
/// C(d+k-1, k). Independent of the block construction.
inline DensityMatrix symmetric_projector_density(uint64_t d, uint32_t k, uint64_t cap = kDefaultTensorCap) {
    const auto dim = static_cast<Eigen::Index>(tensor_dim(d, k, cap));
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(dim, dim);
    std::vector<size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    size_t count = 0;
    do {
        sum += copy_permutation_matrix(d, perm, cap);
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    const double rank = multiset_count(d, k).convert_to<double>();
    Eigen::MatrixXcd rho = (sum / (static_cast<double>(count) * rank)).cast<Complex>();
    return DensityMatrix::from_matrix(std::move(rho));
}

/// Haar-random unit vector in C^d from 2d standard normals (re, im per entry).
inline Amplitudes sample_haar(uint64_t d, Rng &rng) {
    if (d == 0) {
        throw std::invalid_argument("sample_haar needs d >= 1");
    }
    Amplitudes v(d);
    double norm2 = 0.0;
    for (auto &a : v) {
        const double re = rng.normal();
        const double im = rng.normal();
        a = Complex(re, im);
        norm2 += re * re + im * im;
    }
    const double scale = 1.0 / std::sqrt(norm2);
    for (auto &a : v) {
        a *= scale;
    }
    return v;
}

inline Amplitudes sample_haar(uint64_t d, uint64_t seed) {
    Rng rng(seed);
    return sample_haar(d, rng);
}

inline StateVector sample_haar_state(int num_qubits, Rng &rng) {
    return StateVector::normalized(sample_haar(uint64_t{1} << num_qubits, rng));
}

inline Amplitudes tensor_power(std::span<const Complex> psi, uint32_t k) {
    Amplitudes out{1.0};
    for (uint32_t i = 0; i < k; ++i) {
        out = kron(out, psi);
    }
    return out;
}

/// Label-only draw from the k-copy source; valid for any d.
inline MultisetLabel sample_k_copy_label(uint64_t d, uint32_t k, uint64_t seed) {
    return sample_multiset_uniform(d, k, seed);
}

/// One draw from the k-copy Haar source: a uniform type class followed by
/// its block state. The average of |b><b| over draws is k_copy_density_exact.
inline BlockState sample_k_copy_source(uint64_t d, uint32_t k, uint64_t seed, uint64_t cap = kDefaultTensorCap) {
    tensor_dim(d, k, cap);
    return block_state(sample_k_copy_label(d, k, seed), cap);
}

inline constexpr uint64_t kDenseLabelLimit = 64;

/// {"d","k","m":[...]} for small d, {"d","k","pairs":[[j, m_j], ...]} otherwise.
inline nlohmann::json to_json(const MultisetLabel &label) {
    nlohmann::json j{{"d", label.d()}, {"k", label.k()}};
    if (label.d() <= kDenseLabelLimit) {
        j["m"] = label.multiplicities();
    } else {
        nlohmann::json pairs = nlohmann::json::array();
        for (auto [idx, mult] : label.pairs()) {
            pairs.push_back({idx, mult});
        }
        j["pairs"] = std::move(pairs);
    }
    return j;
}

inline MultisetLabel label_from_json(const nlohmann::json &j) {
    MultisetLabel label = j.contains("m") ? MultisetLabel::from_multiplicities(j.at("m").get<std::vector<uint32_t>>())
                                          : MultisetLabel::from_pairs(j.at("d").get<uint64_t>(),
                                                                      j.at("pairs").get<std::vector<std::pair<uint64_t, uint32_t>>>());
    if (label.d() != j.at("d").get<uint64_t>() || label.k() != j.at("k").get<uint32_t>()) {
        throw std::invalid_argument("label d/k fields disagree with multiplicities");
    }
    return label;
}

}  // namespace qndlab
