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
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace qndlab {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Pure function of (counter, key).
inline std::array<uint32_t, 4> philox4x32_10(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
    constexpr uint32_t M0 = 0xD2511F53u;
    constexpr uint32_t M1 = 0xCD9E8D57u;
    constexpr uint32_t W0 = 0x9E3779B9u;
    constexpr uint32_t W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += W0;
            key[1] += W1;
        }
        uint64_t p0 = uint64_t{M0} * ctr[0];
        uint64_t p1 = uint64_t{M1} * ctr[2];
        auto hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
        auto hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

/// Counter-based generator. The stream of values is a pure function of
/// (seed, stream id): block i is philox4x32_10(ctr = {i_lo, i_hi, stream_lo,
/// stream_hi}, key = {seed_lo, seed_hi}), consumed as two little-endian u64
/// words (w0 = out[0] | out[1] << 32, w1 = out[2] | out[3] << 32).
///
/// Satisfies UniformRandomBitGenerator so it can drive <random> adaptors,
/// though library code only uses the fully specified helpers below.
class Rng {
  public:
    using result_type = uint64_t;

    explicit Rng(uint64_t seed, uint64_t stream = 0) : seed_(seed), stream_(stream) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() {
        if (buffered_ == 0) {
            refill();
        }
        return buffer_[2 - buffered_--];
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Standard normal by Box-Muller; outputs are produced in pairs (cos then sin).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform integer in [0, bound) by rejection on the top bits; bound > 0.
    uint64_t below(uint64_t bound) {
        if ((bound & (bound - 1)) == 0) {
            return (*this)() & (bound - 1);
        }
        const int bits = 64 - std::countl_zero(bound - 1);
        const uint64_t mask = bits == 64 ? ~uint64_t{0} : (uint64_t{1} << bits) - 1;
        while (true) {
            uint64_t v = (*this)() & mask;
            if (v < bound) {
                return v;
            }
        }
    }

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }

  private:
    void refill() {
        auto out = philox4x32_10(
            {static_cast<uint32_t>(block_), static_cast<uint32_t>(block_ >> 32), static_cast<uint32_t>(stream_),
             static_cast<uint32_t>(stream_ >> 32)},
            {static_cast<uint32_t>(seed_), static_cast<uint32_t>(seed_ >> 32)});
        ++block_;
        buffer_[0] = uint64_t{out[0]} | (uint64_t{out[1]} << 32);
        buffer_[1] = uint64_t{out[2]} | (uint64_t{out[3]} << 32);
        buffered_ = 2;
    }

    uint64_t seed_;
    uint64_t stream_;
    uint64_t block_ = 0;
    std::array<uint64_t, 2> buffer_{};
    int buffered_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stream tags keep independent consumers of one seed from overlapping.
/// A stream id is (tag << 48) | index.
enum class StreamTag : uint64_t {
    Direct = 0,
    NetPoint = 1,
    CoverageTrial = 2,
    Shot = 3,
    Witness = 4,
    Bernoulli = 5,
    Experiment = 6,
    Postselect = 7,
    RandomWitness = 8,
};

inline Rng substream(uint64_t seed, StreamTag tag, uint64_t index) {
    return Rng(seed, (static_cast<uint64_t>(tag) << 48) | (index & ((uint64_t{1} << 48) - 1)));
}

}  // namespace qndlab
