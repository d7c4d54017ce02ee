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
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iterator>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

namespace qndlab {

using Complex = std::complex<double>;
using Amplitudes = std::vector<Complex>;

inline constexpr double kStateTolerance = 1e-9;

inline bool is_power_of_two(uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

inline int log2_exact(uint64_t v) {
    if (!is_power_of_two(v)) {
        throw std::invalid_argument("dimension " + std::to_string(v) + " is not a power of 2");
    }
    return std::countr_zero(v);
}

/// Classical label of a basis index, qubit 0 first.
inline std::string bit_string(uint64_t index, int num_qubits) {
    std::string s;
    for (int b = num_qubits - 1; b >= 0; --b) {
        s += ((index >> b) & 1) ? '1' : '0';
    }
    return s;
}

inline double norm_squared(std::span<const Complex> v) {
    double s = 0.0;
    for (const auto &a : v) {
        s += std::norm(a);
    }
    return s;
}

/// Pure state of n qubits. Amplitude index i is the classical label whose
/// bit string has qubit 0 as the most significant bit.
class StateVector {
  public:
    StateVector() : StateVector(zero(0)) {}

    static StateVector zero(int num_qubits) { return basis(num_qubits, 0); }

    static StateVector basis(int num_qubits, uint64_t index) {
        if (num_qubits < 0 || num_qubits > 30) {
            throw std::invalid_argument("qubit count out of range: " + std::to_string(num_qubits));
        }
        uint64_t dim = uint64_t{1} << num_qubits;
        if (index >= dim) {
            throw std::out_of_range("basis index " + std::to_string(index) + " out of range for " +
                                    std::to_string(num_qubits) + " qubits");
        }
        Amplitudes amps(dim);
        amps[index] = 1.0;
        return StateVector(num_qubits, std::move(amps));
    }

    /// Takes ownership of amplitudes that must already have unit norm.
    static StateVector from_amplitudes(Amplitudes amps, double tol = kStateTolerance) {
        int n = log2_exact(amps.size());
        double norm = std::sqrt(norm_squared(amps));
        if (std::abs(norm - 1.0) > tol) {
            std::ostringstream msg;
            msg << "state norm " << norm << " differs from 1";
            throw std::invalid_argument(msg.str());
        }
        return StateVector(n, std::move(amps));
    }

    /// Rescales a nonzero vector to unit norm.
    static StateVector normalized(Amplitudes amps) {
        int n = log2_exact(amps.size());
        double norm = std::sqrt(norm_squared(amps));
        if (norm == 0.0) {
            throw std::invalid_argument("cannot normalize the zero vector");
        }
        for (auto &a : amps) {
            a /= norm;
        }
        return StateVector(n, std::move(amps));
    }

    int num_qubits() const { return num_qubits_; }
    size_t dim() const { return amps_.size(); }
    std::span<const Complex> amplitudes() const { return amps_; }
    const Complex &operator[](size_t i) const { return amps_[i]; }
    operator std::span<const Complex>() const { return amps_; }

    double probability(uint64_t index) const { return std::norm(amps_.at(index)); }

    bool operator==(const StateVector &) const = default;

  private:
    StateVector(int n, Amplitudes amps) : num_qubits_(n), amps_(std::move(amps)) {}

    int num_qubits_;
    Amplitudes amps_;
};

inline void require_same_dim(std::span<const Complex> u, std::span<const Complex> v) {
    if (u.size() != v.size()) {
        throw std::invalid_argument("dimension mismatch: " + std::to_string(u.size()) + " vs " +
                                    std::to_string(v.size()));
    }
}

/// <u|v>, conjugate-linear in u.
inline Complex inner_product(std::span<const Complex> u, std::span<const Complex> v) {
    require_same_dim(u, v);
    Complex s = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        s += std::conj(u[i]) * v[i];
    }
    return s;
}

/// min over phi of ||u - e^{i phi} v|| = sqrt(2 - 2|<u|v>|) for unit vectors.
/// Ranges over [0, sqrt 2]; orthogonal states sit exactly at sqrt 2.
inline double phase_min_distance(std::span<const Complex> u, std::span<const Complex> v) {
    double overlap = std::abs(inner_product(u, v));
    return std::sqrt(std::clamp(2.0 - 2.0 * overlap, 0.0, 2.0));
}

/// Raw Euclidean ||u - v|| without phase quotient.
inline double euclidean_distance(std::span<const Complex> u, std::span<const Complex> v) {
    require_same_dim(u, v);
    double s = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        s += std::norm(u[i] - v[i]);
    }
    return std::sqrt(s);
}

/// Total variation distance between classical-basis measurement distributions.
inline double tv_distance(std::span<const Complex> u, std::span<const Complex> v) {
    require_same_dim(u, v);
    double s = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        s += std::abs(std::norm(u[i]) - std::norm(v[i]));
    }
    return 0.5 * s;
}

/// Kronecker product; u supplies the most significant index digits.
inline Amplitudes kron(std::span<const Complex> u, std::span<const Complex> v) {
    Amplitudes out(u.size() * v.size());
    for (size_t i = 0; i < u.size(); ++i) {
        for (size_t j = 0; j < v.size(); ++j) {
            out[i * v.size() + j] = u[i] * v[j];
        }
    }
    return out;
}

inline StateVector tensor_product(const StateVector &u, const StateVector &v) {
    return StateVector::normalized(kron(u, v));
}

/// Hermitian, unit-trace, positive semidefinite matrix.
class DensityMatrix {
  public:
    /// Returns a description of the first violated invariant, if any.
    static std::optional<std::string> check(const Eigen::MatrixXcd &m, double tol = kStateTolerance) {
        if (m.rows() == 0 || m.rows() != m.cols()) {
            return "matrix must be square and nonempty";
        }
        double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
        if (herm > tol) {
            return "not Hermitian (max deviation " + std::to_string(herm) + ")";
        }
        Complex tr = m.trace();
        if (std::abs(tr - 1.0) > tol) {
            return "trace " + std::to_string(tr.real()) + " differs from 1";
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(m, Eigen::EigenvaluesOnly);
        double lowest = eig.eigenvalues().minCoeff();
        if (lowest < -tol) {
            return "negative eigenvalue " + std::to_string(lowest);
        }
        return std::nullopt;
    }

    static DensityMatrix from_matrix(Eigen::MatrixXcd m, double tol = kStateTolerance) {
        if (auto why = check(m, tol)) {
            throw std::invalid_argument("invalid density matrix: " + *why);
        }
        return DensityMatrix(std::move(m));
    }

    static DensityMatrix pure(std::span<const Complex> psi) {
        Eigen::Map<const Eigen::VectorXcd> v(psi.data(), static_cast<Eigen::Index>(psi.size()));
        return from_matrix(v * v.adjoint());
    }

    static DensityMatrix maximally_mixed(size_t dim) {
        return DensityMatrix(Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)) /
                             static_cast<double>(dim));
    }

    size_t dim() const { return static_cast<size_t>(m_.rows()); }
    const Eigen::MatrixXcd &matrix() const { return m_; }
    Complex operator()(size_t i, size_t j) const {
        return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

  private:
    explicit DensityMatrix(Eigen::MatrixXcd m) : m_(std::move(m)) {}

    Eigen::MatrixXcd m_;
};

inline double max_entry_deviation(const Eigen::MatrixXcd &a, const Eigen::MatrixXcd &b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("matrix shape mismatch");
    }
    return (a - b).cwiseAbs().maxCoeff();
}

/// Reduced density matrix on the kept qubits, in ascending qubit order.
inline DensityMatrix partial_trace(const DensityMatrix &rho, std::vector<int> keep) {
    const int n = log2_exact(rho.dim());
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    for (int q : keep) {
        if (q < 0 || q >= n) {
            throw std::out_of_range("qubit index " + std::to_string(q) + " out of range for " + std::to_string(n) +
                                    " qubits");
        }
    }
    std::vector<int> traced;
    for (int q = 0; q < n; ++q) {
        if (!std::binary_search(keep.begin(), keep.end(), q)) {
            traced.push_back(q);
        }
    }
    // Scatter the bits of a compact index onto the given qubit positions.
    auto scatter = [n](uint64_t compact, const std::vector<int> &qubits) {
        uint64_t full = 0;
        const int w = static_cast<int>(qubits.size());
        for (int b = 0; b < w; ++b) {
            if ((compact >> (w - 1 - b)) & 1) {
                full |= uint64_t{1} << (n - 1 - qubits[b]);
            }
        }
        return full;
    };
    const uint64_t dk = uint64_t{1} << keep.size();
    const uint64_t dt = uint64_t{1} << traced.size();
    std::vector<uint64_t> keep_idx(dk), trace_idx(dt);
    for (uint64_t a = 0; a < dk; ++a) {
        keep_idx[a] = scatter(a, keep);
    }
    for (uint64_t t = 0; t < dt; ++t) {
        trace_idx[t] = scatter(t, traced);
    }
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
    const auto &m = rho.matrix();
    for (uint64_t a = 0; a < dk; ++a) {
        for (uint64_t b = 0; b < dk; ++b) {
            Complex s = 0.0;
            for (uint64_t t = 0; t < dt; ++t) {
                s += m(static_cast<Eigen::Index>(keep_idx[a] | trace_idx[t]),
                       static_cast<Eigen::Index>(keep_idx[b] | trace_idx[t]));
            }
            out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = s;
        }
    }
    return DensityMatrix::from_matrix(std::move(out));
}

/// Accumulates (1/N) sum |psi><psi| one sample at a time.
class DensityAccumulator {
  public:
    explicit DensityAccumulator(size_t dim)
        : sum_(Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {}

    void add(std::span<const Complex> psi) {
        if (psi.size() != static_cast<size_t>(sum_.rows())) {
            throw std::invalid_argument("dimension mismatch in density accumulation");
        }
        Eigen::Map<const Eigen::VectorXcd> v(psi.data(), static_cast<Eigen::Index>(psi.size()));
        sum_.selfadjointView<Eigen::Lower>().rankUpdate(v);
        ++count_;
    }

    size_t count() const { return count_; }

    Eigen::MatrixXcd mean() const {
        if (count_ == 0) {
            throw std::invalid_argument("no samples accumulated");
        }
        Eigen::MatrixXcd full = sum_.selfadjointView<Eigen::Lower>();
        return full / static_cast<double>(count_);
    }

  private:
    Eigen::MatrixXcd sum_;
    size_t count_ = 0;
};

template <typename Range>
DensityMatrix density_from_samples(const Range &samples) {
    if (std::begin(samples) == std::end(samples)) {
        throw std::invalid_argument("density_from_samples needs at least one sample");
    }
    std::span<const Complex> first = *std::begin(samples);
    DensityAccumulator acc(first.size());
    for (const auto &s : samples) {
        acc.add(s);
    }
    return DensityMatrix::from_matrix(acc.mean());
}

// JSON forms: states {"n", "re", "im"}; density matrices {"d", "re", "im"}, row-major nested.

inline nlohmann::json amplitudes_to_json(std::span<const Complex> amps) {
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (const auto &a : amps) {
        re.push_back(a.real());
        im.push_back(a.imag());
    }
    return {{"re", std::move(re)}, {"im", std::move(im)}};
}

inline Amplitudes amplitudes_from_json(const nlohmann::json &j) {
    const auto &re = j.at("re");
    const auto &im = j.at("im");
    if (re.size() != im.size()) {
        throw std::invalid_argument("re/im length mismatch");
    }
    Amplitudes out(re.size());
    for (size_t i = 0; i < re.size(); ++i) {
        out[i] = Complex(re[i].get<double>(), im[i].get<double>());
    }
    return out;
}

inline nlohmann::json to_json(const StateVector &s) {
    nlohmann::json j = amplitudes_to_json(s);
    j["n"] = s.num_qubits();
    return j;
}

inline StateVector state_from_json(const nlohmann::json &j) {
    auto amps = amplitudes_from_json(j);
    int n = j.at("n").get<int>();
    if (amps.size() != (uint64_t{1} << n)) {
        throw std::invalid_argument("amplitude count does not match n = " + std::to_string(n));
    }
    return StateVector::from_amplitudes(std::move(amps));
}

inline nlohmann::json to_json(const DensityMatrix &rho) {
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (size_t i = 0; i < rho.dim(); ++i) {
        nlohmann::json rr = nlohmann::json::array(), ri = nlohmann::json::array();
        for (size_t k = 0; k < rho.dim(); ++k) {
            rr.push_back(rho(i, k).real());
            ri.push_back(rho(i, k).imag());
        }
        re.push_back(std::move(rr));
        im.push_back(std::move(ri));
    }
    return {{"d", rho.dim()}, {"re", std::move(re)}, {"im", std::move(im)}};
}

inline DensityMatrix density_from_json(const nlohmann::json &j) {
    auto d = j.at("d").get<Eigen::Index>();
    const auto &re = j.at("re");
    const auto &im = j.at("im");
    if (static_cast<Eigen::Index>(re.size()) != d || static_cast<Eigen::Index>(im.size()) != d) {
        throw std::invalid_argument("density matrix row count does not match d");
    }
    Eigen::MatrixXcd m(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
        if (static_cast<Eigen::Index>(re[r].size()) != d || static_cast<Eigen::Index>(im[r].size()) != d) {
            throw std::invalid_argument("density matrix row length does not match d");
        }
        for (Eigen::Index c = 0; c < d; ++c) {
            m(r, c) = Complex(re[r][c].get<double>(), im[r][c].get<double>());
        }
    }
    return DensityMatrix::from_matrix(std::move(m));
}

}  // namespace qndlab
