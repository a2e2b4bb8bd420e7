#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace trlv {

// Thrown when a KL divergence is infinite (p_i > 0 where q_i == 0).
// Reported explicitly instead of clamping so checkpoint-divergence
// pathologies stay visible in analysis.
struct infinite_divergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major tensor over a configurable scalar type
/// (float for training, double for oracles and tests).
template <class Real>
struct Tensor {
    std::vector<int> shape;
    std::vector<Real> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), Real(0)) {}
    Tensor(std::vector<int> s, std::vector<Real> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel_of(shape))
            throw std::invalid_argument("Tensor: data length does not match shape");
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int rows() const { return shape.at(0); }
    int cols() const { return shape.at(1); }

    Real& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    Real at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

    bool all_finite() const {
        for (Real v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

template <class Real>
bool same_shape(const Tensor<Real>& a, const Tensor<Real>& b) {
    return a.shape == b.shape;
}

/// Temperature-scaled softmax with max-subtraction.
template <class Real>
std::vector<Real> softmax(const std::vector<Real>& logits, Real temperature) {
    if (!(temperature > Real(0))) throw std::invalid_argument("softmax: temperature must be > 0");
    if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
    Real mx = logits[0];
    for (Real v : logits) {
        if (!std::isfinite(static_cast<double>(v)))
            throw std::invalid_argument("softmax: non-finite logit");
        if (v > mx) mx = v;
    }
    std::vector<Real> out(logits.size());
    Real sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - mx) / temperature);
        sum += out[i];
    }
    for (Real& v : out) v /= sum;
    return out;
}

/// Log-softmax computed directly (never log of softmax output).
template <class Real>
std::vector<Real> log_softmax(const std::vector<Real>& logits, Real temperature) {
    if (!(temperature > Real(0))) throw std::invalid_argument("log_softmax: temperature must be > 0");
    if (logits.empty()) throw std::invalid_argument("log_softmax: empty logits");
    Real mx = logits[0];
    for (Real v : logits) {
        if (!std::isfinite(static_cast<double>(v)))
            throw std::invalid_argument("log_softmax: non-finite logit");
        if (v > mx) mx = v;
    }
    Real sum = 0;
    std::vector<Real> shifted(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        shifted[i] = (logits[i] - mx) / temperature;
        sum += std::exp(shifted[i]);
    }
    const Real lse = std::log(sum);
    for (Real& v : shifted) v -= lse;
    return shifted;
}

/// Shannon entropy in nats, with 0*ln 0 := 0.
template <class Real>
Real categorical_entropy(const std::vector<Real>& probs) {
    Real h = 0;
    for (Real p : probs) {
        if (p < Real(0)) throw std::invalid_argument("categorical_entropy: negative probability");
        if (p > Real(0)) h -= p * std::log(p);
    }
    return h < Real(0) ? Real(0) : h;
}

/// KL(p || q) in nats. Throws infinite_divergence_error when p has mass
/// where q has none.
template <class Real>
Real categorical_kl(const std::vector<Real>& p, const std::vector<Real>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("categorical_kl: support mismatch");
    Real kl = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < Real(0) || q[i] < Real(0))
            throw std::invalid_argument("categorical_kl: negative probability");
        if (p[i] > Real(0)) {
            if (q[i] == Real(0))
                throw infinite_divergence_error("categorical_kl: p > 0 where q == 0 at index " +
                                                std::to_string(i));
            kl += p[i] * std::log(p[i] / q[i]);
        }
    }
    return kl < Real(0) ? Real(0) : kl;
}

}  // namespace trlv
