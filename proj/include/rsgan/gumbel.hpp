#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rsgan/random.hpp"
#include "rsgan/types.hpp"

namespace rsgan {

template <class Scalar>
Scalar logistic(Scalar x) {
    // Split on sign so exp never overflows.
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
    Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

/// log(logistic(x)) without cancellation for large |x|.
template <class Scalar>
Scalar log_logistic(Scalar x) {
    if (x >= Scalar(0)) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

/// Softmax of `logits / temperature` with the max exponent shifted out.
template <class Derived>
ColVector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits,
                                            typename Derived::Scalar temperature = 1) {
    using Scalar = typename Derived::Scalar;
    ColVector<Scalar> e = logits / temperature;
    const Scalar top = e.maxCoeff();
    e = e.unaryExpr([top](Scalar x) { return std::exp(x - top); });  // scalar exp underflows to exact zero
    return e / e.sum();
}

/// Backward pass through y = softmax(s / temperature): given dL/dy returns dL/ds.
template <class DerivedY, class DerivedG>
ColVector<typename DerivedY::Scalar> softmax_backward(const Eigen::MatrixBase<DerivedY>& y,
                                                      const Eigen::MatrixBase<DerivedG>& grad_y,
                                                      typename DerivedY::Scalar temperature = 1) {
    const auto inner = y.dot(grad_y);
    return (y.array() * (grad_y.array() - inner) / temperature).matrix();
}

/// Gumbel(0, 1) transform of a uniform draw; mu is clamped into [1e-12, 1 - 1e-12].
template <class Scalar>
Scalar gumbel_from_uniform(Scalar mu) {
    mu = std::clamp(mu, Scalar(1e-12), Scalar(1) - Scalar(1e-12));
    return -std::log(-std::log(mu));
}

/// `size` i.i.d. Gumbel(0, 1) samples.
inline VectorXr gumbel_noise(Rng& rng, Eigen::Index size) {
    VectorXr g(size);
    for (Eigen::Index k = 0; k < size; ++k) g[k] = gumbel_from_uniform(uniform01(rng));
    return g;
}

/// A relaxed one-hot vector produced by a Gumbel-Softmax layer.
struct SoftSelection {
    VectorXr weights;
    double temperature = 1.0;
    // Indices that may carry weight, ascending; empty means every index.
    std::vector<Eigen::Index> support;

    /// Calls f(index, weight) for every support entry with weight above floor.
    template <class F>
    void for_each_above(double floor, F&& f) const {
        if (support.empty()) {
            for (Eigen::Index k = 0; k < weights.size(); ++k)
                if (weights[k] > floor) f(k, weights[k]);
        } else {
            for (Eigen::Index k : support)
                if (weights[k] > floor) f(k, weights[k]);
        }
    }

    Eigen::Index argmax() const {
        Eigen::Index k;
        weights.maxCoeff(&k);
        return k;
    }
};

/// y = softmax((logits + noise) / temperature) restricted to `support`
/// (ascending, unmasked indices); every other entry is exactly zero.
template <class DerivedL, class DerivedG>
SoftSelection gumbel_softmax_on(std::vector<Eigen::Index> support, const Eigen::MatrixBase<DerivedL>& logits,
                                const Eigen::MatrixBase<DerivedG>& noise, double temperature) {
    if (!(temperature > 0.0)) throw Error("gumbel_softmax: temperature must be positive");
    if (logits.size() != noise.size()) throw Error("gumbel_softmax: size mismatch");
    if (support.empty()) throw DegenerateDistribution("gumbel_softmax: every entry is masked");

    SoftSelection out;
    out.temperature = temperature;
    out.support = std::move(support);
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k : out.support) top = std::max(top, (logits[k] + noise[k]) / temperature);
    out.weights = VectorXr::Zero(logits.size());
    double total = 0.0;
    for (Eigen::Index k : out.support) total += out.weights[k] = std::exp((logits[k] + noise[k]) / temperature - top);
    for (Eigen::Index k : out.support) out.weights[k] /= total;
    return out;
}

/// y = softmax((logits + noise) / temperature). Entries at the mask sentinel
/// (<= kMaskLogit / 2) come out exactly zero. Throws DegenerateDistribution
/// when every entry is masked.
template <class DerivedL, class DerivedG>
SoftSelection gumbel_softmax(const Eigen::MatrixBase<DerivedL>& logits, const Eigen::MatrixBase<DerivedG>& noise,
                             double temperature) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index k = 0; k < logits.size(); ++k)
        if (logits[k] > kMaskLogit / 2) support.push_back(k);
    return gumbel_softmax_on(std::move(support), logits, noise, temperature);
}

}  // namespace rsgan
