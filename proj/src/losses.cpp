#include <algorithm>
#include <cmath>

#include "runet/train.hpp"

namespace runet {

double bce_scalar(double p, int y, double eps) {
    if (y != 0 && y != 1) throw std::invalid_argument("bce: label must be 0 or 1");
    const double q = std::clamp(p, eps, 1.0 - eps);
    return y == 1 ? -std::log(q) : -std::log(1.0 - q);
}

template <typename T>
BasicTensor<T> bce_loss(const BasicTensor<T>& probs, std::span<const int> labels, double eps) {
    if (probs.numel() != labels.size())
        throw ShapeError("bce_loss: " + std::to_string(probs.numel()) + " probabilities vs " +
                         std::to_string(labels.size()) + " labels");
    const std::size_t n = labels.size();
    std::vector<int> y(labels.begin(), labels.end());
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) total += bce_scalar(probs[i], y[i], eps);
    auto out = BasicTensor<T>::scalar(static_cast<T>(total / static_cast<double>(n)));
    auto pi = probs.handle();
    detail::attach<T>("bce_loss", {&probs}, out, [=](const std::vector<T>& g) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = pi->data[i];
            if (p < eps || p > 1.0 - eps) continue;  // clamped: flat
            const double d = y[i] == 1 ? -1.0 / p : 1.0 / (1.0 - p);
            pi->grad[i] += static_cast<T>(g[0] * d / static_cast<double>(n));
        }
    });
    return out;
}

template <typename T>
BasicTensor<T> seg_cross_entropy(const BasicTensor<T>& probs, const BasicTensor<T>& mask, double eps) {
    if (probs.rank() != 4 || mask.rank() != 3 || mask.dim(0) != probs.dim(0) || mask.dim(1) != probs.dim(2) ||
        mask.dim(2) != probs.dim(3))
        throw ShapeError("seg_cross_entropy: probs " + shape_str(probs.shape()) + " vs mask " +
                         shape_str(mask.shape()));
    const std::size_t N = probs.dim(0), C = probs.dim(1), plane = probs.dim(2) * probs.dim(3);
    std::vector<std::size_t> target(N * plane);  // flat index of the true-class probability
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t p = 0; p < plane; ++p) {
            const T m = mask[n * plane + p];
            if (m != T(0) && m != T(1)) throw std::invalid_argument("seg_cross_entropy: mask values must be 0 or 1");
            const std::size_t cls = m == T(1) ? 1 : 0;
            target[n * plane + p] = (n * C + cls) * plane + p;
        }
    double total = 0;
    auto pd = probs.data();
    for (std::size_t k : target) total -= std::log(std::clamp(static_cast<double>(pd[k]), eps, 1.0 - eps));
    const double count = static_cast<double>(N * plane);
    auto out = BasicTensor<T>::scalar(static_cast<T>(total / count));
    auto pi = probs.handle();
    detail::attach<T>("seg_cross_entropy", {&probs}, out, [=, target = std::move(target)](const std::vector<T>& g) {
        for (std::size_t k : target) {
            const double p = pi->data[k];
            if (p < eps || p > 1.0 - eps) continue;
            pi->grad[k] += static_cast<T>(-g[0] / (p * count));
        }
    });
    return out;
}

template BasicTensor<float> bce_loss(const BasicTensor<float>&, std::span<const int>, double);
template BasicTensor<double> bce_loss(const BasicTensor<double>&, std::span<const int>, double);
template BasicTensor<float> seg_cross_entropy(const BasicTensor<float>&, const BasicTensor<float>&, double);
template BasicTensor<double> seg_cross_entropy(const BasicTensor<double>&, const BasicTensor<double>&, double);

}  // namespace runet
