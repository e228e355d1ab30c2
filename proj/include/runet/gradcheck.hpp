#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "runet/tensor.hpp"

namespace runet {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // coordinates whose +-eps probe crossed a relu/max kink
};

struct GradCheckOptions {
    /// Skip coordinates where f(x + eps) or f(x - eps) takes a different
    /// branch of some relu/max than f(x); central differences are invalid there.
    bool skip_kinks = false;
};

/// Compares analytic gradients of `builder()` (a scalar loss built from
/// `inputs`) with central differences (f(x+eps) - f(x-eps)) / (2 eps).
/// Relative error per element is |a - n| / max(1e-8, |a| + |n|).
/// The builder must read `inputs` by handle so perturbations are visible.
template <typename T, typename Builder>
GradCheckResult grad_check(Builder&& builder, std::vector<BasicTensor<T>>& inputs, double eps,
                           GradCheckOptions options = {}) {
    if (eps < 1e-4 || eps > 1e-2) throw std::invalid_argument("grad_check: eps must lie in [1e-4, 1e-2]");
    for (auto& in : inputs) {
        in.set_requires_grad(true);
        in.zero_grad();
    }
    {
        ComputationRecord record;
        BasicTensor<T> loss = builder();
        if (loss.numel() != 1) throw ShapeError("grad_check: loss must be scalar");
        backward(loss);
    }
    std::vector<std::vector<T>> analytic;
    for (auto& in : inputs) analytic.emplace_back(in.grad().begin(), in.grad().end());

    std::uint64_t branches = 0;
    auto evaluate = [&] {
        NoGradScope no_grad;
        BranchFingerprint fingerprint;
        BasicTensor<T> loss = builder();
        if (loss.numel() != 1) throw ShapeError("grad_check: loss must be scalar");
        branches = fingerprint.value();
        return static_cast<double>(loss.item());
    };
    evaluate();
    const std::uint64_t base_branches = branches;

    GradCheckResult result;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto data = inputs[k].data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const T saved = data[i];
            data[i] = static_cast<T>(saved + eps);
            const double plus = evaluate();
            bool kink = branches != base_branches;
            data[i] = static_cast<T>(saved - eps);
            const double minus = evaluate();
            kink = kink || branches != base_branches;
            data[i] = saved;
            if (options.skip_kinks && kink) {
                ++result.skipped;
                continue;
            }
            ++result.checked;
            const double numeric = (plus - minus) / (2.0 * eps);
            const double a = static_cast<double>(analytic[k][i]);
            const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_input = k;
                result.worst_index = i;
                result.analytic = a;
                result.numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace runet
