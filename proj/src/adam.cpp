#include <cmath>
#include <stdexcept>

#include "runet/train.hpp"

namespace runet {

void adam_step(std::span<const NamedTensor<float>> active, AdamState& state, const TrainConfig& cfg) {
    for (const auto& nt : active)
        if (!nt.tensor.has_grad()) throw std::logic_error("adam_step: missing grad for active tensor " + nt.name);

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);
    const auto b1 = static_cast<float>(cfg.beta1);
    const auto b2 = static_cast<float>(cfg.beta2);
    const auto step_size = static_cast<float>(cfg.lr / correction1);
    const auto inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(correction2));
    const auto eps = static_cast<float>(cfg.adam_eps);

    for (const auto& nt : active) {
        auto& mom = state.moments[nt.name];
        Tensor handle = nt.tensor;
        auto param = handle.data();
        auto grad = nt.tensor.grad();
        if (mom.m.size() != param.size()) {
            mom.m.assign(param.size(), 0.0f);
            mom.v.assign(param.size(), 0.0f);
        }
        for (std::size_t i = 0; i < param.size(); ++i) {
            const float g = grad[i];
            mom.m[i] = b1 * mom.m[i] + (1.0f - b1) * g;
            mom.v[i] = b2 * mom.v[i] + (1.0f - b2) * g * g;
            // lr * m_hat / (sqrt(v_hat) + eps)
            param[i] -= step_size * mom.m[i] / (std::sqrt(mom.v[i]) * inv_sqrt_c2 + eps);
        }
    }
}

}  // namespace runet
