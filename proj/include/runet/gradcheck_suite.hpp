#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace runet {

struct LayerGradCheck {
    std::string layer;
    double max_rel_error = 0;
};

inline constexpr double kGradCheckEps = 1e-4;
inline constexpr double kGradCheckTolerance = 1e-3;

/// Finite-difference check of every differentiable layer at small shapes in
/// 64-bit, with inputs and parameters drawn from `seed`. The loss for a layer
/// output y is sum(y * R) for a fixed random R (losses are used directly).
std::vector<LayerGradCheck> run_gradcheck_suite(std::uint64_t seed);

}  // namespace runet
