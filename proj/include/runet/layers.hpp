#pragma once

#include <cstdint>
#include <tuple>

#include "runet/ops.hpp"
#include "runet/tensor.hpp"

namespace runet {

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// Parameter bundles
// ---------------------------------------------------------------------------

/// Stride-1 "same" convolution, kernel 1, 3 or 7.
template <typename T>
struct ConvParams {
    BasicTensor<T> weight;  // (C_out, C_in, k, k)
    BasicTensor<T> bias;    // (C_out)

    std::size_t out_channels() const { return weight.dim(0); }
    std::size_t in_channels() const { return weight.dim(1); }
    std::size_t kernel() const { return weight.dim(2); }
};

/// He-normal weights (fan_in = C_in * k * k), zero bias.
template <typename T>
ConvParams<T> make_conv(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::uint64_t seed);

template <typename T>
struct BatchNormState {
    BasicTensor<T> gamma;
    BasicTensor<T> beta;
    BasicTensor<T> running_mean;
    BasicTensor<T> running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    std::size_t channels() const { return gamma.numel(); }
};

/// gamma = 1, beta = 0, running mean 0, running var 1.
template <typename T>
BatchNormState<T> make_batchnorm(std::size_t channels);

template <typename T>
struct DenseParams {
    BasicTensor<T> weight;  // (O, F)
    BasicTensor<T> bias;    // (O)
};

template <typename T>
DenseParams<T> make_dense(std::size_t in_features, std::size_t out_features, std::uint64_t seed);

template <typename T>
struct ResidualBlockParams {
    ConvParams<T> conv1, conv2;
    BatchNormState<T> bn1, bn2;
};

template <typename T>
ResidualBlockParams<T> make_residual_block(std::size_t channels, std::uint64_t seed1, std::uint64_t seed2);

inline constexpr std::size_t kCbamReduction = 8;

template <typename T>
struct CbamParams {
    DenseParams<T> mlp1;  // C -> C/r
    DenseParams<T> mlp2;  // C/r -> C
    ConvParams<T> spatial;  // 7x7, 2 -> 1
};

template <typename T>
CbamParams<T> make_cbam(std::size_t channels, std::size_t reduction, std::uint64_t seed1, std::uint64_t seed2,
                        std::uint64_t seed3);

// ---------------------------------------------------------------------------
// Layer ops (all differentiable, NCHW)
// ---------------------------------------------------------------------------

/// Appends two coordinate channels: column then row, each mapped linearly
/// onto [-1, 1] (0 when the extent is 1).
template <typename T>
BasicTensor<T> coordconv_augment(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const ConvParams<T>& p);

/// Non-overlapping 2x2 max; gradient goes to the first maximum in row-major
/// order within each window.
template <typename T>
BasicTensor<T> maxpool2x2(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> upsample_nearest2x(const BasicTensor<T>& x);

/// Train mode normalizes with batch statistics (biased variance) and folds
/// them into the running buffers (unbiased variance); eval mode reads the
/// running buffers and never writes them.
template <typename T>
BasicTensor<T> batchnorm2d(const BasicTensor<T>& x, BatchNormState<T>& s, Mode mode);

/// x W^T + b for x (N, F), W (O, F), b (O).
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& x, const DenseParams<T>& p);

/// (N, C, H, W) -> (N, C) spatial mean.
template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x);

/// (N, C, H, W) -> (N, C) spatial max.
template <typename T>
BasicTensor<T> global_max_pool(const BasicTensor<T>& x);

/// (N, C, H, W) -> (N, 1, H, W) mean / max over channels.
template <typename T>
BasicTensor<T> channel_mean(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> channel_max(const BasicTensor<T>& x);

/// x * s[n, c] broadcast over H, W.
template <typename T>
BasicTensor<T> scale_channels(const BasicTensor<T>& x, const BasicTensor<T>& s);

/// x * s[n, 0, h, w] broadcast over C.
template <typename T>
BasicTensor<T> scale_spatial(const BasicTensor<T>& x, const BasicTensor<T>& s);

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// relu(bn2(conv2(relu(bn1(conv1(x))))) + x)
template <typename T>
BasicTensor<T> residual_block(const BasicTensor<T>& x, ResidualBlockParams<T>& p, Mode mode);

template <typename T>
struct CbamOutput {
    BasicTensor<T> refined;      // N x C x H x W
    BasicTensor<T> channel_map;  // N x C
    BasicTensor<T> spatial_map;  // N x 1 x H x W
};

/// Channel attention then spatial attention, each applied multiplicatively.
template <typename T>
CbamOutput<T> cbam(const BasicTensor<T>& x, const CbamParams<T>& p);

}  // namespace runet
