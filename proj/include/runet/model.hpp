#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "runet/layers.hpp"

namespace runet {

struct ModelConfig {
    std::size_t input_channels = 1;
    std::size_t input_size = 128;
    std::vector<std::size_t> encoder_filters{16, 32, 64, 128};
    std::vector<std::size_t> decoder_filters{64, 32, 16, 16};
    std::size_t cbam_reduction = kCbamReduction;
    std::size_t seg_classes = 2;
    std::size_t cls_outputs = 1;

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

inline constexpr std::size_t kStages = 4;

/// One encoder or decoder stage: 3x3 conv + BN + relu, then two residual blocks.
template <typename T>
struct StageBlock {
    ConvParams<T> conv;
    BatchNormState<T> bn;
    std::array<ResidualBlockParams<T>, 2> res;
};

enum class TensorKind { Param, Buffer };

template <typename T>
struct NamedTensor {
    std::string name;
    BasicTensor<T> tensor;  // shares storage with the model
    TensorKind kind;
};

/// Residual U-Net with a segmentation head (decoder + 1x1 conv + softmax) and a
/// classification head (GAP over the CBAM output + dense + sigmoid).
template <typename T>
struct BasicModel {
    ModelConfig config;
    std::array<StageBlock<T>, kStages> encoder;
    CbamParams<T> attention;
    std::array<StageBlock<T>, kStages> decoder;
    ConvParams<T> seg_head;
    DenseParams<T> classifier;

    /// Every parameter and buffer in canonical order: encoder stages, CBAM,
    /// decoder stages, segmentation head, classifier. Within a stage the order
    /// is conv, bn, res1 (conv1, bn1, conv2, bn2), res2; each batch norm lists
    /// gamma, beta, running_mean, running_var.
    std::vector<NamedTensor<T>> named_tensors() const;
    std::vector<NamedTensor<T>> parameters() const;

    BasicModel clone() const;
    template <typename U>
    BasicModel<U> cast() const;
};

using Model = BasicModel<float>;

/// He-normal conv/dense weights; each weight tensor draws from its own
/// SplitMix64 stream derived from (seed, position in canonical order).
template <typename T>
BasicModel<T> build_model(const ModelConfig& config, std::uint64_t seed);

template <typename T>
std::size_t param_count(const BasicModel<T>& model);

/// Trainable scalar count implied by a config, without allocating the model.
std::size_t param_count(const ModelConfig& config);

/// (N, 1, S, S) -> (N, 2, S, S) per-pixel class probabilities; channel 1 is the nodule.
template <typename T>
BasicTensor<T> forward_segmentation(BasicModel<T>& model, const BasicTensor<T>& batch, Mode mode);

/// (N, 1, S, S) -> (N) malignancy probabilities. Never touches the decoder.
template <typename T>
BasicTensor<T> forward_classification(BasicModel<T>& model, const BasicTensor<T>& batch, Mode mode);

template <typename T>
struct DualOutput {
    BasicTensor<T> segmentation;
    BasicTensor<T> classification;
    CbamOutput<T> attention;
};

/// Both heads from one encoder pass.
template <typename T>
DualOutput<T> forward_dual(BasicModel<T>& model, const BasicTensor<T>& batch, Mode mode);

/// Names that belong to the encoder path (coordconv input stages, CBAM, classifier).
bool is_classification_path(const std::string& name);

}  // namespace runet
