#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "runet/data.hpp"
#include "runet/model.hpp"

namespace runet {

struct TrainConfig {
    int stage = 1;
    std::size_t epochs = 1;
    std::size_t batch_size = 4;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    double prob_clamp_eps = 1e-7;

    /// lr 1e-3 for stage 1, 1e-4 for stage 2; everything else shared.
    static TrainConfig for_stage(int stage);
    void validate() const;
};

// --- losses ------------------------------------------------------------------

/// -[y ln p + (1 - y) ln(1 - p)] with p clamped to [eps, 1 - eps].
double bce_scalar(double p, int y, double eps = 1e-7);

/// Mean BCE over a batch of probabilities (N) against labels in {0, 1}.
template <typename T>
BasicTensor<T> bce_loss(const BasicTensor<T>& probs, std::span<const int> labels, double eps = 1e-7);

/// Mean over pixels of -ln(clamped probability of the true class).
/// probs: (N, C, H, W); mask: (N, H, W) with values in {0, 1}.
template <typename T>
BasicTensor<T> seg_cross_entropy(const BasicTensor<T>& probs, const BasicTensor<T>& mask, double eps = 1e-7);

// --- optimizer ---------------------------------------------------------------

struct AdamState {
    struct Moments {
        std::vector<float> m, v;
    };
    std::map<std::string, Moments> moments;
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every tensor in `active`. Tensors outside
/// `active` are untouched. Throws std::logic_error if an active tensor has no grad.
void adam_step(std::span<const NamedTensor<float>> active, AdamState& state, const TrainConfig& cfg);

// --- two-stage training ------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;
    double mean_loss = 0;
    double metric = 0;  // mean Dice (stage 1) or accuracy (stage 2)
};

struct TrainHistory {
    int stage = 1;
    std::vector<EpochRecord> epochs;

    /// One JSON object per line: {"epoch","loss","dice"|"accuracy"}.
    std::string to_jsonl() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;
/// Returns true to end training after the given epoch.
using StopPredicate = std::function<bool(const EpochRecord&)>;

/// Stage 1 trains everything; stage 2 trains the encoder stages, CBAM and the
/// classifier only.
std::vector<NamedTensor<float>> active_parameters(const Model& model, int stage);

/// Builds (N, 1, H, W) from the selected samples.
Tensor batch_images(std::span<const Sample> samples, std::span<const std::size_t> indices);
/// Builds (N, H, W) masks with values 0/1.
Tensor batch_masks(std::span<const Sample> samples, std::span<const std::size_t> indices);

/// Segmentation pre-training of all parameters against seg_cross_entropy.
/// Samples are reshuffled every epoch with SplitMix64(derive(seed, epoch)).
TrainHistory train_stage1(Model& model, std::span<const Sample> train, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {}, const StopPredicate& stop_after = {});

/// Classifier fine-tuning from the current (stage-1) weights with BCE on the
/// sigmoid output; decoder and segmentation head stay bitwise unchanged.
TrainHistory train_stage2(Model& model, std::span<const Sample> train, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {}, const StopPredicate& stop_after = {});

}  // namespace runet
