#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "runet/data.hpp"
#include "runet/model.hpp"

namespace runet {

/// Positive class is malignant.
struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

/// Predicts malignant iff prob >= threshold.
ConfusionMatrix confusion(std::span<const double> probs, std::span<const int> labels, double threshold = 0.5);

struct ClassificationMetrics {
    double accuracy = 0, sensitivity = 0, specificity = 0, f1 = 0;
    std::vector<std::string> degenerate;  // metrics whose denominator was 0 (reported as 0)
};

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

/// 2|P n T| / (|P| + |T|) with P = pred >= threshold; 1 when both are empty.
double dice(std::span<const float> pred, std::span<const std::uint8_t> truth, double threshold = 0.5);
double dice(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);

struct MetricsReport {
    double accuracy = 0, sensitivity = 0, specificity = 0, f1 = 0, dice_mean = 0;
    ConfusionMatrix counts;
    std::size_t n_images = 0;
    std::vector<std::string> degenerate_flags;

    std::string to_json() const;
};

struct SamplePrediction {
    std::string source_id;
    double p_malignant = 0;
    int label = 0;
    double dice = 0;
};

MetricsReport assemble_report(std::span<const SamplePrediction> predictions);

struct Evaluation {
    MetricsReport report;
    std::vector<SamplePrediction> predictions;
};

/// Eval-mode inference over `samples`: classification head for the confusion
/// matrix, segmentation head for per-image Dice (averaged).
Evaluation evaluate(Model& model, std::span<const Sample> samples, std::size_t batch_size = 4);

/// Rounds to 6 significant digits (the precision of every reported float).
double round6(double v);

}  // namespace runet
