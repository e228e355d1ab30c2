#include "runet/train.hpp"

#include <json.hpp>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "runet/metrics.hpp"
#include "runet/rng.hpp"

namespace runet {

TrainConfig TrainConfig::for_stage(int stage) {
    TrainConfig cfg;
    cfg.stage = stage;
    cfg.lr = stage == 2 ? 1e-4 : 1e-3;
    return cfg;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid train config: " + what); };
    if (stage != 1 && stage != 2) fail("stage must be 1 or 2");
    if (epochs == 0) fail("epochs must be positive");
    if (batch_size == 0) fail("batch_size must be positive");
    if (!(lr > 0)) fail("lr must be > 0");
    if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) fail("betas must lie in (0, 1)");
    if (!(adam_eps > 0)) fail("adam_eps must be > 0");
    if (!(prob_clamp_eps > 0 && prob_clamp_eps < 0.5)) fail("prob_clamp_eps must lie in (0, 0.5)");
}

std::string TrainHistory::to_jsonl() const {
    std::ostringstream os;
    for (const auto& e : epochs) {
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        j["loss"] = round6(e.mean_loss);
        j[stage == 1 ? "dice" : "accuracy"] = round6(e.metric);
        os << j.dump() << '\n';
    }
    return os.str();
}

std::vector<NamedTensor<float>> active_parameters(const Model& model, int stage) {
    std::vector<NamedTensor<float>> out;
    for (auto& nt : model.parameters())
        if (stage == 1 || is_classification_path(nt.name)) out.push_back(std::move(nt));
    return out;
}

Tensor batch_images(std::span<const Sample> samples, std::span<const std::size_t> indices) {
    if (indices.empty()) throw std::invalid_argument("batch_images: empty batch");
    const std::size_t H = samples[indices[0]].height, W = samples[indices[0]].width;
    std::vector<float> values;
    values.reserve(indices.size() * H * W);
    for (std::size_t i : indices) {
        const auto& s = samples[i];
        if (s.height != H || s.width != W) throw std::invalid_argument("batch_images: mixed image sizes");
        values.insert(values.end(), s.image.begin(), s.image.end());
    }
    return Tensor::from({indices.size(), 1, H, W}, std::move(values));
}

Tensor batch_masks(std::span<const Sample> samples, std::span<const std::size_t> indices) {
    if (indices.empty()) throw std::invalid_argument("batch_masks: empty batch");
    const std::size_t H = samples[indices[0]].height, W = samples[indices[0]].width;
    std::vector<float> values;
    values.reserve(indices.size() * H * W);
    for (std::size_t i : indices) {
        const auto& s = samples[i];
        if (s.height != H || s.width != W) throw std::invalid_argument("batch_masks: mixed mask sizes");
        for (auto m : s.mask) values.push_back(m ? 1.0f : 0.0f);
    }
    return Tensor::from({indices.size(), H, W}, std::move(values));
}

namespace {

void shuffle(std::vector<std::size_t>& order, std::uint64_t seed, std::size_t epoch) {
    SplitMix64 rng(SplitMix64::derive(seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.next() % i);
        std::swap(order[i - 1], order[j]);
    }
}

// Shared epoch/batch loop. `step` runs forward + backward for one batch and
// returns (summed loss over the batch, summed metric over the batch).
template <typename StepFn>
TrainHistory run_training(Model& model, std::span<const Sample> train, const TrainConfig& cfg, int stage,
                          StepFn&& step, const EpochCallback& on_epoch, const StopPredicate& stop_after) {
    cfg.validate();
    if (cfg.stage != stage)
        throw std::invalid_argument("train_stage" + std::to_string(stage) + " called with stage " +
                                    std::to_string(cfg.stage) + " config");
    if (train.empty()) throw std::invalid_argument("training split is empty");

    auto active = active_parameters(model, stage);
    for (auto& nt : model.parameters()) nt.tensor.set_requires_grad(false);
    for (auto& nt : active) nt.tensor.set_requires_grad(true);

    AdamState adam;
    TrainHistory history;
    history.stage = stage;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle(order, cfg.seed, epoch);
        double loss_total = 0, metric_total = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::span<const std::size_t> idx(order.data() + start, end - start);
            for (auto& nt : active) nt.tensor.zero_grad();
            auto [loss_sum, metric_sum] = step(idx);
            adam_step(active, adam, cfg);
            loss_total += loss_sum;
            metric_total += metric_sum;
        }
        EpochRecord rec{epoch, loss_total / static_cast<double>(train.size()),
                        metric_total / static_cast<double>(train.size())};
        history.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (stop_after && stop_after(rec)) break;
    }
    for (auto& nt : active) nt.tensor.clear_grad();
    return history;
}

}  // namespace

TrainHistory train_stage1(Model& model, std::span<const Sample> train, const TrainConfig& cfg,
                          const EpochCallback& on_epoch, const StopPredicate& stop_after) {
    for (const auto& s : train)
        if (s.mask.size() != s.height * s.width) throw std::invalid_argument("stage 1 needs masks for every sample");
    auto step = [&](std::span<const std::size_t> idx) {
        ComputationRecord record;
        auto images = batch_images(train, idx);
        auto masks = batch_masks(train, idx);
        auto probs = forward_segmentation(model, images, Mode::Train);
        auto loss = seg_cross_entropy(probs, masks, cfg.prob_clamp_eps);
        backward(loss);

        const std::size_t plane = images.dim(2) * images.dim(3);
        const std::size_t classes = probs.dim(1);
        double dice_sum = 0;
        for (std::size_t b = 0; b < idx.size(); ++b)
            dice_sum += dice(probs.data().subspan((b * classes + 1) * plane, plane), train[idx[b]].mask);
        return std::pair{static_cast<double>(loss.item()) * static_cast<double>(idx.size()), dice_sum};
    };
    return run_training(model, train, cfg, 1, step, on_epoch, stop_after);
}

TrainHistory train_stage2(Model& model, std::span<const Sample> train, const TrainConfig& cfg,
                          const EpochCallback& on_epoch, const StopPredicate& stop_after) {
    auto step = [&](std::span<const std::size_t> idx) {
        ComputationRecord record;
        auto images = batch_images(train, idx);
        std::vector<int> labels;
        for (std::size_t i : idx) labels.push_back(static_cast<int>(train[i].label));
        auto probs = forward_classification(model, images, Mode::Train);
        auto loss = bce_loss(probs, labels, cfg.prob_clamp_eps);
        backward(loss);

        double correct = 0;
        for (std::size_t b = 0; b < idx.size(); ++b) correct += (probs[b] >= 0.5f) == (labels[b] == 1);
        return std::pair{static_cast<double>(loss.item()) * static_cast<double>(idx.size()), correct};
    };
    return run_training(model, train, cfg, 2, step, on_epoch, stop_after);
}

}  // namespace runet
