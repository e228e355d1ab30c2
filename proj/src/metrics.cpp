#include "runet/metrics.hpp"

#include <cstdio>
#include <json.hpp>
#include <stdexcept>

#include "runet/train.hpp"

namespace runet {

ConfusionMatrix confusion(std::span<const double> probs, std::span<const int> labels, double threshold) {
    if (probs.size() != labels.size())
        throw std::invalid_argument("confusion: " + std::to_string(probs.size()) + " probabilities vs " +
                                    std::to_string(labels.size()) + " labels");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("confusion: labels must be 0 or 1");
        const bool predicted = probs[i] >= threshold;
        if (labels[i] == 1)
            ++(predicted ? cm.tp : cm.fn);
        else
            ++(predicted ? cm.fp : cm.tn);
    }
    return cm;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
    ClassificationMetrics m;
    auto ratio = [&](std::size_t num, std::size_t den, const char* name) {
        if (den == 0) {
            m.degenerate.emplace_back(name);
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.accuracy = ratio(cm.tp + cm.tn, cm.total(), "accuracy");
    m.sensitivity = ratio(cm.tp, cm.tp + cm.fn, "sensitivity");
    m.specificity = ratio(cm.tn, cm.tn + cm.fp, "specificity");
    m.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn, "f1");
    return m;
}

double dice(std::span<const float> pred, std::span<const std::uint8_t> truth, double threshold) {
    if (pred.size() != truth.size()) throw std::invalid_argument("dice: extent mismatch");
    std::size_t p = 0, t = 0, both = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool pi = pred[i] >= threshold;
        const bool ti = truth[i] != 0;
        p += pi;
        t += ti;
        both += pi && ti;
    }
    if (p + t == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(p + t);
}

double dice(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
    std::vector<float> as_float(pred.begin(), pred.end());
    return dice(as_float, truth, 0.5);
}

double round6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::strtod(buf, nullptr);
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["accuracy"] = round6(accuracy);
    j["sensitivity"] = round6(sensitivity);
    j["specificity"] = round6(specificity);
    j["f1"] = round6(f1);
    j["dice_mean"] = round6(dice_mean);
    j["tp"] = counts.tp;
    j["fp"] = counts.fp;
    j["tn"] = counts.tn;
    j["fn"] = counts.fn;
    j["n_images"] = n_images;
    j["degenerate_flags"] = degenerate_flags;
    return j.dump(2);
}

MetricsReport assemble_report(std::span<const SamplePrediction> predictions) {
    std::vector<double> probs;
    std::vector<int> labels;
    double dice_total = 0;
    for (const auto& p : predictions) {
        probs.push_back(p.p_malignant);
        labels.push_back(p.label);
        dice_total += p.dice;
    }
    MetricsReport r;
    r.counts = confusion(probs, labels);
    const auto m = classification_metrics(r.counts);
    r.accuracy = m.accuracy;
    r.sensitivity = m.sensitivity;
    r.specificity = m.specificity;
    r.f1 = m.f1;
    r.degenerate_flags = m.degenerate;
    r.n_images = predictions.size();
    r.dice_mean = predictions.empty() ? 0.0 : dice_total / static_cast<double>(predictions.size());
    return r;
}

Evaluation evaluate(Model& model, std::span<const Sample> samples, std::size_t batch_size) {
    if (samples.empty()) throw std::invalid_argument("evaluate: empty split");
    if (batch_size == 0) batch_size = 1;
    NoGradScope no_grad;
    Evaluation ev;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        idx.clear();
        for (std::size_t i = start; i < std::min(samples.size(), start + batch_size); ++i) idx.push_back(i);
        auto out = forward_dual(model, batch_images(samples, idx), Mode::Eval);
        const std::size_t plane = samples[idx[0]].height * samples[idx[0]].width;
        auto seg = out.segmentation.data();
        for (std::size_t b = 0; b < idx.size(); ++b) {
            const Sample& s = samples[idx[b]];
            SamplePrediction p;
            p.source_id = s.source_id;
            p.p_malignant = out.classification[b];
            p.label = static_cast<int>(s.label);
            p.dice = dice(seg.subspan((b * model.config.seg_classes + 1) * plane, plane), s.mask);
            ev.predictions.push_back(std::move(p));
        }
    }
    ev.report = assemble_report(ev.predictions);
    return ev;
}

}  // namespace runet
