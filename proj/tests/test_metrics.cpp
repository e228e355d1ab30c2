#include <doctest.h>

#include <json.hpp>

#include "runet/metrics.hpp"
#include "runet/rng.hpp"

using namespace runet;

namespace {

// Recount from raw (prob, label) pairs with no shared code.
struct Recount {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

Recount recount(const std::vector<double>& probs, const std::vector<int>& labels) {
    Recount r;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool predicted = !(probs[i] < 0.5);
        if (predicted && labels[i]) ++r.tp;
        if (predicted && !labels[i]) ++r.fp;
        if (!predicted && !labels[i]) ++r.tn;
        if (!predicted && labels[i]) ++r.fn;
    }
    return r;
}

double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

double dice_oracle(const std::vector<float>& pred, const std::vector<std::uint8_t>& truth) {
    double inter = 0, p = 0, t = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred[i] >= 0.5f, b = truth[i] != 0;
        inter += a && b;
        p += a;
        t += b;
    }
    return p + t == 0 ? 1.0 : 2 * inter / (p + t);
}

}  // namespace

TEST_CASE("confusion tallies") {
    std::vector<double> probs(99);
    std::vector<int> labels(99);
    for (std::size_t i = 0; i < 99; ++i) {
        labels[i] = i < 82 ? 1 : 0;
        probs[i] = labels[i] ? 0.9 : 0.1;
    }
    CHECK(confusion(probs, labels) == ConfusionMatrix{82, 0, 17, 0});
    const std::vector<double> half{0.5};
    const std::vector<int> neg{0};
    CHECK(confusion(half, neg).fp == 1);
    CHECK(confusion({}, {}) == ConfusionMatrix{});
    const std::vector<int> two{0, 1};
    CHECK_THROWS_AS(confusion(half, two), std::invalid_argument);
}

TEST_CASE("classification metrics") {
    auto perfect = classification_metrics({82, 0, 17, 0});
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.sensitivity == 1.0);
    CHECK(perfect.specificity == 1.0);
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.degenerate.empty());

    auto m = classification_metrics({45, 10, 40, 5});
    CHECK(m.accuracy == doctest::Approx(0.85));
    CHECK(m.sensitivity == doctest::Approx(0.90));
    CHECK(m.specificity == doctest::Approx(0.80));
    CHECK(m.f1 == doctest::Approx(90.0 / 105.0));

    auto none = classification_metrics({0, 3, 7, 0});
    CHECK(none.sensitivity == 0.0);
    CHECK(std::find(none.degenerate.begin(), none.degenerate.end(), "sensitivity") != none.degenerate.end());
}

TEST_CASE("dice") {
    const std::vector<std::uint8_t> a{1, 1, 0, 0}, b{0, 0, 1, 1}, c{1, 0, 1, 0}, empty{0, 0, 0, 0};
    CHECK(dice(a, a) == 1.0);
    CHECK(dice(a, b) == 0.0);
    CHECK(dice(a, c) == 0.5);
    CHECK(dice(empty, empty) == 1.0);
    const std::vector<float> probs{0.7f, 0.5f, 0.49f, 0.0f};
    CHECK(dice(probs, a) == 1.0);
    const std::vector<std::uint8_t> shorter{1};
    CHECK_THROWS_AS(dice(a, shorter), std::invalid_argument);
}

TEST_CASE("metrics agree with a brute-force recount on 1000 random instances") {
    SplitMix64 rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(0, 60));
        std::vector<double> probs(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            // exact threshold values show up now and then
            probs[i] = rng.uniform() < 0.1 ? 0.5 : rng.uniform();
            labels[i] = rng.uniform() < 0.5 ? 1 : 0;
        }
        const auto cm = confusion(probs, labels);
        const auto r = recount(probs, labels);
        REQUIRE(cm.tp == r.tp);
        REQUIRE(cm.fp == r.fp);
        REQUIRE(cm.tn == r.tn);
        REQUIRE(cm.fn == r.fn);
        const auto m = classification_metrics(cm);
        const double total = static_cast<double>(n);
        CHECK(std::abs(m.accuracy - ratio(r.tp + r.tn, total)) <= 1e-12);
        CHECK(std::abs(m.sensitivity - ratio(r.tp, r.tp + r.fn)) <= 1e-12);
        CHECK(std::abs(m.specificity - ratio(r.tn, r.tn + r.fp)) <= 1e-12);
        CHECK(std::abs(m.f1 - ratio(2.0 * r.tp, 2.0 * r.tp + r.fp + r.fn)) <= 1e-12);
        if (r.tp + r.fn > 0 && r.tn + r.fp > 0) {
            CHECK(m.accuracy >= std::min(m.sensitivity, m.specificity) - 1e-12);
            CHECK(m.accuracy <= std::max(m.sensitivity, m.specificity) + 1e-12);
        }

        const auto side = static_cast<std::size_t>(rng.uniform_int(1, 12));
        std::vector<float> pred(side * side);
        std::vector<std::uint8_t> truth(side * side);
        const double density = rng.uniform();
        for (std::size_t i = 0; i < pred.size(); ++i) {
            pred[i] = static_cast<float>(rng.uniform());
            truth[i] = rng.uniform() < density ? 1 : 0;
        }
        const double d = dice(pred, truth);
        CHECK(std::abs(d - dice_oracle(pred, truth)) <= 1e-12);
        CHECK((d >= 0 && d <= 1));
        std::vector<std::uint8_t> binary(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) binary[i] = pred[i] >= 0.5f;
        CHECK(dice(binary, truth) == dice(truth, binary));
    }
}

TEST_CASE("report assembly and json") {
    std::vector<SamplePrediction> preds{{"a", 0.9, 1, 0.8}, {"b", 0.2, 0, 0.6}, {"c", 0.7, 0, 1.0}};
    const auto r = assemble_report(preds);
    CHECK(r.n_images == 3);
    CHECK(r.counts == ConfusionMatrix{1, 1, 1, 0});
    CHECK(r.counts.total() == 3);
    CHECK(r.dice_mean == doctest::Approx(0.8));
    const auto j = nlohmann::ordered_json::parse(r.to_json());
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    CHECK(keys == std::vector<std::string>{"accuracy", "sensitivity", "specificity", "f1", "dice_mean", "tp", "fp",
                                           "tn", "fn", "n_images", "degenerate_flags"});
    CHECK(j["accuracy"].get<double>() == 0.666667);
    CHECK(round6(2.0 / 3.0) == 0.666667);
}

TEST_CASE("oracle predictions give a perfect report") {
    std::vector<SamplePrediction> preds;
    for (int i = 0; i < 10; ++i) preds.push_back({std::to_string(i), i % 2 ? 1.0 : 0.0, i % 2, 1.0});
    const auto r = assemble_report(preds);
    CHECK(r.accuracy == 1.0);
    CHECK(r.dice_mean == 1.0);
}

TEST_CASE("evaluate covers every sample") {
    ModelConfig c;
    c.input_size = 32;
    c.encoder_filters = {8, 8, 8, 8};
    c.decoder_filters = {8, 8, 8, 8};
    auto m = build_model<float>(c, 1);
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < 7; ++i) samples.push_back(synthesize_sample(i, i, Split::Test, 32, 4));
    const auto ev = evaluate(m, samples, 3);
    CHECK(ev.report.n_images == 7);
    CHECK(ev.report.counts.total() == 7);
    REQUIRE(ev.predictions.size() == 7);
    // per-sample results do not depend on how samples are batched
    const auto single = evaluate(m, samples, 1);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(ev.predictions[i].source_id == samples[i].source_id);
        CHECK(std::abs(ev.predictions[i].p_malignant - single.predictions[i].p_malignant) < 1e-6);
        CHECK(std::abs(ev.predictions[i].dice - single.predictions[i].dice) < 1e-6);
    }
    CHECK_THROWS(evaluate(m, std::span<const Sample>{}, 2));
}
