#include <doctest.h>

#include <cmath>

#include "runet/gradcheck.hpp"
#include "runet/train.hpp"

using namespace runet;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.input_size = 32;
    c.encoder_filters = {8, 8, 8, 8};
    c.decoder_filters = {8, 8, 8, 8};
    return c;
}

std::vector<Sample> tiny_samples(std::size_t n, std::uint64_t seed) {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(synthesize_sample(i, i, Split::Train, 32, seed));
    return out;
}

std::vector<std::vector<float>> snapshot(const Model& m) {
    std::vector<std::vector<float>> out;
    for (const auto& nt : m.named_tensors()) out.push_back(nt.tensor.values());
    return out;
}

}  // namespace

TEST_CASE("bce_scalar") {
    CHECK(bce_scalar(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_scalar(1.0, 1) == doctest::Approx(-std::log1p(-1e-7)).epsilon(1e-9));
    CHECK(bce_scalar(1.0, 1) < 2e-7);
    CHECK(bce_scalar(1e-7, 1) == doctest::Approx(16.1181).epsilon(1e-5));
    CHECK(bce_scalar(0.0, 1) == bce_scalar(1e-7, 1));
    CHECK(bce_scalar(0.2, 0) == doctest::Approx(-std::log(0.8)));
    CHECK_THROWS_AS(bce_scalar(0.5, 2), std::invalid_argument);
    for (double p = 0; p <= 1.0; p += 0.01) {
        CHECK(bce_scalar(p, 0) >= 0);
        CHECK(bce_scalar(p, 1) >= 0);
    }
}

TEST_CASE("bce_loss averages over the batch") {
    auto p = Tensor64::from({2}, {0.5, 0.2});
    std::vector<int> y{1, 0};
    CHECK(bce_loss(p, y).item() == doctest::Approx((std::log(2.0) - std::log(0.8)) / 2));
    std::vector<int> short_labels{1};
    CHECK_THROWS_AS(bce_loss(p, short_labels), ShapeError);
}

TEST_CASE("seg_cross_entropy") {
    auto mask = Tensor::from({1, 2, 2}, {0, 1, 1, 0});
    auto onehot = Tensor::from({1, 2, 2, 2}, {1, 0, 0, 1, 0, 1, 1, 0});
    CHECK(seg_cross_entropy(onehot, mask).item() == doctest::Approx(1e-7).epsilon(1e-3));
    auto uniform = Tensor::constant({1, 2, 2, 2}, 0.5f);
    CHECK(seg_cross_entropy(uniform, mask).item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK_THROWS_AS(seg_cross_entropy(uniform, Tensor::from({1, 2, 2}, {0, 2, 1, 0})), std::invalid_argument);
    CHECK_THROWS_AS(seg_cross_entropy(uniform, Tensor::zeros({1, 3, 2})), ShapeError);
}

TEST_CASE("softmax + segmentation loss gradient") {
    std::vector<Tensor64> in{Tensor64::from({1, 2, 2, 2}, {0.3, -1.2, 2.0, 0.1, -0.4, 0.9, -2.2, 0.05})};
    auto mask = Tensor64::from({1, 2, 2}, {1, 0, 1, 1});
    auto res = grad_check<double>([&] { return seg_cross_entropy(softmax_channel(in[0]), mask); }, in, 1e-4);
    CHECK(res.max_rel_error < 1e-3);
}

TEST_CASE("adam first steps match the closed form") {
    TrainConfig cfg;
    auto w = Tensor::from({3}, {1.0f, -2.0f, 0.5f});
    w.set_requires_grad(true);
    std::vector<NamedTensor<float>> active{{"w", w, TensorKind::Param}};
    AdamState state;

    SUBCASE("zero gradient is a fixed point") {
        w.zero_grad();
        for (int i = 0; i < 3; ++i) adam_step(active, state, cfg);
        CHECK(w.values() == std::vector<float>{1.0f, -2.0f, 0.5f});
        CHECK(state.step == 3);
    }
    SUBCASE("constant gradient moves each step by about lr") {
        const std::vector<float> g{0.5f, -3.0f, 1e-3f};
        for (int step = 0; step < 2; ++step) {
            const auto before = w.values();
            w.zero_grad();
            for (std::size_t i = 0; i < 3; ++i) w.grad()[i] = g[i];
            adam_step(active, state, cfg);
            for (std::size_t i = 0; i < 3; ++i) {
                const double delta = before[i] - w[i];
                if (step == 0) {
                    const double expected = cfg.lr * g[i] / (std::abs(g[i]) + cfg.adam_eps);
                    CHECK(delta == doctest::Approx(expected).epsilon(1e-4));
                }
                CHECK(std::abs(std::abs(delta) - cfg.lr) < 0.01 * cfg.lr);
            }
        }
    }
    SUBCASE("missing gradient") {
        w.clear_grad();
        CHECK_THROWS_AS(adam_step(active, state, cfg), std::logic_error);
    }
}

TEST_CASE("train config validation") {
    CHECK(TrainConfig::for_stage(1).lr == 1e-3);
    CHECK(TrainConfig::for_stage(2).lr == 1e-4);
    TrainConfig bad;
    bad.lr = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {};
    bad.beta2 = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {};
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("stage 1 lowers the loss and is reproducible") {
    auto samples = tiny_samples(4, 2);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.seed = 5;
    cfg.batch_size = 2;
    auto run = [&] {
        auto m = build_model<float>(tiny_config(), cfg.seed);
        auto h = train_stage1(m, samples, cfg);
        return std::make_pair(h, snapshot(m));
    };
    auto [h1, w1] = run();
    auto [h2, w2] = run();
    REQUIRE(h1.epochs.size() == 6);
    CHECK(h1.epochs.back().mean_loss < h1.epochs.front().mean_loss);
    CHECK(h1.to_jsonl() == h2.to_jsonl());
    CHECK(w1 == w2);
    CHECK(h1.to_jsonl().rfind(R"({"epoch":1,"loss":)", 0) == 0);
}

TEST_CASE("stage 2 trains the encoder and leaves the decoder alone") {
    auto samples = tiny_samples(4, 3);
    auto m = build_model<float>(tiny_config(), 1);
    TrainConfig s1;
    s1.epochs = 1;
    train_stage1(m, samples, s1);
    const auto before = m.clone();
    TrainConfig s2 = TrainConfig::for_stage(2);
    s2.epochs = 2;
    std::vector<std::string> epochs_seen;
    auto h = train_stage2(m, samples, s2, [&](const EpochRecord& r) { epochs_seen.push_back(std::to_string(r.epoch)); });
    CHECK(epochs_seen == std::vector<std::string>{"1", "2"});
    CHECK(h.to_jsonl().find("accuracy") != std::string::npos);
    auto a = before.named_tensors(), b = m.named_tensors();
    bool encoder_moved = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CAPTURE(a[i].name);
        if (is_classification_path(a[i].name)) {
            encoder_moved = encoder_moved || a[i].tensor.values() != b[i].tensor.values();
        } else {
            CHECK(a[i].tensor.values() == b[i].tensor.values());
        }
    }
    CHECK(encoder_moved);
}

TEST_CASE("training preconditions") {
    auto m = build_model<float>(tiny_config(), 1);
    TrainConfig cfg;
    std::vector<Sample> none;
    CHECK_THROWS(train_stage1(m, none, cfg));
    cfg.stage = 2;
    CHECK_THROWS(train_stage1(m, tiny_samples(2, 1), cfg));
}

TEST_CASE("active parameter sets") {
    auto m = build_model<float>(tiny_config(), 1);
    const auto all = m.parameters();
    CHECK(active_parameters(m, 1).size() == all.size());
    const auto s2 = active_parameters(m, 2);
    CHECK(s2.size() < all.size());
    for (const auto& nt : s2) CHECK(is_classification_path(nt.name));
    bool has_cbam = false, has_classifier = false;
    for (const auto& nt : s2) {
        has_cbam = has_cbam || nt.name.rfind("cbam.", 0) == 0;
        has_classifier = has_classifier || nt.name.rfind("classifier.", 0) == 0;
    }
    CHECK(has_cbam);
    CHECK(has_classifier);
}
