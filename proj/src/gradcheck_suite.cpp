#include "runet/gradcheck_suite.hpp"

#include <functional>

#include "runet/gradcheck.hpp"
#include "runet/layers.hpp"
#include "runet/rng.hpp"
#include "runet/train.hpp"

namespace runet {
namespace {

using T64 = Tensor64;

T64 randn(const Shape& shape, SplitMix64& rng, double scale = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = scale * rng.normal();
    return T64::from(shape, std::move(v));
}

// sum(y * R) with R fixed per call site.
T64 project(const T64& y, const T64& r) { return sum(mul(y, r)); }

double check(std::vector<T64> inputs, const std::function<T64()>& loss) {
    return grad_check<double>(loss, inputs, kGradCheckEps).max_rel_error;
}

}  // namespace

std::vector<LayerGradCheck> run_gradcheck_suite(std::uint64_t seed) {
    std::vector<LayerGradCheck> out;
    std::uint64_t stream = 0;
    auto next_rng = [&] { return SplitMix64(SplitMix64::derive(seed, stream++)); };

    {
        auto rng = next_rng();
        auto x = randn({1, 3, 6, 6}, rng);
        ConvParams<double> p{randn({4, 3, 3, 3}, rng, 0.5), randn({4}, rng)};
        auto r = randn({1, 4, 6, 6}, rng);
        out.push_back({"conv2d", check({x, p.weight, p.bias}, [&] { return project(conv2d(x, p), r); })});
    }
    for (Mode mode : {Mode::Train, Mode::Eval}) {
        auto rng = next_rng();
        auto x = randn({2, 3, 4, 4}, rng);
        auto bn = make_batchnorm<double>(3);
        bn.gamma = randn({3}, rng);
        bn.beta = randn({3}, rng);
        bn.running_mean = randn({3}, rng, 0.3);
        bn.running_var = T64::from({3}, {0.5, 1.5, 2.0});
        auto r = randn({2, 3, 4, 4}, rng);
        out.push_back({mode == Mode::Train ? "batchnorm_train" : "batchnorm_eval",
                       check({x, bn.gamma, bn.beta}, [&] { return project(batchnorm2d(x, bn, mode), r); })});
    }
    {
        auto rng = next_rng();
        auto x = randn({1, 2, 4, 4}, rng);
        auto r = randn({1, 2, 2, 2}, rng);
        out.push_back({"maxpool2x2", check({x}, [&] { return project(maxpool2x2(x), r); })});
    }
    {
        auto rng = next_rng();
        auto x = randn({1, 2, 3, 3}, rng);
        auto r = randn({1, 2, 6, 6}, rng);
        out.push_back({"upsample_nearest2x", check({x}, [&] { return project(upsample_nearest2x(x), r); })});
    }
    {
        auto rng = next_rng();
        auto x = randn({3, 5}, rng);
        DenseParams<double> p{randn({4, 5}, rng), randn({4}, rng)};
        auto r = randn({3, 4}, rng);
        out.push_back({"dense", check({x, p.weight, p.bias}, [&] { return project(dense(x, p), r); })});
    }
    {
        auto rng = next_rng();
        auto x = randn({2, 3, 4, 4}, rng);
        auto r = randn({2, 3}, rng);
        out.push_back({"global_avg_pool", check({x}, [&] { return project(global_avg_pool(x), r); })});
    }
    {
        auto rng = next_rng();
        auto x = randn({1, 4, 4, 4}, rng);
        auto p = make_residual_block<double>(4, rng.next(), rng.next());
        p.bn1.gamma = randn({4}, rng);
        p.bn2.beta = randn({4}, rng);
        auto r = randn({1, 4, 4, 4}, rng);
        out.push_back({"residual_block", check({x, p.conv1.weight, p.conv2.weight, p.bn1.gamma, p.bn2.beta},
                                               [&] { return project(residual_block(x, p, Mode::Train), r); })});
    }
    {
        auto rng = next_rng();
        auto x = randn({1, 8, 4, 4}, rng);
        auto p = make_cbam<double>(8, 8, rng.next(), rng.next(), rng.next());
        p.mlp1.bias = randn({1}, rng);
        p.mlp2.bias = randn({8}, rng);
        p.spatial.bias = randn({1}, rng);
        auto r = randn({1, 8, 4, 4}, rng);
        out.push_back({"cbam", check({x, p.mlp1.weight, p.mlp1.bias, p.mlp2.weight, p.spatial.weight},
                                     [&] { return project(cbam(x, p).refined, r); })});
    }
    {
        auto rng = next_rng();
        auto logits = randn({1, 2, 2, 2}, rng);
        std::vector<double> m(4);
        for (auto& v : m) v = static_cast<double>(rng.next() % 2);
        auto mask = T64::from({1, 2, 2}, m);
        out.push_back({"softmax_seg_loss", check({logits}, [&] { return seg_cross_entropy(softmax_channel(logits), mask); })});
    }
    {
        auto rng = next_rng();
        auto logits = randn({4}, rng);
        const std::vector<int> labels{0, 1, 1, 0};
        out.push_back({"sigmoid_bce", check({logits}, [&] { return bce_loss(sigmoid(logits), labels); })});
    }
    {
        auto rng = next_rng();
        auto a = randn({3, 4}, rng);
        auto b = randn({4, 2}, rng);
        auto r = randn({3, 2}, rng);
        out.push_back({"matmul", check({a, b}, [&] { return project(matmul(a, b), r); })});
    }
    {
        auto rng = next_rng();
        auto x = randn({1, 1, 3, 3}, rng);
        auto r = randn({1, 3, 3, 3}, rng);
        out.push_back({"coordconv_augment", check({x}, [&] { return project(coordconv_augment(x), r); })});
    }
    {
        auto rng = next_rng();
        auto a = randn({1, 2, 2, 2}, rng);
        auto b = randn({1, 3, 2, 2}, rng);
        auto r = randn({1, 5, 2, 2}, rng);
        out.push_back({"concat_channels", check({a, b}, [&] { return project(concat_channels(a, b), r); })});
    }
    {
        auto rng = next_rng();
        auto x = randn({1, 3, 2, 2}, rng);
        auto r = randn({1, 3, 2, 2}, rng);
        out.push_back({"softmax_channel", check({x}, [&] { return project(softmax_channel(x), r); })});
    }
    return out;
}

}  // namespace runet
