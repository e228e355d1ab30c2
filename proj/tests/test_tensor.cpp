#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "runet/gradcheck.hpp"
#include "runet/ops.hpp"
#include "runet/parallel.hpp"
#include "runet/rng.hpp"

using namespace runet;

TEST_CASE("create fills zeros, constants and explicit values") {
    auto z = Tensor::zeros({2, 3});
    CHECK(z.numel() == 6);
    for (float v : z.data()) CHECK(v == 0.0f);
    auto e = Tensor::from({3}, {1, 2, 3});
    CHECK(e.values() == std::vector<float>{1, 2, 3});
    CHECK(Tensor::constant({2}, 4.5f)[1] == 4.5f);
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({}), ShapeError);
}

TEST_CASE("he_normal variance matches 2/fan_in") {
    auto t = Tensor::create({10000}, HeNormal{42, 9});
    double mean = 0;
    for (float v : t.data()) mean += v;
    mean /= 10000;
    double var = 0;
    for (float v : t.data()) var += (v - mean) * (v - mean);
    var /= 9999;
    CHECK(std::abs(var - 2.0 / 9.0) < 0.1 * 2.0 / 9.0);
    CHECK(std::abs(mean) < 0.02);
}

TEST_CASE("he_normal is seed deterministic and derives fan_in from shape") {
    auto a = Tensor::create({4, 3, 3, 3}, HeNormal{5});
    auto b = Tensor::create({4, 3, 3, 3}, HeNormal{5});
    auto c = Tensor::create({4, 3, 3, 3}, HeNormal{6});
    CHECK(a.values() == b.values());
    CHECK(a.values() != c.values());
    // explicit fan_in 27 draws the same stream as the derived one
    CHECK(Tensor::create({4, 3, 3, 3}, HeNormal{5, 27}).values() == a.values());
}

TEST_CASE("splitmix64 reference values") {
    // Published splitmix64 outputs for seed 1234567.
    SplitMix64 rng(1234567);
    CHECK(rng.next() == 6457827717110365317ULL);
    CHECK(rng.next() == 3203168211198807973ULL);
    CHECK(rng.next() == 9817491932198370423ULL);
}

TEST_CASE("elementwise arithmetic and broadcasting") {
    auto a = Tensor::from({2}, {1, 2});
    auto b = Tensor::from({2}, {3, 4});
    CHECK(add(a, b).values() == std::vector<float>{4, 6});
    CHECK(add(a, Tensor::zeros({2})).values() == a.values());
    CHECK(sub(b, a).values() == std::vector<float>{2, 2});
    CHECK(mul(a, b).values() == std::vector<float>{3, 8});
    auto x = Tensor::from({1, 2, 1, 2}, {1, 2, 3, 4});
    auto per_channel = Tensor::from({2}, {10, 100});
    CHECK(add(x, per_channel).values() == std::vector<float>{11, 12, 103, 104});
    CHECK_THROWS_AS(add(a, Tensor::zeros({3})), ShapeError);
}

TEST_CASE("mul backward uses the cross term") {
    auto a = Tensor::from({1}, {2});
    auto b = Tensor::from({1}, {5});
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    ComputationRecord rec;
    backward(sum(mul(a, b)));
    CHECK(a.grad()[0] == 5.0f);
    CHECK(b.grad()[0] == 2.0f);
    CHECK(rec.size() == 0);
}

TEST_CASE("matmul") {
    auto i2 = Tensor::from({2, 2}, {1, 0, 0, 1});
    auto m = Tensor::from({2, 2}, {1, 2, 3, 4});
    CHECK(matmul(i2, m).values() == m.values());
    CHECK(matmul(m, Tensor::from({2, 1}, {1, 1})).values() == std::vector<float>{3, 7});
    CHECK_THROWS_AS(matmul(m, Tensor::zeros({3, 1})), ShapeError);

    SplitMix64 rng(3);
    std::vector<Tensor64> in{Tensor64::create({3, 4}, HeNormal{1}), Tensor64::create({4, 2}, HeNormal{2})};
    std::vector<double> r(6);
    for (auto& v : r) v = rng.normal();
    auto weights = Tensor64::from({3, 2}, r);
    auto res = grad_check<double>([&] { return sum(mul(matmul(in[0], in[1]), weights)); }, in, 1e-4);
    CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("activations") {
    CHECK(relu(Tensor::from({2}, {-1, 2})).values() == std::vector<float>{0, 2});
    CHECK(sigmoid(Tensor::scalar(0))[0] == 0.5f);
    auto s = softmax_channel(Tensor::from({1, 2, 1, 2}, {3, -1, 3, -1}));
    CHECK(s.values() == std::vector<float>{0.5f, 0.5f, 0.5f, 0.5f});
    CHECK_THROWS_AS(softmax_channel(Tensor::zeros({1, 1, 2, 2})), ShapeError);
}

TEST_CASE("softmax sums to one and ignores per-pixel shifts") {
    SplitMix64 rng(11);
    std::vector<float> logits(2 * 3 * 4 * 4);
    for (auto& v : logits) v = static_cast<float>(rng.normal() * 5);
    auto shifted = logits;
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t p = 0; p < 16; ++p) {
            const float c = static_cast<float>(rng.uniform(-50, 50));
            for (std::size_t ch = 0; ch < 3; ++ch) shifted[(n * 3 + ch) * 16 + p] += c;
        }
    auto a = softmax_channel(Tensor::from({2, 3, 4, 4}, logits));
    auto b = softmax_channel(Tensor::from({2, 3, 4, 4}, shifted));
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t p = 0; p < 16; ++p) {
            double total = 0;
            for (std::size_t ch = 0; ch < 3; ++ch) total += a[(n * 3 + ch) * 16 + p];
            CHECK(std::abs(total - 1.0) < 1e-5);
        }
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-5);
}

TEST_CASE("backward examples") {
    SUBCASE("sum gives ones") {
        auto x = Tensor::from({2, 2}, {1, 2, 3, 4});
        x.set_requires_grad(true);
        ComputationRecord rec;
        backward(sum(x));
        CHECK(std::vector<float>(x.grad().begin(), x.grad().end()) == std::vector<float>{1, 1, 1, 1});
    }
    SUBCASE("relu mask") {
        auto x = Tensor::from({2}, {-1, 2});
        x.set_requires_grad(true);
        ComputationRecord rec;
        backward(sum(relu(x)));
        CHECK(x.grad()[0] == 0.0f);
        CHECK(x.grad()[1] == 1.0f);
    }
    SUBCASE("relu at exactly zero") {
        auto x = Tensor::from({1}, {0});
        x.set_requires_grad(true);
        ComputationRecord rec;
        backward(sum(relu(x)));
        CHECK(x.grad()[0] == 0.0f);
    }
    SUBCASE("sigmoid slope at 0") {
        auto x = Tensor::from({1}, {0});
        x.set_requires_grad(true);
        ComputationRecord rec;
        backward(sum(sigmoid(x)));
        CHECK(x.grad()[0] == doctest::Approx(0.25));
    }
    SUBCASE("tensors off the path get zero grad") {
        auto x = Tensor::from({1}, {3});
        auto unused = Tensor::from({1}, {4});
        x.set_requires_grad(true);
        unused.set_requires_grad(true);
        unused.zero_grad();
        ComputationRecord rec;
        backward(sum(x));
        CHECK(unused.grad()[0] == 0.0f);
    }
}

TEST_CASE("backward errors") {
    auto x = Tensor::from({2}, {1, 2});
    x.set_requires_grad(true);
    CHECK_THROWS(backward(sum(x)));  // no active record
    ComputationRecord rec;
    CHECK_THROWS_AS(backward(relu(x)), ShapeError);
}

TEST_CASE("fan-out accumulates the per-path gradients") {
    auto grad_of = [](int which) {
        auto x = Tensor64::from({3}, {0.5, -1.0, 2.0});
        x.set_requires_grad(true);
        ComputationRecord rec;
        auto path1 = [&] { return sum(mul(x, x)); };
        auto path2 = [&] { return sum(sigmoid(x)); };
        if (which == 0) backward(add(path1(), path2()));
        if (which == 1) backward(path1());
        if (which == 2) backward(path2());
        return std::vector<double>(x.grad().begin(), x.grad().end());
    };
    auto both = grad_of(0), g1 = grad_of(1), g2 = grad_of(2);
    for (std::size_t i = 0; i < 3; ++i) CHECK(both[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-14));
}

TEST_CASE("record bookkeeping") {
    auto x = Tensor::from({2}, {1, 2});
    x.set_requires_grad(true);
    ComputationRecord rec;
    auto y = relu(x);
    auto l = sum(y);
    REQUIRE(rec.size() == 2);
    for (std::size_t i = 0; i < rec.size(); ++i)
        for (auto in : rec.nodes()[i].inputs) CHECK(in < i);
    backward(l);
    CHECK(rec.size() == 0);
    {
        NoGradScope off;
        relu(x);
        CHECK(rec.size() == 0);
    }
}

TEST_CASE("finite checks reject NaN") {
    set_finite_checks(true);
    auto x = Tensor::from({1}, {std::nanf("")});
    CHECK_THROWS_AS(add(x, x), std::domain_error);
    set_finite_checks(false);
    CHECK_NOTHROW(add(x, x));
}

TEST_CASE("grad_check on a linear loss is exact") {
    std::vector<Tensor64> in{Tensor64::from({3}, {1, -2, 0.5})};
    auto res = grad_check<double>([&] { return scale(sum(in[0]), 3.0); }, in, 1e-3);
    CHECK(res.max_rel_error <= 1e-6);
    CHECK_THROWS_AS(grad_check<double>([&] { return sum(in[0]); }, in, 1e-6), std::invalid_argument);
    CHECK_THROWS_AS(grad_check<double>([&] { return relu(in[0]); }, in, 1e-3), ShapeError);
}

TEST_CASE("tensor dump roundtrip and magic check") {
    auto path = std::filesystem::temp_directory_path() / "runet_dump.bin";
    auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6.5f});
    write_tensor_dump(t, path.string());
    auto back = read_tensor_dump(path.string());
    CHECK(back.shape() == t.shape());
    CHECK(back.values() == t.values());
    CHECK(std::filesystem::file_size(path) == 4 + 1 + 2 * 4 + 6 * 4);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_WITH_AS(read_tensor_dump(path.string()), doctest::Contains("bad magic"), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("parallel_for covers every index exactly once") {
    for (std::size_t workers : {1u, 3u, 8u}) {
        set_worker_count(workers);
        std::vector<int> hits(101, 0);
        parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
        for (int h : hits) CHECK(h == 1);
    }
    set_worker_count(0);
}
