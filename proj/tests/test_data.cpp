#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "runet/data.hpp"
#include "runet/metrics.hpp"

using namespace runet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

struct Box {
    std::size_t top = SIZE_MAX, bottom = 0, left = SIZE_MAX, right = 0;
    std::size_t height() const { return bottom - top + 1; }
    std::size_t width() const { return right - left + 1; }
};

Box bounding_box(const Sample& s) {
    Box b;
    for (std::size_t y = 0; y < s.height; ++y)
        for (std::size_t x = 0; x < s.width; ++x)
            if (s.mask[y * s.width + x]) {
                b.top = std::min(b.top, y);
                b.bottom = std::max(b.bottom, y);
                b.left = std::min(b.left, x);
                b.right = std::max(b.right, x);
            }
    return b;
}

void write_manifest(const fs::path& dir, const std::string& body) {
    std::ofstream os(dir / "manifest.csv");
    os << "image,mask,label,split\n" << body;
}

}  // namespace

TEST_CASE("generator summary and determinism") {
    TempDir a("runet_gen_a"), b("runet_gen_b");
    const auto sa = generate_synthetic(a.path, 8, 4, 64, 7);
    const auto sb = generate_synthetic(b.path, 8, 4, 64, 7);
    CHECK(sa == DatasetSummary{12, 6, 6, 8, 4});
    CHECK(summary_json(sa) == R"({"n_total":12,"n_benign":6,"n_malignant":6,"n_train":8,"n_test":4})");
    CHECK(sa == sb);
    std::size_t files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a.path)) {
        if (!entry.is_regular_file()) continue;
        ++files;
        const auto twin = b.path / fs::relative(entry.path(), a.path);
        CHECK(slurp(entry.path()) == slurp(twin));
    }
    CHECK(files == 12 * 2 + 1);
    TempDir c("runet_gen_c");
    generate_synthetic(c.path, 8, 4, 64, 8);
    CHECK(slurp(a.path / "images" / "train_0000.pgm") != slurp(c.path / "images" / "train_0000.pgm"));
}

TEST_CASE("load roundtrips the generator") {
    TempDir d("runet_load");
    const auto summary = generate_synthetic(d.path, 6, 4, 32, 3);
    const auto ds = load_dataset(d.path);
    CHECK(ds.summary == summary);
    CHECK(ds.split(Split::Train).size() == 6);
    for (const auto& s : ds.samples) {
        CHECK(s.image.size() == 32 * 32);
        for (float v : s.image) CHECK((v >= 0.0f && v <= 1.0f));
        for (auto m : s.mask) CHECK(m <= 1);
    }
    // in-memory twin equals the written sample
    const auto twin = synthesize_sample(1, 1, Split::Train, 32, 3);
    CHECK(twin.image == ds.samples[1].image);
    CHECK(twin.mask == ds.samples[1].mask);
    CHECK(twin.label == ds.samples[1].label);
}

TEST_CASE("synthetic class cues hold") {
    for (std::size_t i = 0; i < 40; ++i) {
        const auto s = synthesize_sample(i, i, Split::Train, 64, 11);
        CHECK(s.label == (i % 2 ? Label::Malignant : Label::Benign));
        const auto box = bounding_box(s);
        REQUIRE(box.top != SIZE_MAX);
        CHECK(box.top > 0);
        CHECK(box.left > 0);
        CHECK(box.bottom < 63);
        CHECK(box.right < 63);
        if (s.label == Label::Malignant)
            CHECK(box.height() > box.width());
        else
            CHECK(box.width() >= box.height());
    }
}

TEST_CASE("manifest parsing") {
    TempDir d("runet_manifest");
    generate_synthetic(d.path, 2, 2, 16, 1);
    SUBCASE("labels are case-insensitive") {
        write_manifest(d.path, "images/train_0000.pgm,masks/train_0000.pgm,Malignant,TRAIN\n");
        const auto ds = load_dataset(d.path);
        CHECK(ds.samples.at(0).label == Label::Malignant);
        CHECK(ds.samples.at(0).source_id == "train_0000");
    }
    SUBCASE("unknown label") {
        write_manifest(d.path, "images/train_0000.pgm,masks/train_0000.pgm,cyst,train\n");
        CHECK_THROWS_WITH_AS(load_dataset(d.path), doctest::Contains("unknown label"), DataError);
    }
    SUBCASE("missing file") {
        write_manifest(d.path, "images/nope.pgm,masks/train_0000.pgm,benign,train\n");
        CHECK_THROWS_WITH_AS(load_dataset(d.path), doctest::Contains("missing file"), DataError);
    }
    SUBCASE("size mismatch") {
        write_pgm(d.path / "small.pgm", GrayImage{8, 8, std::vector<std::uint8_t>(64, 255)});
        write_manifest(d.path, "images/train_0000.pgm,small.pgm,benign,train\n");
        CHECK_THROWS_WITH_AS(load_dataset(d.path), doctest::Contains("mask/image size mismatch"), DataError);
    }
    SUBCASE("no manifest") {
        fs::remove(d.path / "manifest.csv");
        CHECK_THROWS_AS(load_dataset(d.path), DataError);
    }
    CHECK(parse_label("BENIGN") == Label::Benign);
    CHECK_THROWS_AS(parse_split("validation"), DataError);
}

TEST_CASE("pgm io") {
    TempDir d("runet_pgm");
    fs::create_directories(d.path);
    GrayImage img{3, 2, {0, 10, 20, 30, 40, 255}};
    write_pgm(d.path / "a.pgm", img);
    CHECK(slurp(d.path / "a.pgm").rfind("P5\n3 2\n255\n", 0) == 0);
    const auto back = read_pgm(d.path / "a.pgm");
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    CHECK(back.pixels == img.pixels);
    {
        std::ofstream os(d.path / "c.pgm", std::ios::binary);
        os << "P5\n# comment\n2 1\n255\n" << '\x05' << '\x06';
    }
    CHECK(read_pgm(d.path / "c.pgm").pixels == std::vector<std::uint8_t>{5, 6});
    {
        std::ofstream os(d.path / "bad.pgm", std::ios::binary);
        os << "P2\n2 1\n255\n5 6\n";
    }
    CHECK_THROWS_AS(read_pgm(d.path / "bad.pgm"), DataError);
}

TEST_CASE("flips") {
    const auto s = synthesize_sample(3, 3, Split::Train, 32, 5);
    const auto h = flip_horizontal(s);
    CHECK(flip_horizontal(h).image == s.image);
    CHECK(flip_horizontal(h).mask == s.mask);
    CHECK(flip_vertical(flip_vertical(s)).image == s.image);
    CHECK(h.image[0] == s.image[31]);
    CHECK(h.mask[5 * 32 + 2] == s.mask[5 * 32 + 29]);
    const auto v = flip_vertical(s);
    CHECK(v.image[0] == s.image[31 * 32]);
    CHECK(h.label == s.label);
    // image and mask move together: the pixels under the mask are the same multiset
    auto under_mask = [](const Sample& x) {
        std::vector<float> v;
        for (std::size_t i = 0; i < x.image.size(); ++i)
            if (x.mask[i]) v.push_back(x.image[i]);
        std::sort(v.begin(), v.end());
        return v;
    };
    CHECK(under_mask(h) == under_mask(s));
    CHECK(under_mask(v) == under_mask(s));
    CHECK(dice(h.mask, s.mask) < 1.0);
}

TEST_CASE("gaussian kernel and blur") {
    for (double sigma : {0.3, 0.5, 1.0, 2.5}) {
        const auto k = gaussian_kernel(sigma);
        CHECK(k.size() == 2 * static_cast<std::size_t>(std::ceil(3 * sigma)) + 1);
        double total = 0;
        for (double w : k) total += w;
        CHECK(std::abs(total - 1) < 1e-6);
    }
    std::vector<float> flat(9 * 9, 0.4f);
    for (float v : gaussian_blur(flat, 9, 9, 1.0)) CHECK(v == doctest::Approx(0.4f).epsilon(1e-6));

    // independent evaluation of the normalized center weight, squared
    auto center = [](double sigma) {
        const int r = static_cast<int>(std::ceil(3 * sigma));
        double total = 0;
        for (int x = -r; x <= r; ++x) total += std::exp(-x * x / (2 * sigma * sigma));
        return std::pow(1.0 / total, 2);
    };
    std::vector<float> impulse(81, 0.0f);
    impulse[40] = 1.0f;
    const auto out = gaussian_blur(impulse, 9, 9, 0.5);
    CHECK(out[40] == doctest::Approx(center(0.5)).epsilon(1e-6));
    CHECK(out[40] == doctest::Approx(0.6186935).epsilon(1e-6));
    CHECK(gaussian_blur(impulse, 9, 9, 1.0)[40] == doctest::Approx(center(1.0)).epsilon(1e-6));
    CHECK_THROWS(gaussian_kernel(0.0));

    const auto s = synthesize_sample(0, 0, Split::Train, 32, 5);
    const auto blurred = gaussian_blur(s.image, 32, 32, 1.0);
    CHECK(blurred.size() == s.image.size());
    for (float v : blurred) CHECK((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("augmentation") {
    const auto s = synthesize_sample(1, 1, Split::Train, 32, 5);
    const auto out = augment(s, AugmentSpec::standard());
    REQUIRE(out.size() == 5);
    CHECK(out[0].image == s.image);
    for (const auto& a : out) {
        CHECK(a.label == s.label);
        CHECK(a.split == Split::Train);
    }
    CHECK(out[3].mask == s.mask);
    CHECK(out[4].mask == s.mask);
    CHECK(out[3].image != s.image);
    CHECK(out[1].source_id == s.source_id + "+flip_h");
    CHECK(augment(s, AugmentSpec{}).size() == 1);

    auto test_sample = s;
    test_sample.split = Split::Test;
    CHECK_THROWS_AS(augment(test_sample, AugmentSpec::standard()), DataError);
    std::vector<Sample> two{s, s};
    CHECK(augment_all(two, AugmentSpec::standard()).size() == 10);
}
