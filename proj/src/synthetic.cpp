// Deterministic stand-in for ultrasound nodule images.
//
// Background: multiplicative speckle (exponential noise, 3x3 box-smoothed) on a
// depth-dependent gain ramp. Benign: smooth ellipse, width >= height, interior
// gain 0.75. Malignant: ellipse with a radially perturbed boundary, height >
// width, interior gain 0.45 and 3..8 bright speckle dots.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "runet/data.hpp"
#include "runet/rng.hpp"

namespace runet {
namespace {

struct Nodule {
    double cx, cy;     // center (pixels)
    double ax, ay;     // horizontal / vertical semi-axes (pixels)
    double amp[3];     // radial harmonics 3, 5, 7 (malignant only)
    double phase[3];
};

bool inside(const Nodule& n, bool irregular, double x, double y) {
    const double u = (x - n.cx) / n.ax;
    const double v = (y - n.cy) / n.ay;
    const double rho = std::sqrt(u * u + v * v);
    if (!irregular) return rho <= 1.0;
    const double theta = std::atan2(v, u);
    double r = 1.0;
    for (int k = 0; k < 3; ++k) r += n.amp[k] * std::sin((3.0 + 2.0 * k) * theta + n.phase[k]);
    return rho <= r;
}

struct Extent {
    std::size_t width = 0, height = 0, area = 0;
    bool touches_border = false;
};

Extent measure(const std::vector<std::uint8_t>& mask, std::size_t size) {
    std::size_t x0 = size, x1 = 0, y0 = size, y1 = 0;
    Extent e;
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x)
            if (mask[y * size + x]) {
                ++e.area;
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
    if (e.area == 0) return e;
    e.width = x1 - x0 + 1;
    e.height = y1 - y0 + 1;
    e.touches_border = x0 == 0 || y0 == 0 || x1 + 1 == size || y1 + 1 == size;
    return e;
}

std::string sample_name(Split split, std::size_t index) {
    std::ostringstream os;
    os << split_name(split) << '_' << std::setw(4) << std::setfill('0') << index;
    return os.str();
}

}  // namespace

Sample synthesize_sample(std::size_t global_index, std::size_t index_in_split, Split split, std::size_t size,
                         std::uint64_t seed) {
    if (size < 16) throw DataError("synthetic images must be at least 16 pixels wide");
    SplitMix64 rng(SplitMix64::derive(seed, global_index));
    const bool malignant = index_in_split % 2 == 1;
    const double S = static_cast<double>(size);
    const std::size_t n = size * size;

    // Speckle field.
    std::vector<double> noise(n);
    for (auto& v : noise) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        v = -std::log(u);
    }
    std::vector<double> image(n);
    const double gain_top = rng.uniform(0.40, 0.50);
    const double gain_bottom = rng.uniform(0.55, 0.70);
    for (std::size_t y = 0; y < size; ++y) {
        const double gain = gain_top + (gain_bottom - gain_top) * static_cast<double>(y) / (S - 1.0);
        for (std::size_t x = 0; x < size; ++x) {
            double acc = 0;
            int count = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
                    const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
                    if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(size) ||
                        xx >= static_cast<std::ptrdiff_t>(size))
                        continue;
                    acc += noise[static_cast<std::size_t>(yy) * size + static_cast<std::size_t>(xx)];
                    ++count;
                }
            image[y * size + x] = gain * (0.7 + 0.3 * acc / count);
        }
    }

    // Nodule shape, redrawn until the rasterized mask honours the class cue.
    Nodule nod{};
    std::vector<std::uint8_t> mask(n);
    for (int attempt = 0;; ++attempt) {
        if (attempt > 1000) throw DataError("synthetic generator failed to place a nodule");
        nod.cx = rng.uniform(0.35, 0.65) * S;
        nod.cy = rng.uniform(0.35, 0.65) * S;
        if (malignant) {
            nod.ax = rng.uniform(0.10, 0.15) * S;
            nod.ay = nod.ax * rng.uniform(1.5, 1.8);
            for (int k = 0; k < 3; ++k) {
                nod.amp[k] = rng.uniform(0.03, 0.06);
                nod.phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
            }
        } else {
            nod.ax = rng.uniform(0.14, 0.22) * S;
            nod.ay = nod.ax * rng.uniform(0.6, 0.9);
        }
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x)
                mask[y * size + x] = inside(nod, malignant, static_cast<double>(x), static_cast<double>(y)) ? 1 : 0;
        const Extent e = measure(mask, size);
        if (e.area == 0 || e.touches_border) continue;
        if (malignant ? e.height > e.width : e.width >= e.height) break;
    }

    const double interior = malignant ? 0.45 : 0.75;
    for (std::size_t i = 0; i < n; ++i)
        if (mask[i]) image[i] *= interior;

    if (malignant) {
        const auto dots = rng.uniform_int(3, 8);
        for (std::int64_t d = 0; d < dots; ++d) {
            std::size_t px = 0, py = 0;
            do {
                px = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(size) - 1));
                py = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(size) - 1));
            } while (!mask[py * size + px]);
            const double level = rng.uniform(0.85, 1.0);
            image[py * size + px] = level;
            if (px + 1 < size && mask[py * size + px + 1]) image[py * size + px + 1] = level;
            if (py + 1 < size && mask[(py + 1) * size + px]) image[(py + 1) * size + px] = level;
        }
    }

    Sample s;
    s.height = size;
    s.width = size;
    s.image.resize(n);
    s.mask = std::move(mask);
    for (std::size_t i = 0; i < n; ++i) {
        const auto q = static_cast<std::uint8_t>(std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));
        s.image[i] = static_cast<float>(q) / 255.0f;
    }
    s.label = malignant ? Label::Malignant : Label::Benign;
    s.split = split;
    s.source_id = sample_name(split, index_in_split);
    return s;
}

DatasetSummary generate_synthetic(const std::filesystem::path& out_dir, std::size_t n_train, std::size_t n_test,
                                  std::size_t size, std::uint64_t seed) {
    if (n_train < 2 || n_test < 2) throw DataError("n_train and n_test must each be >= 2");
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    std::filesystem::create_directories(out_dir / "masks", ec);
    if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

    std::ofstream manifest(out_dir / "manifest.csv", std::ios::binary | std::ios::trunc);
    if (!manifest) throw DataError("cannot write " + (out_dir / "manifest.csv").string());
    manifest << "image,mask,label,split\n";

    std::vector<Sample> written;
    std::size_t global = 0;
    for (Split split : {Split::Train, Split::Test}) {
        const std::size_t count = split == Split::Train ? n_train : n_test;
        for (std::size_t i = 0; i < count; ++i, ++global) {
            Sample s = synthesize_sample(global, i, split, size, seed);
            GrayImage img{size, size, std::vector<std::uint8_t>(size * size)};
            GrayImage msk{size, size, std::vector<std::uint8_t>(size * size)};
            for (std::size_t p = 0; p < size * size; ++p) {
                img.pixels[p] = static_cast<std::uint8_t>(std::lround(s.image[p] * 255.0f));
                msk.pixels[p] = s.mask[p] ? 255 : 0;
            }
            const std::string image_rel = "images/" + s.source_id + ".pgm";
            const std::string mask_rel = "masks/" + s.source_id + ".pgm";
            write_pgm(out_dir / image_rel, img);
            write_pgm(out_dir / mask_rel, msk);
            manifest << image_rel << ',' << mask_rel << ',' << label_name(s.label) << ',' << split_name(split) << '\n';
            s.image.clear();
            s.mask.clear();
            written.push_back(std::move(s));
        }
    }
    if (!manifest) throw DataError("write failed: manifest.csv");
    return summarize(written);
}

}  // namespace runet
