#include <cmath>
#include <sstream>

#include "runet/data.hpp"

namespace runet {
namespace {

// Reflect-101 index into [0, n).
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) return 0;
    const auto period = static_cast<std::ptrdiff_t>(2 * n - 2);
    i %= period;
    if (i < 0) i += period;
    if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
    return static_cast<std::size_t>(i);
}

std::string sigma_tag(double sigma) {
    std::ostringstream os;
    os << sigma;
    return os.str();
}

}  // namespace

AugmentSpec AugmentSpec::standard() { return {true, true, {0.5, 1.0}}; }

Sample flip_horizontal(const Sample& s) {
    Sample out = s;
    for (std::size_t y = 0; y < s.height; ++y)
        for (std::size_t x = 0; x < s.width; ++x) {
            out.image[y * s.width + x] = s.image[y * s.width + (s.width - 1 - x)];
            out.mask[y * s.width + x] = s.mask[y * s.width + (s.width - 1 - x)];
        }
    out.source_id = s.source_id + "+flip_h";
    return out;
}

Sample flip_vertical(const Sample& s) {
    Sample out = s;
    for (std::size_t y = 0; y < s.height; ++y)
        for (std::size_t x = 0; x < s.width; ++x) {
            out.image[y * s.width + x] = s.image[(s.height - 1 - y) * s.width + x];
            out.mask[y * s.width + x] = s.mask[(s.height - 1 - y) * s.width + x];
        }
    out.source_id = s.source_id + "+flip_v";
    return out;
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0)) throw std::invalid_argument("blur sigma must be > 0");
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
    double total = 0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const double v = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
        w[static_cast<std::size_t>(k + radius)] = v;
        total += v;
    }
    for (auto& v : w) v /= total;
    return w;
}

std::vector<float> gaussian_blur(std::span<const float> image, std::size_t height, std::size_t width, double sigma) {
    if (image.size() != height * width) throw std::invalid_argument("gaussian_blur: image size mismatch");
    const auto w = gaussian_kernel(sigma);
    const auto radius = static_cast<std::ptrdiff_t>(w.size() / 2);
    std::vector<double> tmp(image.size());
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            double acc = 0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k)
                acc += w[static_cast<std::size_t>(k + radius)] *
                       image[y * width + reflect(static_cast<std::ptrdiff_t>(x) + k, width)];
            tmp[y * width + x] = acc;
        }
    std::vector<float> out(image.size());
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            double acc = 0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k)
                acc += w[static_cast<std::size_t>(k + radius)] *
                       tmp[reflect(static_cast<std::ptrdiff_t>(y) + k, height) * width + x];
            out[y * width + x] = static_cast<float>(acc);
        }
    return out;
}

std::vector<Sample> augment(const Sample& sample, const AugmentSpec& spec) {
    if (sample.split == Split::Test) throw DataError("refusing to augment test-split sample " + sample.source_id);
    std::vector<Sample> out{sample};
    if (spec.flip_h) out.push_back(flip_horizontal(sample));
    if (spec.flip_v) out.push_back(flip_vertical(sample));
    for (double sigma : spec.blur_sigmas) {
        Sample b = sample;
        b.image = gaussian_blur(sample.image, sample.height, sample.width, sigma);
        b.source_id = sample.source_id + "+blur" + sigma_tag(sigma);
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<Sample> augment_all(std::span<const Sample> samples, const AugmentSpec& spec) {
    std::vector<Sample> out;
    for (const auto& s : samples) {
        auto variants = augment(s, spec);
        out.insert(out.end(), std::make_move_iterator(variants.begin()), std::make_move_iterator(variants.end()));
    }
    return out;
}

}  // namespace runet
