#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace runet {

enum class Label { Benign = 0, Malignant = 1 };
enum class Split { Train, Test };

const char* label_name(Label label);
const char* split_name(Split split);
/// Case-insensitive; throws DataError on unknown tokens.
Label parse_label(const std::string& token);
Split parse_split(const std::string& token);

class DataError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct Sample {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> image;         // height * width, values in [0, 1]
    std::vector<std::uint8_t> mask;   // height * width, values in {0, 1}
    Label label = Label::Benign;
    Split split = Split::Train;
    std::string source_id;
};

struct DatasetSummary {
    std::size_t n_total = 0;
    std::size_t n_benign = 0;
    std::size_t n_malignant = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;

    bool operator==(const DatasetSummary&) const = default;
};

DatasetSummary summarize(std::span<const Sample> samples);
std::string summary_json(const DatasetSummary& summary);

struct Dataset {
    std::vector<Sample> samples;
    DatasetSummary summary;

    std::vector<Sample> split(Split which) const;
};

// --- PGM ---------------------------------------------------------------------

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;
};

/// Binary "P5" with maxval 255. Comments in the header are skipped.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

// --- manifest-driven loading -------------------------------------------------

/// Reads `manifest.csv` (header `image,mask,label,split`, paths relative to
/// the directory). Images scale to [0, 1]; mask pixels >= 128 become 1.
Dataset load_dataset(const std::filesystem::path& dir);

// --- synthetic generator -----------------------------------------------------

/// Writes images/, masks/ and manifest.csv under out_dir. Labels alternate
/// benign/malignant within each split. Sample k (train first, then test) draws
/// all randomness from SplitMix64(SplitMix64::derive(seed, k)).
DatasetSummary generate_synthetic(const std::filesystem::path& out_dir, std::size_t n_train, std::size_t n_test,
                                  std::size_t size, std::uint64_t seed);

/// The in-memory sample that generate_synthetic writes for global index k
/// (already quantized to 8 bits and rescaled).
Sample synthesize_sample(std::size_t global_index, std::size_t index_in_split, Split split, std::size_t size,
                         std::uint64_t seed);

// --- augmentation ------------------------------------------------------------

struct AugmentSpec {
    bool flip_h = false;
    bool flip_v = false;
    std::vector<double> blur_sigmas;

    /// flip_h, flip_v, blur(0.5), blur(1.0).
    static AugmentSpec standard();
};

Sample flip_horizontal(const Sample& s);
Sample flip_vertical(const Sample& s);

/// Normalized 1-d Gaussian weights, radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with reflect-101 borders (edge pixel not repeated).
std::vector<float> gaussian_blur(std::span<const float> image, std::size_t height, std::size_t width, double sigma);

/// Original followed by one variant per enabled op. Throws DataError for
/// test-split samples.
std::vector<Sample> augment(const Sample& sample, const AugmentSpec& spec);
std::vector<Sample> augment_all(std::span<const Sample> samples, const AugmentSpec& spec);

}  // namespace runet
