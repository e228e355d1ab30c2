#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "runet/data.hpp"

namespace runet {
namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    return cells;
}

}  // namespace

const char* label_name(Label label) { return label == Label::Malignant ? "malignant" : "benign"; }
const char* split_name(Split split) { return split == Split::Test ? "test" : "train"; }

Label parse_label(const std::string& token) {
    const auto t = lower(trim(token));
    if (t == "benign") return Label::Benign;
    if (t == "malignant") return Label::Malignant;
    throw DataError("unknown label token '" + token + "'");
}

Split parse_split(const std::string& token) {
    const auto t = lower(trim(token));
    if (t == "train") return Split::Train;
    if (t == "test") return Split::Test;
    throw DataError("unknown split token '" + token + "'");
}

DatasetSummary summarize(std::span<const Sample> samples) {
    DatasetSummary s;
    for (const auto& x : samples) {
        ++s.n_total;
        ++(x.label == Label::Malignant ? s.n_malignant : s.n_benign);
        ++(x.split == Split::Test ? s.n_test : s.n_train);
    }
    return s;
}

std::string summary_json(const DatasetSummary& s) {
    nlohmann::ordered_json j;
    j["n_total"] = s.n_total;
    j["n_benign"] = s.n_benign;
    j["n_malignant"] = s.n_malignant;
    j["n_train"] = s.n_train;
    j["n_test"] = s.n_test;
    return j.dump();
}

std::vector<Sample> Dataset::split(Split which) const {
    std::vector<Sample> out;
    for (const auto& s : samples)
        if (s.split == which) out.push_back(s);
    return out;
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const auto manifest = dir / "manifest.csv";
    std::ifstream is(manifest);
    if (!is) throw DataError("missing file " + manifest.string());
    std::string line;
    if (!std::getline(is, line) || lower(trim(line)) != "image,mask,label,split")
        throw DataError("manifest header must be 'image,mask,label,split': " + manifest.string());

    Dataset ds;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_row(line);
        if (cells.size() != 4)
            throw DataError("manifest row " + std::to_string(row) + " must have 4 columns: " + line);
        const GrayImage img = read_pgm(dir / cells[0]);
        const GrayImage mask = read_pgm(dir / cells[1]);
        if (img.width != mask.width || img.height != mask.height)
            throw DataError("mask/image size mismatch for " + cells[0]);
        Sample s;
        s.height = img.height;
        s.width = img.width;
        s.image.resize(img.pixels.size());
        s.mask.resize(img.pixels.size());
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            s.image[i] = static_cast<float>(img.pixels[i]) / 255.0f;
            s.mask[i] = mask.pixels[i] >= 128 ? 1 : 0;
        }
        s.label = parse_label(cells[2]);
        s.split = parse_split(cells[3]);
        s.source_id = std::filesystem::path(cells[0]).stem().string();
        ds.samples.push_back(std::move(s));
    }
    ds.summary = summarize(ds.samples);
    return ds;
}

}  // namespace runet
