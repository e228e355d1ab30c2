#include <cctype>
#include <fstream>

#include "runet/data.hpp"

namespace runet {
namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& is) {
    std::string tok;
    int ch;
    while ((ch = is.get()) != EOF) {
        if (ch == '#') {
            while ((ch = is.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

std::size_t parse_dim(const std::string& tok, const std::filesystem::path& path) {
    try {
        std::size_t used = 0;
        long v = std::stol(tok, &used);
        if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw DataError("malformed PGM header in " + path.string());
    }
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("missing file " + path.string());
    if (next_token(is) != "P5") throw DataError("not a binary PGM (P5): " + path.string());
    GrayImage img;
    img.width = parse_dim(next_token(is), path);
    img.height = parse_dim(next_token(is), path);
    if (parse_dim(next_token(is), path) != 255) throw DataError("PGM maxval must be 255: " + path.string());
    img.pixels.resize(img.width * img.height);
    is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!is) throw DataError("truncated PGM data in " + path.string());
    return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    if (image.pixels.size() != image.width * image.height) throw DataError("PGM pixel count mismatch");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!os) throw DataError("write failed: " + path.string());
}

}  // namespace runet
