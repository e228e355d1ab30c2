#include "runet/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

namespace runet {
namespace {

constexpr char kMagic[7] = {'R', 'U', 'N', 'E', 'T', '1', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::uint32_t crc32_of(const char* bytes, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes), chunk);
        bytes += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

const char* kind_name(TensorKind k) { return k == TensorKind::Param ? "param" : "buffer"; }

std::string header_json(const std::vector<CheckpointEntry>& entries) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["name"] = e.name;
        j["shape"] = e.shape;
        j["dtype"] = e.dtype;
        j["kind"] = kind_name(e.kind);
        arr.push_back(std::move(j));
    }
    return arr.dump();
}

std::vector<CheckpointEntry> parse_header(const std::string& text) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
    }
    if (!arr.is_array()) throw CheckpointError("malformed checkpoint header: not an array");
    std::vector<CheckpointEntry> entries;
    for (const auto& j : arr) {
        try {
            CheckpointEntry e;
            e.name = j.at("name").get<std::string>();
            e.shape = j.at("shape").get<Shape>();
            e.dtype = j.at("dtype").get<std::string>();
            const auto kind = j.at("kind").get<std::string>();
            if (kind == "param")
                e.kind = TensorKind::Param;
            else if (kind == "buffer")
                e.kind = TensorKind::Buffer;
            else
                throw CheckpointError("unknown tensor kind '" + kind + "'");
            if (e.dtype != "f32") throw CheckpointError("unsupported dtype '" + e.dtype + "'");
            entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw CheckpointError(std::string("malformed checkpoint header entry: ") + ex.what());
        }
    }
    return entries;
}

struct RawCheckpoint {
    std::vector<CheckpointEntry> entries;
    std::vector<char> payload;
};

std::vector<char> read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint " + path);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

template <typename U>
U load_le(const std::vector<char>& buf, std::size_t offset) {
    U v;
    std::memcpy(&v, buf.data() + offset, sizeof(U));
    return v;
}

RawCheckpoint read_raw(const std::string& path, bool with_payload) {
    const auto buf = read_file(path);
    if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("bad magic in " + path);
    std::size_t pos = sizeof(kMagic);
    if (buf.size() < pos + 5) throw CheckpointError("truncated checkpoint " + path);
    const auto version = static_cast<std::uint8_t>(buf[pos]);
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    pos += 1;
    const auto header_len = load_le<std::uint32_t>(buf, pos);
    pos += 4;
    if (buf.size() < pos + header_len) throw CheckpointError("truncated checkpoint header in " + path);
    RawCheckpoint raw;
    raw.entries = parse_header(std::string(buf.data() + pos, header_len));
    pos += header_len;
    if (!with_payload) return raw;

    std::size_t expected = 0;
    for (const auto& e : raw.entries) expected += shape_numel(e.shape) * 4;
    if (buf.size() != pos + expected + 4)
        throw CheckpointError("payload length mismatch in " + path + ": expected " + std::to_string(expected) +
                              " bytes");
    raw.payload.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                       buf.begin() + static_cast<std::ptrdiff_t>(pos + expected));
    const auto stored = load_le<std::uint32_t>(buf, pos + expected);
    if (stored != crc32_of(raw.payload.data(), raw.payload.size()))
        throw CheckpointError("crc mismatch in " + path);
    return raw;
}

}  // namespace

std::vector<CheckpointEntry> checkpoint_entries(const Model& model) {
    std::vector<CheckpointEntry> entries;
    for (const auto& nt : model.named_tensors()) entries.push_back({nt.name, nt.tensor.shape(), "f32", nt.kind});
    return entries;
}

std::size_t save_checkpoint(const Model& model, const std::string& path) {
    const std::string header = header_json(checkpoint_entries(model));
    std::vector<char> payload;
    for (const auto& nt : model.named_tensors()) {
        auto d = nt.tensor.data();
        const auto* bytes = reinterpret_cast<const char*>(d.data());
        payload.insert(payload.end(), bytes, bytes + d.size() * 4);
    }
    const std::uint32_t crc = crc32_of(payload.data(), payload.size());
    const auto header_len = static_cast<std::uint32_t>(header.size());

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    os.put(static_cast<char>(kCheckpointVersion));
    os.write(reinterpret_cast<const char*>(&header_len), 4);
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    os.write(reinterpret_cast<const char*>(&crc), 4);
    if (!os) throw CheckpointError("write failed: " + path);
    return sizeof(kMagic) + 1 + 4 + header.size() + payload.size() + 4;
}

std::vector<CheckpointEntry> read_checkpoint_header(const std::string& path) { return read_raw(path, false).entries; }

Model load_checkpoint(const std::string& path, const ModelConfig& config) {
    auto raw = read_raw(path, true);
    Model model = build_model<float>(config, 0);
    auto tensors = model.named_tensors();
    if (raw.entries.size() != tensors.size())
        throw CheckpointError("shape/name mismatch: checkpoint has " + std::to_string(raw.entries.size()) +
                              " tensors, config expects " + std::to_string(tensors.size()));
    std::size_t offset = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& e = raw.entries[i];
        auto& nt = tensors[i];
        if (e.name != nt.name || e.shape != nt.tensor.shape() || e.kind != nt.kind)
            throw CheckpointError("shape/name mismatch at entry " + std::to_string(i) + ": checkpoint has " + e.name +
                                  " " + shape_str(e.shape) + ", config expects " + nt.name + " " +
                                  shape_str(nt.tensor.shape()));
        auto d = nt.tensor.data();
        std::memcpy(d.data(), raw.payload.data() + offset, d.size() * 4);
        offset += d.size() * 4;
    }
    return model;
}

ModelConfig config_from_checkpoint(const std::string& path, std::size_t input_size) {
    const auto entries = read_checkpoint_header(path);
    auto find = [&](const std::string& name) -> const Shape& {
        for (const auto& e : entries)
            if (e.name == name) return e.shape;
        throw CheckpointError("checkpoint lacks tensor " + name);
    };
    ModelConfig cfg;
    cfg.input_size = input_size;
    for (std::size_t i = 0; i < kStages; ++i) {
        cfg.encoder_filters[i] = find("enc" + std::to_string(i + 1) + ".conv.weight")[0];
        cfg.decoder_filters[i] = find("dec" + std::to_string(i + 1) + ".conv.weight")[0];
    }
    cfg.input_channels = find("enc1.conv.weight")[1] - 2;
    cfg.cbam_reduction = cfg.encoder_filters[3] / find("cbam.mlp1.weight")[0];
    cfg.seg_classes = find("seg_head.weight")[0];
    cfg.cls_outputs = find("classifier.weight")[0];
    cfg.validate();
    return cfg;
}

std::string tensor_digest(const Model& model, const std::function<bool(const std::string&)>& select) {
    uLong crc = crc32(0L, Z_NULL, 0);
    for (const auto& nt : model.named_tensors()) {
        if (!select(nt.name)) continue;
        auto d = nt.tensor.data();
        crc = crc32(crc, reinterpret_cast<const Bytef*>(d.data()), static_cast<uInt>(d.size() * 4));
    }
    std::ostringstream os;
    os << std::hex << std::setw(8) << std::setfill('0') << static_cast<std::uint32_t>(crc);
    return os.str();
}

}  // namespace runet
