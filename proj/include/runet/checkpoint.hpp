#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "runet/model.hpp"

namespace runet {

class CheckpointError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Checkpoint layout (all integers little-endian):
///   "RUNET1\0" | u8 version (1) | u32 header length | header JSON | payload | u32 CRC-32 of payload
/// The header is a JSON array of {"name","shape","dtype","kind"} in canonical
/// tensor order; the payload is the f32 data of each entry in that order.
struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::string dtype = "f32";
    TensorKind kind = TensorKind::Param;

    bool operator==(const CheckpointEntry&) const = default;
};

inline constexpr std::uint8_t kCheckpointVersion = 1;

std::vector<CheckpointEntry> checkpoint_entries(const Model& model);

/// Returns the number of bytes written.
std::size_t save_checkpoint(const Model& model, const std::string& path);

/// Throws CheckpointError ("bad magic", "crc mismatch", "shape/name mismatch", ...).
Model load_checkpoint(const std::string& path, const ModelConfig& config);

std::vector<CheckpointEntry> read_checkpoint_header(const std::string& path);

/// Reconstructs the architecture from header shapes. input_size cannot be
/// recovered from weights and is set to `input_size`.
ModelConfig config_from_checkpoint(const std::string& path, std::size_t input_size);

/// CRC-32 (hex) over the serialized bytes of every tensor whose name satisfies `select`.
std::string tensor_digest(const Model& model, const std::function<bool(const std::string&)>& select);

}  // namespace runet
