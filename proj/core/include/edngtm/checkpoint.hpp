#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edngtm/tensor.hpp"

namespace edngtm {

/// Contents of an EDNW file: named f32 tensors plus string metadata.
///
/// Layout (little-endian):
///   "EDNW" | u32 version | u32 manifest_length | manifest | payload
/// The manifest is UTF-8 JSON:
///   {"meta": {key: value, ...},
///    "tensors": [{"name", "shape", "dtype": "f32", "offset"}, ...]}
/// where offset is relative to the first payload byte and tensors are stored
/// contiguously in manifest order.
struct CheckpointFile {
  std::map<std::string, Tensor<float>> tensors;
  std::map<std::string, std::string> meta;

  friend bool operator==(const CheckpointFile&, const CheckpointFile&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const CheckpointFile& file);

/// Validates the whole buffer before returning; throws ParseError with the byte
/// offset of the first problem.
CheckpointFile decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::string& path, const CheckpointFile& file);
CheckpointFile read_checkpoint(const std::string& path);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace edngtm
