#include "edngtm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "edngtm/error.hpp"

namespace edngtm {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'E', 'D', 'N', 'W'};
constexpr std::size_t kHeaderSize = 12;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const CheckpointFile& file) {
  nlohmann::json manifest;
  manifest["meta"] = nlohmann::json::object();
  for (const auto& [k, v] : file.meta) manifest["meta"][k] = v;
  manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : file.tensors) {
    manifest["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f32"}, {"offset", offset}});
    offset += t.size() * sizeof(float);
  }
  const std::string text = manifest.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : file.tensors) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(t.data());
    out.insert(out.end(), bytes, bytes + t.size() * sizeof(float));
  }
  return out;
}

CheckpointFile decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize) throw ParseError("checkpoint truncated: header needs 12 bytes", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("not an EDNW checkpoint (bad magic)", 0);
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                         std::to_string(kCheckpointVersion) + ")",
                     4);
  const std::size_t manifest_len = get_u32(bytes, 8);
  if (bytes.size() < kHeaderSize + manifest_len)
    throw ParseError("checkpoint truncated inside manifest (" + std::to_string(manifest_len) + " bytes declared)",
                     bytes.size());

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + kHeaderSize, bytes.begin() + kHeaderSize + manifest_len);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed checkpoint manifest: ") + e.what(),
                     kHeaderSize + (e.byte > 0 ? e.byte - 1 : 0));
  }

  const std::size_t payload = kHeaderSize + manifest_len;
  CheckpointFile file;
  try {
    if (!manifest.is_object() || !manifest.contains("meta") || !manifest.contains("tensors") ||
        !manifest["meta"].is_object() || !manifest["tensors"].is_array())
      throw ParseError("checkpoint manifest lacks 'meta' object or 'tensors' array", kHeaderSize);
    for (const auto& [k, v] : manifest["meta"].items()) {
      if (!v.is_string()) throw ParseError("checkpoint meta value for '" + k + "' is not a string", kHeaderSize);
      file.meta.emplace(k, v.get<std::string>());
    }
    std::uint64_t expected_offset = 0;
    for (const auto& entry : manifest["tensors"]) {
      const auto name = entry.at("name").get<std::string>();
      if (entry.at("dtype").get<std::string>() != "f32")
        throw ParseError("tensor '" + name + "' has unsupported dtype", kHeaderSize);
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      if (offset != expected_offset)
        throw ParseError("tensor '" + name + "' offset " + std::to_string(offset) + " breaks contiguity",
                         payload + expected_offset);
      for (int e : shape)
        if (e <= 0) throw ParseError("tensor '" + name + "' has non-positive extent", kHeaderSize);
      const std::size_t count = shape_size(shape);
      const std::size_t nbytes = count * sizeof(float);
      if (payload + offset + nbytes > bytes.size())
        throw ParseError("checkpoint truncated inside tensor '" + name + "'", bytes.size());
      std::vector<float> values(count);
      std::memcpy(values.data(), bytes.data() + payload + offset, nbytes);
      if (!file.tensors.emplace(name, Tensor<float>(shape, std::move(values))).second)
        throw ParseError("duplicate tensor name '" + name + "'", kHeaderSize);
      expected_offset += nbytes;
    }
    if (payload + expected_offset != bytes.size())
      throw ParseError("checkpoint has " + std::to_string(bytes.size() - payload - expected_offset) +
                           " trailing bytes",
                       payload + expected_offset);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint manifest entry: ") + e.what(), kHeaderSize);
  }
  return file;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

void write_checkpoint(const std::string& path, const CheckpointFile& file) {
  write_file_bytes(path, encode_checkpoint(file));
}

CheckpointFile read_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace edngtm
