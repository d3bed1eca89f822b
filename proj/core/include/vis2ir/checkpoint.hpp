#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vis2ir/tensor.hpp"

namespace vis2ir::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Single-file archive: a JSON manifest followed by raw little-endian float64 blobs.
/// Layout is described in docs/checkpoint_format.md.
struct Archive {
  std::string component;      // "translator" or "superres"
  std::string manifest_json;  // component-specific JSON object
  std::vector<NamedTensor> tensors;

  const Tensor& tensor(const std::string& name) const;
};

/// Serialized bytes of an archive; identical archives give identical bytes.
std::string encode(const Archive& archive);
/// Throws IntegrityError on a bad magic, truncation or checksum mismatch, VersionError on
/// an unknown format version.
Archive decode(const std::string& bytes);

/// Writes to a sibling temporary file and renames it into place.
void write_archive(const std::filesystem::path& file, const Archive& archive);
Archive read_archive(const std::filesystem::path& file);
/// read_archive plus a check that the component tag matches.
Archive read_archive(const std::filesystem::path& file, const std::string& component);

/// FNV-1a 64 over a byte range.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace vis2ir::checkpoint
