#pragma once

#include "dmgmap/dataset.hpp"
#include "dmgmap/raster.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dmgmap {

using Bytes = std::vector<std::uint8_t>;

std::uint32_t crc32(std::span<const std::uint8_t> data);

Bytes read_file_bytes(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
/// Writes to a sibling temp file, then renames over `path`.
void atomic_write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void atomic_write_text(const std::filesystem::path& path, std::string_view text);

// Shared container layout, all integers little-endian:
//   0  magic[8]
//   8  u32 format version
//  12  u32 section count
//  16  u64 metadata length
//  24  u32 metadata crc32
//  28  reserved (zero) up to 60
//  60  u32 crc32 of bytes 0..59
//  64  metadata (UTF-8 JSON)
//      per section: u64 length, payload, u32 crc32 of payload
// The file must end right after the last section.
inline constexpr std::size_t kContainerHeaderSize = 64;

struct Container {
    std::string metadata;
    std::vector<Bytes> sections;
};

using Magic = std::array<char, 8>;

Bytes encode_container(const Magic& magic, std::uint32_t version, const Container& c);
/// Throws TruncatedError, FormatError (bad magic or corrupt header),
/// SchemaVersionError or ChecksumError.
Container decode_container(std::span<const std::uint8_t> bytes, const Magic& magic, std::uint32_t version,
                           std::size_t expected_sections);

inline constexpr Magic kBundleMagic{'D', 'M', 'G', 'B', 'U', 'N', 'D', 'L'};
inline constexpr Magic kGridMagic{'D', 'M', 'G', 'G', 'R', 'I', 'D', '1'};
inline constexpr Magic kClassMapMagic{'D', 'M', 'G', 'C', 'L', 'A', 'S', 'S'};
inline constexpr std::uint32_t kArtifactVersion = 1;

Bytes encode_f32(std::span<const float> values);
std::vector<float> decode_f32(std::span<const std::uint8_t> bytes);

Bytes encode_bundle(const PatchBundle& b);
PatchBundle decode_bundle(std::span<const std::uint8_t> bytes);
void write_bundle(const PatchBundle& b, const std::filesystem::path& path);
PatchBundle read_bundle(const std::filesystem::path& path);

/// Single raster with optional nodata mask and geotransform.
Bytes encode_grid(const RasterGrid& g);
RasterGrid decode_grid(std::span<const std::uint8_t> bytes);
void write_grid(const RasterGrid& g, const std::filesystem::path& path);
RasterGrid read_grid(const std::filesystem::path& path);

/// Per-patch class map (predictions).
Bytes encode_class_map(const ClassMap& m, std::string_view patch_id);
ClassMap decode_class_map(std::span<const std::uint8_t> bytes, std::string* patch_id = nullptr);
void write_class_map(const ClassMap& m, std::string_view patch_id, const std::filesystem::path& path);
ClassMap read_class_map(const std::filesystem::path& path, std::string* patch_id = nullptr);

} // namespace dmgmap
