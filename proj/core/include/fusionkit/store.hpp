#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusionkit/embedding.hpp"
#include "fusionkit/manifest.hpp"

namespace fusionkit {

// EMBS v1, little-endian:
//   header: "EMBS" | u32 version=1 | u32 dim | u64 record_count
//   record: u16 id_len | id | u8 role | i32 class_index | u16 tag_count
//           | tag_count x (u16 key_len | key | u16 value_len | value)
//           | dim x f32
// See docs/formats.md.
inline constexpr std::string_view kEmbsMagic = "EMBS";
inline constexpr std::uint32_t kEmbsVersion = 1;

struct EmbsData {
  std::uint32_t dim = 0;
  std::vector<EmbeddingRecord> records;
};

/// Serializes records; every embedding must have dimension `dim`.
/// Throws kDimMismatch, kInvalidArgument (duplicate ids, oversized strings).
std::string encode_embs(std::span<const EmbeddingRecord> records, std::uint32_t dim);

/// Parses EMBS bytes. Throws kBadMagic, kVersionUnsupported, kTruncatedFile,
/// kMalformedFile, kNonFinite.
EmbsData decode_embs(std::string_view bytes);

void write_embs(const std::filesystem::path& path,
                std::span<const EmbeddingRecord> records, std::uint32_t dim);
EmbsData read_embs(const std::filesystem::path& path);

/// "data/flowers.embs" -> "data/flowers.manifest.json".
std::filesystem::path manifest_path_for(const std::filesystem::path& store_path);

/// Checks records against a manifest: unique ids, one dimension, class
/// indices in [-1, N). Throws kDimMismatch or kManifestInvalid.
void check_records(std::span<const EmbeddingRecord> records, const Manifest& manifest);

/// Writes the EMBS file and its sidecar manifest. Dimension is taken from the
/// first record (0 for an empty store).
void write_store(std::span<const EmbeddingRecord> records, const Manifest& manifest,
                 const std::filesystem::path& path);

/// Immutable after load; safe to share between readers.
struct Store {
  Manifest manifest;
  std::uint32_t dim = 0;
  std::vector<EmbeddingRecord> records;
};

Store read_store(const std::filesystem::path& path);

}  // namespace fusionkit
