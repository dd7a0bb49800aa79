#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fusionkit/embedding.hpp"

namespace fusionkit {

/// Generation parameters that select a cache bucket.
struct GenerationParams {
  int images_per_prompt = 1;
  int steps = 50;
  double guidance = 15.0;
  std::int64_t seed = 0;

  friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

/// "ipp5-steps50-g15-seed0"
std::string params_tag(const GenerationParams& params);

/// Identifies one bucket: one EMBS store per (dataset, prompt set, params).
struct CacheBucket {
  std::string dataset;
  std::string prompt_set;
  GenerationParams params;

  auto operator<=>(const CacheBucket& other) const {
    return file_name() <=> other.file_name();
  }
  bool operator==(const CacheBucket& other) const { return file_name() == other.file_name(); }

  /// "<dataset>__<prompt set>__<params tag>.embs" with unsafe characters
  /// replaced by '-'.
  std::string file_name() const;
};

inline constexpr std::string_view kCacheIndexSchema = "fusionkit.cache/1";
inline constexpr std::string_view kCacheDirEnv = "FUSIONKIT_CACHE_DIR";

/// Entry ids inside a bucket.
std::string text_cache_id(std::string_view prompt);
std::string image_cache_id(std::string_view prompt, int k);

/// On-disk embedding cache:
///   <root>/index.json      one entry per bucket file
///   <root>/<bucket>.embs   EMBS store; record ids from *_cache_id
/// Buckets load lazily and are rewritten atomically by flush().
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path root);

  /// $FUSIONKIT_CACHE_DIR, else ".fusionkit-cache" in the working directory.
  static std::filesystem::path default_root();

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path bucket_path(const CacheBucket& bucket) const;

  std::optional<Embedding> find(const CacheBucket& bucket, const std::string& id);
  void put(const CacheBucket& bucket, const std::string& id, Embedding embedding);
  std::size_t size(const CacheBucket& bucket);

  /// Writes dirty buckets and the index. Throws kIoError.
  void flush();

 private:
  struct Loaded {
    std::map<std::string, Embedding> entries;
    bool dirty = false;
  };
  Loaded& load(const CacheBucket& bucket);

  std::filesystem::path root_;
  std::map<CacheBucket, Loaded> buckets_;
  std::mutex mutex_;
};

}  // namespace fusionkit
