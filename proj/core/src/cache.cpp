#include "fusionkit/cache.hpp"

#include <cstdlib>

#include <fmt/format.h>
#include <json.hpp>

#include "fusionkit/error.hpp"
#include "fusionkit/store.hpp"
#include "io_util.hpp"

namespace fusionkit {

using nlohmann::json;

namespace {

std::string safe_component(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '_';
    out.push_back(ok ? ch : '-');
  }
  return out.empty() ? std::string("-") : out;
}

json bucket_json(const CacheBucket& bucket, std::size_t records) {
  return json{{"file", bucket.file_name()},
              {"dataset", bucket.dataset},
              {"prompt_set", bucket.prompt_set},
              {"images_per_prompt", bucket.params.images_per_prompt},
              {"steps", bucket.params.steps},
              {"guidance", bucket.params.guidance},
              {"seed", bucket.params.seed},
              {"records", records}};
}

}  // namespace

std::string params_tag(const GenerationParams& params) {
  return fmt::format("ipp{}-steps{}-g{}-seed{}", params.images_per_prompt, params.steps,
                     params.guidance, params.seed);
}

std::string CacheBucket::file_name() const {
  return fmt::format("{}__{}__{}.embs", safe_component(dataset), safe_component(prompt_set),
                     params_tag(params));
}

std::string text_cache_id(std::string_view prompt) { return fmt::format("text|{}", prompt); }

std::string image_cache_id(std::string_view prompt, int k) {
  return fmt::format("image|{}|{}", k, prompt);
}

EmbeddingCache::EmbeddingCache(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path EmbeddingCache::default_root() {
  if (const char* env = std::getenv(std::string(kCacheDirEnv).c_str()); env && *env) {
    return env;
  }
  return ".fusionkit-cache";
}

std::filesystem::path EmbeddingCache::bucket_path(const CacheBucket& bucket) const {
  return root_ / bucket.file_name();
}

EmbeddingCache::Loaded& EmbeddingCache::load(const CacheBucket& bucket) {
  auto it = buckets_.find(bucket);
  if (it != buckets_.end()) return it->second;
  Loaded loaded;
  const auto path = bucket_path(bucket);
  if (std::filesystem::exists(path)) {
    auto data = read_embs(path);
    for (auto& r : data.records) loaded.entries.emplace(r.id, std::move(r.embedding));
  }
  return buckets_.emplace(bucket, std::move(loaded)).first->second;
}

std::optional<Embedding> EmbeddingCache::find(const CacheBucket& bucket, const std::string& id) {
  std::lock_guard lock(mutex_);
  auto& loaded = load(bucket);
  const auto it = loaded.entries.find(id);
  if (it == loaded.entries.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(const CacheBucket& bucket, const std::string& id,
                         Embedding embedding) {
  std::lock_guard lock(mutex_);
  auto& loaded = load(bucket);
  if (!loaded.entries.empty() &&
      loaded.entries.begin()->second.dim() != embedding.dim()) {
    throw Error(ErrorCode::kDimMismatch,
                fmt::format("cache bucket {} holds dim {}, got {}", bucket.file_name(),
                            loaded.entries.begin()->second.dim(), embedding.dim()));
  }
  loaded.entries.insert_or_assign(id, std::move(embedding));
  loaded.dirty = true;
}

std::size_t EmbeddingCache::size(const CacheBucket& bucket) {
  std::lock_guard lock(mutex_);
  return load(bucket).entries.size();
}

void EmbeddingCache::flush() {
  std::lock_guard lock(mutex_);
  bool any = false;
  for (auto& [bucket, loaded] : buckets_) {
    if (!loaded.dirty) continue;
    std::vector<EmbeddingRecord> records;
    records.reserve(loaded.entries.size());
    for (const auto& [id, emb] : loaded.entries) {
      EmbeddingRecord r;
      r.id = id;
      r.role = id.starts_with("text|") ? Role::kClassText : Role::kClassImage;
      r.embedding = emb;
      records.push_back(std::move(r));
    }
    const auto dim = records.empty() ? 0u : static_cast<std::uint32_t>(records[0].embedding.dim());
    write_embs(bucket_path(bucket), records, dim);
    loaded.dirty = false;
    any = true;
  }
  if (!any) return;

  // Merge with the existing index so entries from other runs survive, and
  // keep unknown keys (the bridge may record its own settings there).
  const auto index_path = root_ / "index.json";
  json index = {{"schema", kCacheIndexSchema}, {"buckets", json::object()}};
  if (std::filesystem::exists(index_path)) {
    try {
      auto existing = json::parse(detail::read_file(index_path));
      if (existing.is_object() && existing.value("schema", "") == kCacheIndexSchema) {
        index = std::move(existing);
        if (!index.contains("buckets") || !index["buckets"].is_object()) {
          index["buckets"] = json::object();
        }
      }
    } catch (const json::exception&) {
      // A corrupt index is rebuilt from the buckets held in memory.
    }
  }
  for (const auto& [bucket, loaded] : buckets_) {
    if (loaded.entries.empty()) continue;
    index["buckets"][bucket.file_name()] = bucket_json(bucket, loaded.entries.size());
  }
  detail::write_file_atomic(index_path, index.dump(2) + "\n");
}

}  // namespace fusionkit
