#include "fusionkit/store.hpp"

#include <bit>
#include <cstring>
#include <limits>
#include <set>
#include <unordered_set>

#include <fmt/format.h>

#include "fusionkit/error.hpp"
#include "io_util.hpp"

namespace fusionkit {
namespace {

constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 8;
// u16 id_len + u8 role + i32 class_index + u16 tag_count
constexpr std::size_t kRecordFixedSize = 2 + 1 + 4 + 2;

class Writer {
 public:
  explicit Writer(std::string& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    using U = std::make_unsigned_t<T>;
    auto bits = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<char>(bits & 0xFFu));
      bits = static_cast<U>(bits >> 8);
    }
  }

  void put_f32(float value) { put(std::bit_cast<std::uint32_t>(value)); }

  void put_string(std::string_view s, std::string_view what) {
    if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("{} of {} bytes exceeds the u16 length field", what,
                              s.size()));
    }
    put(static_cast<std::uint16_t>(s.size()));
    out_.append(s);
  }

 private:
  std::string& out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    using U = std::make_unsigned_t<T>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i]))
                             << (8 * i));
    }
    pos_ += sizeof(T);
    return static_cast<T>(bits);
  }

  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }

  std::string get_string() {
    const auto len = get<std::uint16_t>();
    need(len);
    std::string s(bytes_.substr(pos_, len));
    pos_ += len;
    return s;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::kTruncatedFile,
                  fmt::format("need {} bytes at offset {}, {} left", n, pos_,
                              bytes_.size() - pos_));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_embs(std::span<const EmbeddingRecord> records, std::uint32_t dim) {
  std::string out;
  out.reserve(kHeaderSize + records.size() * (kRecordFixedSize + 32 + 4 * dim));
  Writer w(out);
  out.append(kEmbsMagic);
  w.put(kEmbsVersion);
  w.put(dim);
  w.put(static_cast<std::uint64_t>(records.size()));

  std::unordered_set<std::string_view> ids;
  for (const auto& rec : records) {
    if (rec.embedding.dim() != dim) {
      throw Error(ErrorCode::kDimMismatch,
                  fmt::format("record '{}' has dim {} in a dim-{} store", rec.id,
                              rec.embedding.dim(), dim));
    }
    if (!ids.insert(rec.id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate record id '" + rec.id + "'");
    }
    if (rec.axis_tags.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::kInvalidArgument, "too many tags on '" + rec.id + "'");
    }
    w.put_string(rec.id, "record id");
    w.put(static_cast<std::uint8_t>(rec.role));
    w.put(static_cast<std::int32_t>(rec.class_index));
    w.put(static_cast<std::uint16_t>(rec.axis_tags.size()));
    for (const auto& [key, value] : rec.axis_tags) {
      w.put_string(key, "tag key");
      w.put_string(value, "tag value");
    }
    for (const float x : rec.embedding.values()) {
      w.put_f32(x);
    }
  }
  return out;
}

EmbsData decode_embs(std::string_view bytes) {
  if (bytes.size() < kEmbsMagic.size() && kEmbsMagic.starts_with(bytes)) {
    throw Error(ErrorCode::kTruncatedFile, "file ends inside the EMBS magic");
  }
  if (!bytes.starts_with(kEmbsMagic)) {
    throw Error(ErrorCode::kBadMagic, "missing EMBS magic");
  }
  Reader r(bytes);
  r.take(kEmbsMagic.size());
  const auto version = r.get<std::uint32_t>();
  if (version != kEmbsVersion) {
    throw Error(ErrorCode::kVersionUnsupported,
                fmt::format("EMBS version {} (supported: {})", version, kEmbsVersion));
  }
  EmbsData data;
  data.dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  const std::size_t min_record = kRecordFixedSize + 4ull * data.dim;
  if (count > r.remaining() / min_record) {
    throw Error(ErrorCode::kTruncatedFile,
                fmt::format("header claims {} records, only {} bytes follow", count,
                            r.remaining()));
  }
  if (data.dim == 0 && count > 0) {
    throw Error(ErrorCode::kMalformedFile, "dim 0 store with records");
  }
  data.records.reserve(static_cast<std::size_t>(count));
  std::unordered_set<std::string> ids;
  for (std::uint64_t n = 0; n < count; ++n) {
    EmbeddingRecord rec;
    rec.id = r.get_string();
    const auto role = r.get<std::uint8_t>();
    if (role > static_cast<std::uint8_t>(Role::kQuery)) {
      throw Error(ErrorCode::kMalformedFile,
                  fmt::format("record '{}' has role byte {}", rec.id, role));
    }
    rec.role = static_cast<Role>(role);
    rec.class_index = r.get<std::int32_t>();
    const auto tag_count = r.get<std::uint16_t>();
    for (std::uint16_t t = 0; t < tag_count; ++t) {
      auto key = r.get_string();
      auto value = r.get_string();
      if (!rec.axis_tags.emplace(std::move(key), std::move(value)).second) {
        throw Error(ErrorCode::kMalformedFile, "duplicate tag on '" + rec.id + "'");
      }
    }
    std::vector<float> values(data.dim);
    for (auto& x : values) {
      x = r.get_f32();
    }
    rec.embedding = Embedding(std::move(values));
    if (!ids.insert(rec.id).second) {
      throw Error(ErrorCode::kMalformedFile, "duplicate record id '" + rec.id + "'");
    }
    data.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kMalformedFile,
                fmt::format("{} trailing bytes after last record", r.remaining()));
  }
  return data;
}

void write_embs(const std::filesystem::path& path,
                std::span<const EmbeddingRecord> records, std::uint32_t dim) {
  detail::write_file_atomic(path, encode_embs(records, dim));
}

EmbsData read_embs(const std::filesystem::path& path) {
  return decode_embs(detail::read_file(path));
}

std::filesystem::path manifest_path_for(const std::filesystem::path& store_path) {
  auto p = store_path;
  p.replace_extension(".manifest.json");
  return p;
}

void check_records(std::span<const EmbeddingRecord> records, const Manifest& manifest) {
  if (records.empty()) return;
  const auto dim = records.front().embedding.dim();
  const auto n = static_cast<int>(manifest.num_classes());
  std::unordered_set<std::string_view> ids;
  for (const auto& rec : records) {
    if (rec.embedding.dim() != dim) {
      throw Error(ErrorCode::kDimMismatch,
                  fmt::format("record '{}' has dim {}, store dim is {}", rec.id,
                              rec.embedding.dim(), dim));
    }
    if (rec.class_index < -1 || rec.class_index >= n) {
      throw Error(ErrorCode::kManifestInvalid,
                  fmt::format("record '{}' class_index {} outside [-1, {})", rec.id,
                              rec.class_index, n));
    }
    if (!ids.insert(rec.id).second) {
      throw Error(ErrorCode::kManifestInvalid, "duplicate record id '" + rec.id + "'");
    }
  }
}

void write_store(std::span<const EmbeddingRecord> records, const Manifest& manifest,
                 const std::filesystem::path& path) {
  validate(manifest);
  check_records(records, manifest);
  const auto dim =
      records.empty() ? 0u : static_cast<std::uint32_t>(records.front().embedding.dim());
  write_embs(path, records, dim);
  save_manifest(manifest, manifest_path_for(path));
}

Store read_store(const std::filesystem::path& path) {
  Store store;
  store.manifest = load_manifest(manifest_path_for(path));
  auto data = read_embs(path);
  store.dim = data.dim;
  store.records = std::move(data.records);
  check_records(store.records, store.manifest);
  return store;
}

}  // namespace fusionkit
