#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fusionkit {

/// Fixed-dimension vector of finite floats. Construction rejects NaN/Inf;
/// unit norm is not enforced here but is what `normalize` and `centroid`
/// produce and what scoring assumes.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<float> values);

  std::size_t dim() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::span<const float> values() const noexcept { return values_; }
  float operator[](std::size_t i) const { return values_[i]; }

  /// L2 norm accumulated in double precision.
  double norm() const noexcept;
  bool is_unit(double tolerance = 1e-6) const noexcept;

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<float> values_;
};

/// Norms below this are treated as zero by `normalize` and `centroid`.
inline constexpr double kZeroNormThreshold = 1e-12;

/// v / ||v||. Throws kNonFinite or kZeroVector.
Embedding normalize(std::span<const float> raw);
Embedding normalize(std::span<const double> raw);

/// Dot product in double precision, index order. Throws kDimMismatch.
double dot(std::span<const float> a, std::span<const float> b);

struct CentroidResult {
  Embedding centroid;
  /// Norm of the arithmetic mean before renormalization.
  double mean_norm = 0.0;
};

/// Component-wise mean of unit-norm members, renormalized. A single member is
/// returned unchanged. Throws kEmptyList, kDimMismatch, kZeroVector.
CentroidResult centroid_with_norm(std::span<const Embedding> members);
Embedding centroid(std::span<const Embedding> members);

enum class Role : unsigned char { kClassText = 0, kClassImage = 1, kQuery = 2 };

std::string to_string(Role role);
Role role_from_string(const std::string& name);

struct EmbeddingRecord {
  std::string id;
  Role role = Role::kQuery;
  /// Index into the manifest class list, -1 for unlabeled.
  int class_index = -1;
  std::map<std::string, std::string> axis_tags;
  Embedding embedding;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// Per-class prototype: member embeddings of both modalities and their
/// renormalized centroids. At least one modality is present.
struct ClassProto {
  int class_index = 0;
  std::vector<Embedding> text_embeddings;
  std::vector<Embedding> image_embeddings;
  std::optional<Embedding> text_centroid;
  std::optional<Embedding> image_centroid;
  double text_mean_norm = 0.0;
  double image_mean_norm = 0.0;

  bool has_text() const noexcept { return text_centroid.has_value(); }
  bool has_image() const noexcept { return image_centroid.has_value(); }
};

/// Builds a ClassProto and its centroids. Throws kEmptyList if both lists are
/// empty.
ClassProto make_class_proto(int class_index, std::vector<Embedding> texts,
                            std::vector<Embedding> images);

}  // namespace fusionkit
