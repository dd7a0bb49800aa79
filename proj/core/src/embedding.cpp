#include "fusionkit/embedding.hpp"

#include <cmath>
#include <string>
#include <utility>

#include <fmt/format.h>

#include "fusionkit/error.hpp"

namespace fusionkit {
namespace {

template <typename T>
Embedding normalize_impl(std::span<const T> raw) {
  if (raw.empty()) {
    throw Error(ErrorCode::kZeroVector, "cannot normalize an empty vector");
  }
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double x = static_cast<double>(raw[i]);
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::kNonFinite,
                  fmt::format("component {} is not finite", i));
    }
    sum_sq += x * x;
  }
  const double norm = std::sqrt(sum_sq);
  if (norm < kZeroNormThreshold) {
    throw Error(ErrorCode::kZeroVector,
                fmt::format("norm {:.3g} below threshold", norm));
  }
  std::vector<float> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(raw[i]) / norm);
  }
  return Embedding(std::move(out));
}

}  // namespace

Embedding::Embedding(std::vector<float> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::kNonFinite,
                  fmt::format("component {} is not finite", i));
    }
  }
}

double Embedding::norm() const noexcept {
  double sum_sq = 0.0;
  for (const float x : values_) {
    sum_sq += static_cast<double>(x) * static_cast<double>(x);
  }
  return std::sqrt(sum_sq);
}

bool Embedding::is_unit(double tolerance) const noexcept {
  return std::abs(norm() - 1.0) <= tolerance;
}

Embedding normalize(std::span<const float> raw) { return normalize_impl(raw); }

Embedding normalize(std::span<const double> raw) { return normalize_impl(raw); }

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimMismatch,
                fmt::format("dot of dim {} and dim {}", a.size(), b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

CentroidResult centroid_with_norm(std::span<const Embedding> members) {
  if (members.empty()) {
    throw Error(ErrorCode::kEmptyList, "centroid of an empty list");
  }
  const std::size_t dim = members.front().dim();
  for (const auto& m : members) {
    if (m.dim() != dim) {
      throw Error(ErrorCode::kDimMismatch,
                  fmt::format("centroid members of dim {} and {}", dim, m.dim()));
    }
  }
  if (members.size() == 1) {
    return {members.front(), members.front().norm()};
  }
  std::vector<double> mean(dim, 0.0);
  for (const auto& m : members) {
    const auto v = m.values();
    for (std::size_t i = 0; i < dim; ++i) {
      mean[i] += static_cast<double>(v[i]);
    }
  }
  const double count = static_cast<double>(members.size());
  double sum_sq = 0.0;
  for (double& x : mean) {
    x /= count;
    sum_sq += x * x;
  }
  const double mean_norm = std::sqrt(sum_sq);
  if (mean_norm < kZeroNormThreshold) {
    throw Error(ErrorCode::kZeroVector, "members cancel out; mean is zero");
  }
  return {normalize(std::span<const double>(mean)), mean_norm};
}

Embedding centroid(std::span<const Embedding> members) {
  return centroid_with_norm(members).centroid;
}

std::string to_string(Role role) {
  switch (role) {
    case Role::kClassText: return "class_text";
    case Role::kClassImage: return "class_image";
    case Role::kQuery: return "query";
  }
  return "unknown";
}

Role role_from_string(const std::string& name) {
  if (name == "class_text") return Role::kClassText;
  if (name == "class_image") return Role::kClassImage;
  if (name == "query") return Role::kQuery;
  throw Error(ErrorCode::kInvalidArgument, "unknown role '" + name + "'");
}

ClassProto make_class_proto(int class_index, std::vector<Embedding> texts,
                            std::vector<Embedding> images) {
  if (texts.empty() && images.empty()) {
    throw Error(ErrorCode::kEmptyList,
                fmt::format("class {} has neither text nor image embeddings",
                            class_index));
  }
  ClassProto proto;
  proto.class_index = class_index;
  proto.text_embeddings = std::move(texts);
  proto.image_embeddings = std::move(images);
  if (!proto.text_embeddings.empty()) {
    auto c = centroid_with_norm(proto.text_embeddings);
    proto.text_centroid = std::move(c.centroid);
    proto.text_mean_norm = c.mean_norm;
  }
  if (!proto.image_embeddings.empty()) {
    auto c = centroid_with_norm(proto.image_embeddings);
    proto.image_centroid = std::move(c.centroid);
    proto.image_mean_norm = c.mean_norm;
  }
  if (proto.text_centroid && proto.image_centroid &&
      proto.text_centroid->dim() != proto.image_centroid->dim()) {
    throw Error(ErrorCode::kDimMismatch,
                fmt::format("class {} text dim {} vs image dim {}", class_index,
                            proto.text_centroid->dim(),
                            proto.image_centroid->dim()));
  }
  return proto;
}

}  // namespace fusionkit
