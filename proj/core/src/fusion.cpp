#include "fusionkit/fusion.hpp"

#include <cmath>

#include <fmt/format.h>

#include "fusionkit/error.hpp"
#include "parallel.hpp"

namespace fusionkit {
namespace {

void check_same_dim(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimMismatch,
                fmt::format("operands of dim {} and {}", a.dim(), b.dim()));
  }
}

void check_weight(double weight) {
  if (!(weight >= 0.0 && weight <= 1.0)) {
    throw Error(ErrorCode::kWeightOutOfRange,
                fmt::format("weight {} outside [0, 1]", weight));
  }
}

bool needs_text(FusionMode mode, double weight) {
  switch (mode) {
    case FusionMode::kTextOnly:
    case FusionMode::kConfidence:
      return true;
    case FusionMode::kImageOnly:
      return false;
    case FusionMode::kStandard:
      return weight > 0.0;
  }
  return true;
}

bool needs_image(FusionMode mode, double weight) {
  switch (mode) {
    case FusionMode::kTextOnly:
      return false;
    case FusionMode::kImageOnly:
      return true;
    case FusionMode::kStandard:
    case FusionMode::kConfidence:
      return weight < 1.0;
  }
  return true;
}

}  // namespace

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kTextOnly: return "text_only";
    case FusionMode::kImageOnly: return "image_only";
    case FusionMode::kStandard: return "standard";
    case FusionMode::kConfidence: return "confidence";
  }
  return "unknown";
}

FusionMode fusion_mode_from_string(std::string_view name) {
  if (name == "text_only") return FusionMode::kTextOnly;
  if (name == "image_only") return FusionMode::kImageOnly;
  if (name == "standard") return FusionMode::kStandard;
  if (name == "confidence") return FusionMode::kConfidence;
  throw Error(ErrorCode::kConfigInvalid, fmt::format("unknown fusion mode '{}'", name));
}

double FusionConfig::effective_weight() const noexcept {
  switch (mode) {
    case FusionMode::kTextOnly: return 1.0;
    case FusionMode::kImageOnly: return 0.0;
    default: return weight;
  }
}

void FusionConfig::validate() const { check_weight(weight); }

FusedVector fuse_standard(const Embedding& text_row, const Embedding& image_row,
                          double weight) {
  check_same_dim(text_row, image_row);
  check_weight(weight);
  const double image_weight = 1.0 - weight;
  FusedVector out(text_row.dim());
  for (std::size_t d = 0; d < out.size(); ++d) {
    out[d] = weight * static_cast<double>(text_row[d]) +
             image_weight * static_cast<double>(image_row[d]);
  }
  return out;
}

FusedVector fuse_confidence(const Embedding& text_row, const Embedding& image_row,
                            double weight, double class_confidence) {
  check_same_dim(text_row, image_row);
  check_weight(weight);
  if (!(class_confidence >= 0.0 && class_confidence <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("confidence {} outside [0, 1]", class_confidence));
  }
  const double image_weight = (1.0 - weight) * class_confidence;
  FusedVector out(text_row.dim());
  for (std::size_t d = 0; d < out.size(); ++d) {
    out[d] = weight * static_cast<double>(text_row[d]) +
             image_weight * static_cast<double>(image_row[d]);
  }
  return out;
}

ConfidenceVector confidence_from_logits(std::span<const double> logits) {
  ConfidenceVector out;
  if (logits.empty()) return out;
  double max_logit = logits.front();
  for (const double l : logits) max_logit = std::max(max_logit, l);
  std::vector<double> expo(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    expo[i] = std::exp(logits[i] - max_logit);
    sum += expo[i];
  }
  out.values.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.values[i] = 1.0 - expo[i] / sum;
  }
  return out;
}

ConfidenceVector confidence(const Embedding& query, std::span<const Embedding> text_rows) {
  std::vector<double> logits;
  logits.reserve(text_rows.size());
  for (const auto& t : text_rows) {
    logits.push_back(dot(query.values(), t.values()));
  }
  return confidence_from_logits(logits);
}

int argmax_lowest(std::span<const double> scores) noexcept {
  if (scores.empty()) return -1;
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return static_cast<int>(best);
}

ScoreVector score(std::span<const FusedVector> fused_rows, const Embedding& query) {
  ScoreVector out;
  out.scores.reserve(fused_rows.size());
  const auto q = query.values();
  for (const auto& row : fused_rows) {
    if (row.size() != q.size()) {
      throw Error(ErrorCode::kDimMismatch,
                  fmt::format("fused row dim {} vs query dim {}", row.size(), q.size()));
    }
    double acc = 0.0;
    for (std::size_t d = 0; d < row.size(); ++d) {
      acc += row[d] * static_cast<double>(q[d]);
    }
    out.scores.push_back(acc);
  }
  out.predicted = argmax_lowest(out.scores);
  return out;
}

void require_modalities(std::span<const ClassProto> protos, FusionMode mode,
                        double weight) {
  const bool text = needs_text(mode, weight);
  const bool image = needs_image(mode, weight);
  for (const auto& p : protos) {
    if (text && !p.has_text()) {
      throw Error(ErrorCode::kMissingModality,
                  fmt::format("class {} has no text embeddings ({} mode)", p.class_index,
                              to_string(mode)));
    }
    if (image && !p.has_image()) {
      throw Error(ErrorCode::kMissingModality,
                  fmt::format("class {} has no image embeddings ({} mode)",
                              p.class_index, to_string(mode)));
    }
  }
}

QueryProjection project(const Embedding& query, std::span<const ClassProto> protos,
                        FusionMode mode, double weight) {
  require_modalities(protos, mode, weight);
  const bool text = needs_text(mode, weight);
  const bool image = needs_image(mode, weight);
  QueryProjection proj;
  proj.text_dot.assign(protos.size(), 0.0);
  proj.image_dot.assign(protos.size(), 0.0);
  const auto q = query.values();
  for (std::size_t i = 0; i < protos.size(); ++i) {
    if (text) proj.text_dot[i] = dot(protos[i].text_centroid->values(), q);
    if (image) proj.image_dot[i] = dot(protos[i].image_centroid->values(), q);
  }
  if (mode == FusionMode::kConfidence) {
    proj.confidence = confidence_from_logits(proj.text_dot).values;
  }
  return proj;
}

ScoreVector score_projection(const QueryProjection& projection, FusionMode mode,
                             double weight) {
  check_weight(weight);
  const std::size_t n = projection.text_dot.size();
  ScoreVector out;
  out.scores.resize(n);
  const double image_weight = 1.0 - weight;
  switch (mode) {
    case FusionMode::kTextOnly:
      out.scores = projection.text_dot;
      break;
    case FusionMode::kImageOnly:
      out.scores = projection.image_dot;
      break;
    case FusionMode::kStandard:
      for (std::size_t i = 0; i < n; ++i) {
        out.scores[i] =
            weight * projection.text_dot[i] + image_weight * projection.image_dot[i];
      }
      break;
    case FusionMode::kConfidence:
      if (projection.confidence.size() != n) {
        throw Error(ErrorCode::kInvalidArgument,
                    "projection lacks confidence values for confidence mode");
      }
      for (std::size_t i = 0; i < n; ++i) {
        out.scores[i] = weight * projection.text_dot[i] +
                        (image_weight * projection.confidence[i]) * projection.image_dot[i];
      }
      break;
  }
  out.predicted = argmax_lowest(out.scores);
  return out;
}

ScoreVector classify_scores(const Embedding& query, std::span<const ClassProto> protos,
                            const FusionConfig& cfg) {
  cfg.validate();
  const double w = cfg.effective_weight();
  return score_projection(project(query, protos, cfg.mode, w), cfg.mode, w);
}

int classify(const EmbeddingRecord& query, std::span<const ClassProto> protos,
             const FusionConfig& cfg) {
  if (query.role != Role::kQuery) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("record '{}' has role {}, expected query", query.id,
                            to_string(query.role)));
  }
  return classify_scores(query.embedding, protos, cfg).predicted;
}

std::vector<int> predict_all(const EvalSet& evalset, std::span<const ClassProto> protos,
                             const FusionConfig& cfg, unsigned threads) {
  cfg.validate();
  const double w = cfg.effective_weight();
  require_modalities(protos, cfg.mode, w);
  std::vector<int> predictions(evalset.size(), -1);
  detail::parallel_for(evalset.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      predictions[k] = classify_scores(evalset[k].embedding, protos, cfg).predicted;
    }
  });
  return predictions;
}

}  // namespace fusionkit
