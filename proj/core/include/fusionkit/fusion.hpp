#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusionkit/embedding.hpp"

namespace fusionkit {

enum class FusionMode { kTextOnly, kImageOnly, kStandard, kConfidence };

std::string to_string(FusionMode mode);
FusionMode fusion_mode_from_string(std::string_view name);

struct FusionConfig {
  FusionMode mode = FusionMode::kStandard;
  /// Text weight w; the image term gets 1 - w. Ignored by text_only
  /// (effective 1) and image_only (effective 0).
  double weight = 0.5;

  double effective_weight() const noexcept;
  /// Throws kWeightOutOfRange unless 0 <= weight <= 1.
  void validate() const;
};

/// w * t + (1 - w) * i, not renormalized.
using FusedVector = std::vector<double>;

FusedVector fuse_standard(const Embedding& text_row, const Embedding& image_row,
                          double weight);

/// w * t + (1 - w) * c * i. With c == 1 the result is bit-identical to
/// fuse_standard.
FusedVector fuse_confidence(const Embedding& text_row, const Embedding& image_row,
                            double weight, double class_confidence);

struct ConfidenceVector {
  /// c_i = 1 - softmax(q . t)_i
  std::vector<double> values;
};

/// Inverse softmax confidence of the query against each class text row.
/// Softmax subtracts the max logit before exponentiating.
ConfidenceVector confidence(const Embedding& query, std::span<const Embedding> text_rows);
ConfidenceVector confidence_from_logits(std::span<const double> logits);

struct ScoreVector {
  std::vector<double> scores;
  /// Smallest index attaining the maximum score.
  int predicted = -1;
};

/// Index of the maximum, ties to the lowest index. -1 for empty input.
int argmax_lowest(std::span<const double> scores) noexcept;

ScoreVector score(std::span<const FusedVector> fused_rows, const Embedding& query);

/// Per-query dot products against every class centroid. Scores at any
/// weight follow from linearity:
///   f(w) . q = w (t . q) + (1 - w) c (i . q)
/// so one projection serves all grid points of a weight scan.
struct QueryProjection {
  std::vector<double> text_dot;
  std::vector<double> image_dot;
  /// Empty unless projected for confidence mode.
  std::vector<double> confidence;
};

/// Throws kMissingModality when a class lacks a centroid the mode needs at
/// this weight, kDimMismatch on mixed dimensions.
void require_modalities(std::span<const ClassProto> protos, FusionMode mode,
                        double weight);

/// Projects the query for `mode`. Modalities not needed at `weight` are left
/// at zero. Pass weight 0.5 to require both (as a weight scan does).
QueryProjection project(const Embedding& query, std::span<const ClassProto> protos,
                        FusionMode mode, double weight);

ScoreVector score_projection(const QueryProjection& projection, FusionMode mode,
                             double weight);

/// Scores of one query under `cfg`: centroid rows, confidence when needed,
/// weighted fusion and the dot product with the query.
ScoreVector classify_scores(const Embedding& query, std::span<const ClassProto> protos,
                            const FusionConfig& cfg);

/// Predicted class index for a query record. Throws kInvalidArgument when
/// the record is not a query.
int classify(const EmbeddingRecord& query, std::span<const ClassProto> protos,
             const FusionConfig& cfg);

struct LabeledQuery {
  std::string id;
  Embedding embedding;
  int label = -1;
};

using EvalSet = std::vector<LabeledQuery>;

/// Predictions for every query; deterministic for any thread count.
std::vector<int> predict_all(const EvalSet& evalset, std::span<const ClassProto> protos,
                             const FusionConfig& cfg, unsigned threads = 1);

}  // namespace fusionkit
