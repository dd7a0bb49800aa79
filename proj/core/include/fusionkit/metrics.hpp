#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fusionkit/fusion.hpp"
#include "fusionkit/manifest.hpp"

namespace fusionkit {

/// Fraction of exact matches. Throws kEmptyInput, kLengthMismatch.
double top1(std::span<const int> predictions, std::span<const int> labels);

/// Unweighted mean of per-class recall over classes with support > 0.
/// Classes without queries are excluded, not counted as zero.
double mean_per_class(std::span<const int> predictions, std::span<const int> labels,
                      std::size_t num_classes);

double metric_value(Metric metric, std::span<const int> predictions,
                    std::span<const int> labels, std::size_t num_classes);

struct PerClassTable {
  /// Defined only for classes with support > 0.
  std::map<int, double> per_class_accuracy;
  std::map<int, std::size_t> support;
  std::map<int, std::size_t> correct;
  /// Classes in [0, N) with no queries.
  std::vector<int> excluded_classes;
};

PerClassTable per_class_table(std::span<const int> predictions,
                              std::span<const int> labels, std::size_t num_classes);

struct ConfusionPair {
  int true_class = 0;
  int predicted_class = 0;
  std::size_t count = 0;
  /// Per-class accuracies when the two classes are evaluated in isolation.
  std::optional<std::pair<double, double>> pair_binary_accuracy;

  friend bool operator==(const ConfusionPair&, const ConfusionPair&) = default;
};

/// Off-diagonal (true, predicted) counts, sorted by count descending then by
/// (true, predicted) ascending; at most k entries. Throws kInvalidArgument for
/// k == 0.
std::vector<ConfusionPair> top_confused_pairs(std::span<const int> predictions,
                                              std::span<const int> labels,
                                              std::size_t k);

/// Classifies the queries labeled class_a or class_b against those two
/// prototypes only; returns (accuracy on a, accuracy on b). Throws
/// kInvalidArgument for a == b and kEmptySubset when either class has no
/// queries.
std::pair<double, double> pair_subset_eval(const EvalSet& evalset,
                                           std::span<const ClassProto> protos,
                                           const FusionConfig& cfg, int class_a,
                                           int class_b);

std::vector<int> labels_of(const EvalSet& evalset);

}  // namespace fusionkit
