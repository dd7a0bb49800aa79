#include "fusionkit/metrics.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "fusionkit/error.hpp"

namespace fusionkit {
namespace {

void check_inputs(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("{} predictions vs {} labels", predictions.size(),
                            labels.size()));
  }
  if (labels.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no predictions to score");
  }
}

void check_labels(std::span<const int> labels, std::size_t num_classes) {
  for (const int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("label {} outside [0, {})", l, num_classes));
    }
  }
}

const ClassProto& find_proto(std::span<const ClassProto> protos, int class_index) {
  for (const auto& p : protos) {
    if (p.class_index == class_index) return p;
  }
  throw Error(ErrorCode::kInvalidArgument,
              fmt::format("no prototype for class {}", class_index));
}

}  // namespace

double top1(std::span<const int> predictions, std::span<const int> labels) {
  check_inputs(predictions, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

PerClassTable per_class_table(std::span<const int> predictions,
                              std::span<const int> labels, std::size_t num_classes) {
  check_inputs(predictions, labels);
  check_labels(labels, num_classes);
  std::vector<std::size_t> support(num_classes, 0);
  std::vector<std::size_t> correct(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    ++support[l];
    if (predictions[i] == labels[i]) ++correct[l];
  }
  PerClassTable table;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const int idx = static_cast<int>(c);
    if (support[c] == 0) {
      table.excluded_classes.push_back(idx);
      continue;
    }
    table.support[idx] = support[c];
    table.correct[idx] = correct[c];
    table.per_class_accuracy[idx] =
        static_cast<double>(correct[c]) / static_cast<double>(support[c]);
  }
  return table;
}

double mean_per_class(std::span<const int> predictions, std::span<const int> labels,
                      std::size_t num_classes) {
  const auto table = per_class_table(predictions, labels, num_classes);
  double sum = 0.0;
  for (const auto& [cls, acc] : table.per_class_accuracy) sum += acc;
  return sum / static_cast<double>(table.per_class_accuracy.size());
}

double metric_value(Metric metric, std::span<const int> predictions,
                    std::span<const int> labels, std::size_t num_classes) {
  return metric == Metric::kTop1 ? top1(predictions, labels)
                                 : mean_per_class(predictions, labels, num_classes);
}

std::vector<ConfusionPair> top_confused_pairs(std::span<const int> predictions,
                                              std::span<const int> labels,
                                              std::size_t k) {
  if (k == 0) {
    throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  }
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("{} predictions vs {} labels", predictions.size(),
                            labels.size()));
  }
  std::map<std::pair<int, int>, std::size_t> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] != labels[i]) ++counts[{labels[i], predictions[i]}];
  }
  std::vector<ConfusionPair> pairs;
  pairs.reserve(counts.size());
  for (const auto& [key, count] : counts) {
    pairs.push_back({key.first, key.second, count, std::nullopt});
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const ConfusionPair& a, const ConfusionPair& b) {
                     return a.count > b.count;
                   });
  if (pairs.size() > k) pairs.resize(k);
  return pairs;
}

std::pair<double, double> pair_subset_eval(const EvalSet& evalset,
                                           std::span<const ClassProto> protos,
                                           const FusionConfig& cfg, int class_a,
                                           int class_b) {
  if (class_a == class_b) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("pair evaluation needs two distinct classes, got {} twice",
                            class_a));
  }
  // Relabel to positions within the pair so the two prototypes act as a
  // self-contained binary classifier.
  const std::array<ClassProto, 2> pair = {find_proto(protos, class_a),
                                          find_proto(protos, class_b)};
  EvalSet subset;
  std::array<std::size_t, 2> support{0, 0};
  for (const auto& q : evalset) {
    if (q.label == class_a || q.label == class_b) {
      const int pos = q.label == class_a ? 0 : 1;
      ++support[static_cast<std::size_t>(pos)];
      subset.push_back({q.id, q.embedding, pos});
    }
  }
  if (support[0] == 0 || support[1] == 0) {
    throw Error(ErrorCode::kEmptySubset,
                fmt::format("classes {} and {} have {} and {} queries", class_a,
                            class_b, support[0], support[1]));
  }
  const auto predictions = predict_all(subset, pair, cfg);
  std::array<std::size_t, 2> correct{0, 0};
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (predictions[i] == subset[i].label) {
      ++correct[static_cast<std::size_t>(subset[i].label)];
    }
  }
  return {static_cast<double>(correct[0]) / static_cast<double>(support[0]),
          static_cast<double>(correct[1]) / static_cast<double>(support[1])};
}

std::vector<int> labels_of(const EvalSet& evalset) {
  std::vector<int> labels;
  labels.reserve(evalset.size());
  for (const auto& q : evalset) labels.push_back(q.label);
  return labels;
}

}  // namespace fusionkit
