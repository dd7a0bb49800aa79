#include "fusionkit/scan.hpp"

#include <fmt/format.h>

#include "fusionkit/error.hpp"
#include "fusionkit/metrics.hpp"
#include "parallel.hpp"

namespace fusionkit {
namespace {

void check_evalset(const EvalSet& evalset, std::size_t num_classes) {
  if (evalset.empty()) {
    throw Error(ErrorCode::kEmptyEvalSet, "no labeled queries to evaluate");
  }
  for (const auto& q : evalset) {
    if (q.label < 0 || static_cast<std::size_t>(q.label) >= num_classes) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("query '{}' has label {} outside [0, {})", q.id, q.label,
                              num_classes));
    }
  }
}

}  // namespace

double grid_weight(std::size_t k) noexcept {
  return static_cast<double>(k) / static_cast<double>(kGridPoints - 1);
}

std::vector<double> weight_grid() {
  std::vector<double> grid(kGridPoints);
  for (std::size_t k = 0; k < kGridPoints; ++k) grid[k] = grid_weight(k);
  return grid;
}

std::vector<std::vector<int>> scan_predictions(const EvalSet& evalset,
                                               std::span<const ClassProto> protos,
                                               FusionMode mode, unsigned threads) {
  if (mode != FusionMode::kStandard && mode != FusionMode::kConfidence) {
    throw Error(ErrorCode::kInvalidArgument,
                "weight scan needs standard or confidence mode, got " + to_string(mode));
  }
  check_evalset(evalset, protos.size());
  require_modalities(protos, mode, 0.5);
  const auto grid = weight_grid();
  std::vector<std::vector<int>> predictions(kGridPoints,
                                            std::vector<int>(evalset.size(), -1));
  detail::parallel_for(evalset.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) {
      const auto proj = project(evalset[q].embedding, protos, mode, 0.5);
      for (std::size_t k = 0; k < kGridPoints; ++k) {
        predictions[k][q] = score_projection(proj, mode, grid[k]).predicted;
      }
    }
  });
  return predictions;
}

WeightScanResult scan_weights(const EvalSet& evalset, std::span<const ClassProto> protos,
                              FusionMode mode, Metric metric, unsigned threads) {
  const auto predictions = scan_predictions(evalset, protos, mode, threads);
  const auto labels = labels_of(evalset);
  WeightScanResult result;
  result.grid = weight_grid();
  result.accuracy_at.reserve(kGridPoints);
  for (std::size_t k = 0; k < kGridPoints; ++k) {
    result.accuracy_at.push_back(
        metric_value(metric, predictions[k], labels, protos.size()));
    if (k == 0 || result.accuracy_at[k] > result.best_accuracy) {
      result.best_accuracy = result.accuracy_at[k];
      result.best_index = k;
    }
  }
  result.best_w = result.grid[result.best_index];
  return result;
}

double evaluate_fixed(const EvalSet& evalset, std::span<const ClassProto> protos,
                      FusionMode mode, double weight, Metric metric, unsigned threads) {
  const FusionConfig cfg{mode, weight};
  cfg.validate();
  check_evalset(evalset, protos.size());
  const auto predictions = predict_all(evalset, protos, cfg, threads);
  return metric_value(metric, predictions, labels_of(evalset), protos.size());
}

}  // namespace fusionkit
