#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fusionkit/fusion.hpp"
#include "fusionkit/manifest.hpp"

namespace fusionkit {

/// The text-weight grid 0.00, 0.01, ..., 1.00 (both endpoints included).
inline constexpr std::size_t kGridPoints = 101;

/// k / 100 for k in [0, 100]; correctly rounded, so grid_weight(10) == 0.1.
double grid_weight(std::size_t k) noexcept;
std::vector<double> weight_grid();

struct WeightScanResult {
  std::vector<double> grid;
  std::vector<double> accuracy_at;
  double best_w = 0.0;
  double best_accuracy = 0.0;
  std::size_t best_index = 0;
};

/// Evaluates every grid weight and keeps the smallest w attaining the
/// maximum metric. `mode` must be standard or confidence. Queries are
/// projected once; grid points reuse the projection. Result is independent
/// of `threads` and of query order.
/// Throws kEmptyEvalSet, kInvalidArgument, and fusion errors.
WeightScanResult scan_weights(const EvalSet& evalset, std::span<const ClassProto> protos,
                              FusionMode mode, Metric metric, unsigned threads = 1);

/// Predictions at every grid point: result[k][q].
std::vector<std::vector<int>> scan_predictions(const EvalSet& evalset,
                                               std::span<const ClassProto> protos,
                                               FusionMode mode, unsigned threads = 1);

/// Metric at one weight. Equals the scan curve at on-grid weights.
/// Throws kWeightOutOfRange, kEmptyEvalSet.
double evaluate_fixed(const EvalSet& evalset, std::span<const ClassProto> protos,
                      FusionMode mode, double weight, Metric metric,
                      unsigned threads = 1);

}  // namespace fusionkit
