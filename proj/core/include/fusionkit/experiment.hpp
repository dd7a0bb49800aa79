#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fusionkit/fusion.hpp"
#include "fusionkit/manifest.hpp"
#include "fusionkit/metrics.hpp"
#include "fusionkit/scan.hpp"

namespace fusionkit {

enum class PromptSource { kPhotoTemplate, kClipTemplates, kCuplSingle, kCuplAverage, kD3gTemplates };

std::string to_string(PromptSource source);
PromptSource prompt_source_from_string(std::string_view name);

/// Prompt-set tag of D3G records: "d3g/<classify>/<enrich>".
std::string d3g_set_tag(std::string_view classify_axis, std::string_view enrichment_axis);

struct WeightPolicy {
  enum class Kind { kScan, kFixed };
  Kind kind = Kind::kScan;
  /// Used by kFixed only.
  double weight = 0.5;

  static WeightPolicy scan() { return {}; }
  static WeightPolicy fixed(double w) { return {Kind::kFixed, w}; }
  friend bool operator==(const WeightPolicy&, const WeightPolicy&) = default;
};

struct ExperimentConfig {
  std::filesystem::path store_path;
  PromptSource prompt_source = PromptSource::kPhotoTemplate;
  FusionMode fusion_mode = FusionMode::kStandard;
  WeightPolicy weight_policy;
  /// Defaults to the manifest's metric.
  std::optional<Metric> metric;
  /// Classify a demographic axis instead of the manifest classes.
  std::optional<std::string> classify_axis;
  std::optional<std::string> enrichment_axis;
  /// Record prompt-set tags; default from prompt_source (text) and
  /// cupl_single or the D3G tag (images).
  std::optional<std::string> text_set;
  std::optional<std::string> image_set;
  /// Keep only image records generated with this many images per prompt.
  std::optional<int> images_per_prompt;
  /// Evaluate only queries whose "split" tag matches.
  std::optional<std::string> eval_split;
  /// Choose w by scanning this split, then report on eval_split.
  std::optional<std::string> select_on;
  std::size_t confused_pairs = 10;
  /// Worker threads; never changes results and is not echoed in reports.
  unsigned threads = 1;

  std::string resolved_text_set() const;
  std::string resolved_image_set() const;

  /// Throws kConfigInvalid or kWeightOutOfRange.
  void validate() const;

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);
};

/// Config echo as written into reports (threads omitted).
std::string config_to_json(const ExperimentConfig& cfg);
/// Accepts the echo or a hand-written subset. Throws kConfigInvalid.
ExperimentConfig config_from_json(std::string_view text);

struct MethodResult {
  std::string label;
  FusionMode mode = FusionMode::kStandard;
  /// Chosen (w, 1 - w); text weight first.
  double text_weight = 1.0;
  double image_weight = 0.0;
  double metric_value = 0.0;
  double top1 = 0.0;
  double mean_per_class = 0.0;
  PerClassTable per_class;
};

struct EvalReport {
  ExperimentConfig config;
  std::string dataset_name;
  /// Class names (or axis values) in index order.
  std::vector<std::string> classes;
  Metric metric = Metric::kTop1;
  std::size_t num_queries = 0;
  /// Queries in the evaluated split without a usable label.
  std::size_t num_unlabeled = 0;
  /// Queries the weight was selected on (equal to num_queries unless
  /// select_on is set).
  std::size_t num_selection_queries = 0;
  MethodResult result;
  /// Text-only and image-only runs when the prototypes allow them.
  std::vector<MethodResult> baselines;
  std::optional<WeightScanResult> scan;
  std::vector<ConfusionPair> confused_pairs;
  std::vector<int> excluded_classes;
  /// Norm of each class's mean embedding before renormalization.
  std::vector<std::optional<double>> text_mean_norms;
  std::vector<std::optional<double>> image_mean_norms;
};

/// Label used in report tables: "Text only", "Standard fusion",
/// "Confidence fusion (w = 0.10)", ...
std::string method_label(FusionMode mode, const WeightPolicy& policy);

/// Loads the store, assembles prototypes and labeled queries, picks the
/// weight, evaluates and collects the analyses. Deterministic.
EvalReport run_experiment(const ExperimentConfig& cfg);

}  // namespace fusionkit
