#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fusionkit/axes.hpp"

namespace fusionkit {

enum class Metric { kTop1, kMeanPerClass };

std::string to_string(Metric metric);
Metric metric_from_string(std::string_view name);

/// Reporting convention for the benchmark datasets: Flowers 102 and FGVC
/// Aircraft use mean per-class accuracy, DTD, RESISC45 and IdenProf use top-1.
std::optional<Metric> registered_metric(std::string_view dataset_name);

/// Dataset description stored next to an EMBS file as UTF-8 JSON.
struct Manifest {
  std::string dataset_name;
  std::vector<std::string> classes;
  std::vector<DemographicAxis> axes;
  Metric metric = Metric::kTop1;
  std::map<std::string, std::string> prompt_files;

  std::size_t num_classes() const noexcept { return classes.size(); }
  std::optional<int> class_index_of(std::string_view name) const;
  const DemographicAxis* find_axis(std::string_view name) const;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline constexpr std::string_view kManifestSchema = "fusionkit.manifest/1";

/// Throws kManifestInvalid (duplicate classes, fewer than two classes, metric
/// that contradicts the dataset's registered convention) or the axis errors
/// of `validate_axis`.
void validate(const Manifest& manifest);

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(std::string_view text);

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

}  // namespace fusionkit
