#include "fusionkit/manifest.hpp"

#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "fusionkit/error.hpp"
#include "io_util.hpp"

namespace fusionkit {

using nlohmann::json;

std::string to_string(Metric metric) {
  return metric == Metric::kTop1 ? "top1" : "mean_per_class";
}

Metric metric_from_string(std::string_view name) {
  if (name == "top1") return Metric::kTop1;
  if (name == "mean_per_class") return Metric::kMeanPerClass;
  throw Error(ErrorCode::kConfigInvalid, fmt::format("unknown metric '{}'", name));
}

std::optional<Metric> registered_metric(std::string_view dataset_name) {
  const auto key = dataset_key(dataset_name);
  if (key == "flowers102" || key == "fgvcaircraft") return Metric::kMeanPerClass;
  if (key == "dtd" || key == "resisc45" || key == "idenprof") return Metric::kTop1;
  return std::nullopt;
}

std::optional<int> Manifest::class_index_of(std::string_view name) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

const DemographicAxis* Manifest::find_axis(std::string_view name) const {
  for (const auto& axis : axes) {
    if (axis.name == name) return &axis;
  }
  return nullptr;
}

void validate(const Manifest& manifest) {
  if (manifest.classes.size() < 2) {
    throw Error(ErrorCode::kManifestInvalid,
                fmt::format("manifest needs at least 2 classes, has {}",
                            manifest.classes.size()));
  }
  std::set<std::string> seen;
  for (const auto& name : manifest.classes) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::kManifestInvalid, "duplicate class name '" + name + "'");
    }
  }
  if (const auto expected = registered_metric(manifest.dataset_name);
      expected && *expected != manifest.metric) {
    throw Error(ErrorCode::kManifestInvalid,
                fmt::format("dataset '{}' reports {}, manifest says {}",
                            manifest.dataset_name, to_string(*expected),
                            to_string(manifest.metric)));
  }
  std::set<std::string> axis_names;
  for (const auto& axis : manifest.axes) {
    if (!axis_names.insert(axis.name).second) {
      throw Error(ErrorCode::kManifestInvalid, "duplicate axis '" + axis.name + "'");
    }
    validate_axis(axis);
  }
}

std::string manifest_to_json(const Manifest& manifest) {
  json axes = json::array();
  for (const auto& axis : manifest.axes) {
    axes.push_back({{"name", axis.name}, {"values", axis.values}});
  }
  json doc = {
      {"schema", kManifestSchema},
      {"dataset_name", manifest.dataset_name},
      {"classes", manifest.classes},
      {"axes", axes},
      {"metric", to_string(manifest.metric)},
      {"prompt_files", manifest.prompt_files},
  };
  return doc.dump(2) + "\n";
}

Manifest manifest_from_json(std::string_view text) {
  Manifest manifest;
  try {
    const auto doc = json::parse(text);
    if (doc.value("schema", std::string{}) != kManifestSchema) {
      throw Error(ErrorCode::kManifestInvalid,
                  fmt::format("expected schema '{}'", kManifestSchema));
    }
    manifest.dataset_name = doc.at("dataset_name").get<std::string>();
    manifest.classes = doc.at("classes").get<std::vector<std::string>>();
    if (doc.contains("axes")) {
      for (const auto& entry : doc.at("axes")) {
        manifest.axes.push_back({entry.at("name").get<std::string>(),
                                 entry.at("values").get<std::vector<std::string>>()});
      }
    }
    manifest.metric = metric_from_string(doc.at("metric").get<std::string>());
    if (doc.contains("prompt_files")) {
      manifest.prompt_files =
          doc.at("prompt_files").get<std::map<std::string, std::string>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kManifestInvalid, e.what());
  }
  validate(manifest);
  return manifest;
}

Manifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(detail::read_file(path));
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  validate(manifest);
  detail::write_file_atomic(path, manifest_to_json(manifest));
}

}  // namespace fusionkit
