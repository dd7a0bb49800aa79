#include "fusionkit/axes.hpp"

#include <cctype>

#include <fmt/format.h>
#include <json.hpp>

#include "fusionkit/error.hpp"
#include "registry_data.hpp"

namespace fusionkit {
namespace {

std::vector<DemographicAxis> parse_registry() {
  const auto doc = nlohmann::json::parse(registry_data::kAxesJson);
  std::vector<DemographicAxis> axes;
  for (const auto& entry : doc.at("axes")) {
    axes.push_back({entry.at("name").get<std::string>(),
                    entry.at("values").get<std::vector<std::string>>()});
  }
  return axes;
}

}  // namespace

const std::vector<DemographicAxis>& axis_registry() {
  static const std::vector<DemographicAxis> registry = parse_registry();
  return registry;
}

std::optional<DemographicAxis> find_registered_axis(std::string_view name) {
  for (const auto& axis : axis_registry()) {
    if (axis.name == name) return axis;
  }
  return std::nullopt;
}

void validate_axis(const DemographicAxis& axis) {
  if (axis.values.empty()) {
    throw Error(ErrorCode::kEmptyAxis, "axis '" + axis.name + "' has no values");
  }
  if (const auto reg = find_registered_axis(axis.name)) {
    if (reg->values.size() != axis.values.size()) {
      throw Error(ErrorCode::kConfigInvalid,
                  fmt::format("axis '{}' must have {} values, got {}", axis.name,
                              reg->values.size(), axis.values.size()));
    }
  }
}

std::string dataset_key(std::string_view dataset_name) {
  std::string key;
  for (const unsigned char ch : dataset_name) {
    if (std::isalnum(ch) != 0) {
      key.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  return key;
}

}  // namespace fusionkit
