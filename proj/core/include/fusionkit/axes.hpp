#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fusionkit {

/// An enumerated demographic attribute, e.g. race7 = {White, Black, ...}.
/// Values keep their registry capitalization; prompt rendering lowercases
/// them.
struct DemographicAxis {
  std::string name;
  std::vector<std::string> values;

  friend bool operator==(const DemographicAxis&, const DemographicAxis&) = default;
};

/// The checked-in registry of the five axes: profession (10), race7 (7),
/// race4 (4), gender (2), age (9).
const std::vector<DemographicAxis>& axis_registry();

/// Registry lookup by name; nullopt for unknown names.
std::optional<DemographicAxis> find_registered_axis(std::string_view name);

/// Throws kEmptyAxis for an axis without values and kConfigInvalid when a
/// registered axis name carries a different cardinality than the registry.
void validate_axis(const DemographicAxis& axis);

/// Lowercase alphanumerics only: "FGVC Aircraft" -> "fgvcaircraft".
std::string dataset_key(std::string_view dataset_name);

}  // namespace fusionkit
