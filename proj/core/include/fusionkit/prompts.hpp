#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusionkit/axes.hpp"

namespace fusionkit {

enum class PromptProvenance { kTemplate, kCuplFile, kClipTemplate };

std::string to_string(PromptProvenance provenance);

/// A pattern with <name> placeholders. Placeholders name a demographic axis
/// ("race7", "gender", ...; "prof" and "race" are accepted aliases) or the
/// target slot, which is filled with the class being described.
struct PromptTemplate {
  std::string pattern;
  std::string target_slot = "class";
};

/// Placeholder names in order of first appearance, without duplicates.
std::vector<std::string> placeholders(std::string_view pattern);

struct PromptSet {
  std::string class_name;
  std::vector<std::string> prompts;
  PromptProvenance provenance = PromptProvenance::kTemplate;

  friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

/// Cartesian expansion of every axis placeholder; the target slot is filled
/// with `target_class` verbatim, axis values are lowercased. Expansion order
/// follows placeholder order, then axis value order.
/// Throws kUnknownPlaceholder, kEmptyAxis.
PromptSet expand(const PromptTemplate& tmpl, std::string_view target_class,
                 std::span<const DemographicAxis> axes);

/// Demographic-diverse template for classifying `classify_axis` with prompts
/// enriched by `enrichment_axis` (the same axis gives the plain template).
/// Every template starts with "A photo of a". Throws kConfigInvalid for
/// unsupported pairs (race7 with race4).
PromptTemplate d3g_template(std::string_view classify_axis,
                            std::string_view enrichment_axis);

/// Expands the D3G template for one target class. A target that is a value of
/// the classified axis is lowercased like any axis value.
PromptSet d3g_prompts(std::string_view classify_axis, std::string_view enrichment_axis,
                      std::string_view target_class,
                      std::span<const DemographicAxis> axes);

/// "A photo of a <class>" for each class.
std::vector<PromptSet> photo_template_sets(std::span<const std::string> classes);

/// Registered CLIP evaluation templates ("{}" marks the class name).
/// Throws kUnknownDataset.
const std::vector<std::string>& clip_templates(std::string_view dataset_name);

/// One PromptSet per class with every registered template filled in.
std::vector<PromptSet> clip_template_set(std::string_view dataset_name,
                                         std::span<const std::string> classes);

/// Parses {"class name": ["prompt", ...], ...}. Duplicate prompts are dropped
/// and reported through `warnings`. Throws kMalformedFile, kEmptyClassEntry.
std::map<std::string, PromptSet> parse_cupl(std::string_view json_text,
                                            std::vector<std::string>* warnings = nullptr);
std::map<std::string, PromptSet> load_cupl(const std::filesystem::path& path,
                                           std::vector<std::string>* warnings = nullptr);

/// Orders CuPL sets by class list. `single` keeps only the first prompt.
/// Throws kEmptyClassEntry when a class is missing from the file.
std::vector<PromptSet> cupl_sets_for(const std::map<std::string, PromptSet>& cupl,
                                     std::span<const std::string> classes, bool single);

/// Replaces the prompts of the named classes (e.g. a hand-written description
/// for a class the generator does not know). Throws kInvalidArgument when an
/// override names a class that is not in `sets`.
void apply_prompt_overrides(std::vector<PromptSet>& sets,
                            const std::map<std::string, PromptSet>& overrides);

}  // namespace fusionkit
