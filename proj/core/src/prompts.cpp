#include "fusionkit/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "fusionkit/error.hpp"
#include "io_util.hpp"
#include "registry_data.hpp"

namespace fusionkit {
namespace {

constexpr std::string_view kClassSlot = "class";

bool is_name_char(char ch) {
  return std::isalnum(static_cast<unsigned char>(ch)) != 0 || ch == '_';
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::string canonical_slot(std::string_view name) {
  if (name == "prof") return "profession";
  return std::string(name);
}

bool is_race_axis(std::string_view name) { return name == "race7" || name == "race4"; }

// A template is a sequence of literal text and placeholder references.
struct Piece {
  bool is_slot = false;
  std::string text;
};

std::vector<Piece> tokenize(std::string_view pattern) {
  std::vector<Piece> pieces;
  std::string literal;
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern[i] == '<') {
      std::size_t j = i + 1;
      while (j < pattern.size() && is_name_char(pattern[j])) ++j;
      if (j < pattern.size() && pattern[j] == '>' && j > i + 1) {
        if (!literal.empty()) pieces.push_back({false, std::move(literal)});
        literal.clear();
        pieces.push_back({true, std::string(pattern.substr(i + 1, j - i - 1))});
        i = j + 1;
        continue;
      }
    }
    literal.push_back(pattern[i]);
    ++i;
  }
  if (!literal.empty()) pieces.push_back({false, std::move(literal)});
  return pieces;
}

const DemographicAxis* resolve_axis(std::string_view slot,
                                    std::span<const DemographicAxis> axes) {
  for (const auto& axis : axes) {
    if (axis.name == slot) return &axis;
  }
  if (slot == "race") {
    for (const auto& axis : axes) {
      if (is_race_axis(axis.name)) return &axis;
    }
  }
  return nullptr;
}

std::vector<std::string> dedupe(std::vector<std::string> prompts,
                                std::vector<std::string>* dropped) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  out.reserve(prompts.size());
  for (auto& p : prompts) {
    if (seen.insert(p).second) {
      out.push_back(std::move(p));
    } else if (dropped != nullptr) {
      dropped->push_back(p);
    }
  }
  return out;
}

std::unordered_map<std::string, std::vector<std::string>> parse_clip_registry() {
  const auto doc = nlohmann::json::parse(registry_data::kClipTemplatesJson);
  std::unordered_map<std::string, std::vector<std::string>> out;
  for (const auto& [name, templates] : doc.at("datasets").items()) {
    out[dataset_key(name)] = templates.get<std::vector<std::string>>();
  }
  return out;
}

}  // namespace

std::string to_string(PromptProvenance provenance) {
  switch (provenance) {
    case PromptProvenance::kTemplate: return "template";
    case PromptProvenance::kCuplFile: return "cupl_file";
    case PromptProvenance::kClipTemplate: return "clip_template";
  }
  return "unknown";
}

std::vector<std::string> placeholders(std::string_view pattern) {
  std::vector<std::string> names;
  for (const auto& piece : tokenize(pattern)) {
    if (piece.is_slot &&
        std::find(names.begin(), names.end(), piece.text) == names.end()) {
      names.push_back(piece.text);
    }
  }
  return names;
}

PromptSet expand(const PromptTemplate& tmpl, std::string_view target_class,
                 std::span<const DemographicAxis> axes) {
  const auto pieces = tokenize(tmpl.pattern);
  const auto target_slot = canonical_slot(tmpl.target_slot);

  // Distinct axes in order of first appearance; slot_axis[p] is the index of
  // the axis filling piece p, or -1 for literals and the target slot.
  std::vector<const DemographicAxis*> used;
  std::vector<int> slot_axis(pieces.size(), -1);
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    if (!pieces[p].is_slot) continue;
    const auto slot = canonical_slot(pieces[p].text);
    if (slot == target_slot || slot == kClassSlot) continue;
    const auto* axis = resolve_axis(slot, axes);
    if (axis == nullptr) {
      throw Error(ErrorCode::kUnknownPlaceholder,
                  fmt::format("placeholder <{}> in '{}' matches no axis", pieces[p].text,
                              tmpl.pattern));
    }
    if (axis->values.empty()) {
      throw Error(ErrorCode::kEmptyAxis, "axis '" + axis->name + "' has no values");
    }
    auto it = std::find(used.begin(), used.end(), axis);
    if (it == used.end()) {
      used.push_back(axis);
      it = used.end() - 1;
    }
    slot_axis[p] = static_cast<int>(it - used.begin());
  }

  PromptSet set;
  set.class_name = std::string(target_class);
  set.provenance = PromptProvenance::kTemplate;
  // Mixed-radix walk over the used axes; the last-listed axis varies fastest.
  std::size_t total = 1;
  for (const auto* axis : used) total *= axis->values.size();
  std::vector<std::size_t> choice(used.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t rest = n;
    for (std::size_t a = used.size(); a-- > 0;) {
      choice[a] = rest % used[a]->values.size();
      rest /= used[a]->values.size();
    }
    std::string prompt;
    for (std::size_t p = 0; p < pieces.size(); ++p) {
      if (!pieces[p].is_slot) {
        prompt += pieces[p].text;
      } else if (slot_axis[p] < 0) {
        prompt += target_class;
      } else {
        const auto a = static_cast<std::size_t>(slot_axis[p]);
        prompt += lowercase(used[a]->values[choice[a]]);
      }
    }
    set.prompts.push_back(std::move(prompt));
  }
  set.prompts = dedupe(std::move(set.prompts), nullptr);
  return set;
}

PromptTemplate d3g_template(std::string_view classify_axis,
                            std::string_view enrichment_axis) {
  const std::string target(classify_axis);
  const std::string extra(enrichment_axis);
  const auto slot = [](const std::string& name) { return "<" + name + ">"; };
  const auto unsupported = [&] {
    return Error(ErrorCode::kConfigInvalid,
                 fmt::format("no demographic template for classifying {} with {}",
                             classify_axis, enrichment_axis));
  };
  const auto known = [](std::string_view a) {
    return a == "profession" || is_race_axis(a) || a == "gender" || a == "age";
  };
  if (!known(classify_axis) || !known(enrichment_axis)) throw unsupported();

  std::string pattern;
  if (classify_axis == enrichment_axis) {
    if (target == "profession" || target == "gender") {
      pattern = "A photo of a " + slot(target);
    } else if (is_race_axis(target)) {
      pattern = "A photo of a " + slot(target) + " person";
    } else {  // age
      pattern = "A photo of a <age> year old";
    }
  } else if (target == "profession") {
    if (extra == "age") {
      pattern = "A photo of a <age> year old <profession>";
    } else {  // race7, race4, gender
      pattern = "A photo of a " + slot(extra) + " <profession>";
    }
  } else if (is_race_axis(target)) {
    if (is_race_axis(extra)) throw unsupported();
    if (extra == "age") {
      pattern = "A photo of a <age> year old " + slot(target) + " person";
    } else {  // profession, gender
      pattern = "A photo of a " + slot(target) + " " + slot(extra);
    }
  } else if (target == "gender") {
    if (extra == "profession") {
      pattern = "A photo of a <gender> <profession>";
    } else if (is_race_axis(extra)) {
      pattern = "A photo of a " + slot(extra) + " <gender>";
    } else {  // age
      pattern = "A photo of a <age> year old <gender> person";
    }
  } else {  // classifying age
    if (extra == "profession") {
      pattern = "A photo of a <age> year old <profession>";
    } else if (is_race_axis(extra)) {
      pattern = "A photo of a <age> year old " + slot(extra) + " person";
    } else {  // gender
      pattern = "A photo of a <age> year old <gender>";
    }
  }
  return {pattern, target};
}

PromptSet d3g_prompts(std::string_view classify_axis, std::string_view enrichment_axis,
                      std::string_view target_class,
                      std::span<const DemographicAxis> axes) {
  const auto tmpl = d3g_template(classify_axis, enrichment_axis);
  std::string target(target_class);
  for (const auto& axis : axes) {
    if (axis.name != classify_axis) continue;
    for (const auto& v : axis.values) {
      if (lowercase(v) == lowercase(target_class)) target = lowercase(target_class);
    }
  }
  auto set = expand(tmpl, target, axes);
  set.class_name = std::string(target_class);
  return set;
}

std::vector<PromptSet> photo_template_sets(std::span<const std::string> classes) {
  std::vector<PromptSet> sets;
  sets.reserve(classes.size());
  for (const auto& c : classes) {
    sets.push_back({c, {"A photo of a " + c}, PromptProvenance::kTemplate});
  }
  return sets;
}

const std::vector<std::string>& clip_templates(std::string_view dataset_name) {
  static const auto registry = parse_clip_registry();
  const auto it = registry.find(dataset_key(dataset_name));
  if (it == registry.end()) {
    throw Error(ErrorCode::kUnknownDataset,
                fmt::format("no CLIP templates registered for '{}'", dataset_name));
  }
  return it->second;
}

std::vector<PromptSet> clip_template_set(std::string_view dataset_name,
                                         std::span<const std::string> classes) {
  const auto& templates = clip_templates(dataset_name);
  std::vector<PromptSet> sets;
  sets.reserve(classes.size());
  for (const auto& c : classes) {
    PromptSet set{c, {}, PromptProvenance::kClipTemplate};
    for (const auto& t : templates) {
      std::string prompt = t;
      const auto pos = prompt.find("{}");
      if (pos != std::string::npos) prompt.replace(pos, 2, c);
      set.prompts.push_back(std::move(prompt));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

std::map<std::string, PromptSet> parse_cupl(std::string_view json_text,
                                            std::vector<std::string>* warnings) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::kMalformedFile, "CuPL file must be a JSON object");
  }
  std::map<std::string, PromptSet> out;
  for (const auto& [name, prompts] : doc.items()) {
    if (!prompts.is_array()) {
      throw Error(ErrorCode::kMalformedFile, "entry for '" + name + "' is not a list");
    }
    if (prompts.empty()) {
      throw Error(ErrorCode::kEmptyClassEntry, "no prompts for class '" + name + "'");
    }
    std::vector<std::string> raw;
    for (const auto& p : prompts) {
      if (!p.is_string()) {
        throw Error(ErrorCode::kMalformedFile,
                    "non-string prompt for class '" + name + "'");
      }
      raw.push_back(p.get<std::string>());
    }
    std::vector<std::string> dropped;
    auto unique = dedupe(std::move(raw), &dropped);
    if (warnings != nullptr) {
      for (const auto& d : dropped) {
        warnings->push_back(fmt::format("class '{}': dropped duplicate prompt \"{}\"",
                                        name, d));
      }
    }
    out[name] = PromptSet{name, std::move(unique), PromptProvenance::kCuplFile};
  }
  return out;
}

std::map<std::string, PromptSet> load_cupl(const std::filesystem::path& path,
                                           std::vector<std::string>* warnings) {
  return parse_cupl(detail::read_file(path), warnings);
}

std::vector<PromptSet> cupl_sets_for(const std::map<std::string, PromptSet>& cupl,
                                     std::span<const std::string> classes, bool single) {
  std::vector<PromptSet> sets;
  sets.reserve(classes.size());
  for (const auto& c : classes) {
    const auto it = cupl.find(c);
    if (it == cupl.end()) {
      throw Error(ErrorCode::kEmptyClassEntry, "CuPL prompts missing class '" + c + "'");
    }
    auto set = it->second;
    if (single) set.prompts.resize(1);
    sets.push_back(std::move(set));
  }
  return sets;
}

void apply_prompt_overrides(std::vector<PromptSet>& sets,
                            const std::map<std::string, PromptSet>& overrides) {
  for (const auto& [name, replacement] : overrides) {
    auto it = std::find_if(sets.begin(), sets.end(),
                           [&](const PromptSet& s) { return s.class_name == name; });
    if (it == sets.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "prompt override for unknown class '" + name + "'");
    }
    it->prompts = replacement.prompts;
    it->provenance = replacement.provenance;
  }
}

}  // namespace fusionkit
