#include "fusionkit/experiment.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>
#include <json.hpp>

#include "fusionkit/axes.hpp"
#include "fusionkit/error.hpp"
#include "fusionkit/protos.hpp"
#include "fusionkit/store.hpp"

namespace fusionkit {

using nlohmann::json;

namespace {

Error config_error(const std::string& what) { return Error(ErrorCode::kConfigInvalid, what); }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  return doc.at(key).get<T>();
}

DemographicAxis resolve_axis(const Manifest& manifest, const std::string& name) {
  if (const auto* axis = manifest.find_axis(name)) return *axis;
  if (auto axis = find_registered_axis(name)) return *axis;
  throw config_error(fmt::format("unknown demographic axis '{}'", name));
}

struct Queries {
  EvalSet labeled;
  std::size_t unlabeled = 0;
};

// Queries of one split (all splits when `split` is empty), labeled by class
// index or, when classifying an axis, by their tag for that axis.
Queries collect_queries(const Store& store, const std::vector<std::string>& targets,
                        const std::optional<std::string>& axis,
                        const std::optional<std::string>& split) {
  std::map<std::string, int> by_value;
  for (std::size_t i = 0; i < targets.size(); ++i) by_value.emplace(targets[i], static_cast<int>(i));
  // When the axis values are the manifest classes (professions in a
  // profession dataset), untagged queries fall back to their class index.
  bool classes_are_axis = axis.has_value() && targets.size() == store.manifest.classes.size();
  for (std::size_t i = 0; classes_are_axis && i < targets.size(); ++i) {
    classes_are_axis = lower(targets[i]) == lower(store.manifest.classes[i]);
  }

  Queries out;
  for (const auto& r : store.records) {
    if (r.role != Role::kQuery) continue;
    if (split) {
      const auto it = r.axis_tags.find("split");
      if (it == r.axis_tags.end() || it->second != *split) continue;
    }
    int label = -1;
    if (axis) {
      if (const auto it = r.axis_tags.find(*axis); it != r.axis_tags.end()) {
        if (const auto v = by_value.find(it->second); v != by_value.end()) label = v->second;
      } else if (classes_are_axis) {
        label = r.class_index;
      }
    } else {
      label = r.class_index;
    }
    if (label < 0) {
      ++out.unlabeled;
      continue;
    }
    out.labeled.push_back(LabeledQuery{r.id, r.embedding, label});
  }
  return out;
}

MethodResult evaluate_method(std::string label, const EvalSet& evalset,
                             std::span<const ClassProto> protos, FusionMode mode, double weight,
                             Metric metric, std::size_t num_classes, unsigned threads,
                             std::vector<int>* predictions_out = nullptr) {
  const FusionConfig cfg{mode, weight};
  const auto predictions = predict_all(evalset, protos, cfg, threads);
  const auto labels = labels_of(evalset);
  MethodResult m;
  m.label = std::move(label);
  m.mode = mode;
  m.text_weight = cfg.effective_weight();
  m.image_weight = 1.0 - m.text_weight;
  m.top1 = top1(predictions, labels);
  m.mean_per_class = mean_per_class(predictions, labels, num_classes);
  m.metric_value = metric == Metric::kTop1 ? m.top1 : m.mean_per_class;
  m.per_class = per_class_table(predictions, labels, num_classes);
  if (predictions_out) *predictions_out = predictions;
  return m;
}

}  // namespace

std::string to_string(PromptSource source) {
  switch (source) {
    case PromptSource::kPhotoTemplate: return "photo_template";
    case PromptSource::kClipTemplates: return "clip_templates";
    case PromptSource::kCuplSingle: return "cupl_single";
    case PromptSource::kCuplAverage: return "cupl_average";
    case PromptSource::kD3gTemplates: return "d3g_templates";
  }
  return "photo_template";
}

PromptSource prompt_source_from_string(std::string_view name) {
  for (auto s : {PromptSource::kPhotoTemplate, PromptSource::kClipTemplates,
                 PromptSource::kCuplSingle, PromptSource::kCuplAverage,
                 PromptSource::kD3gTemplates}) {
    if (to_string(s) == name) return s;
  }
  throw config_error(fmt::format("unknown prompt source '{}'", name));
}

std::string d3g_set_tag(std::string_view classify_axis, std::string_view enrichment_axis) {
  return fmt::format("d3g/{}/{}", classify_axis, enrichment_axis);
}

std::string ExperimentConfig::resolved_text_set() const {
  if (text_set) return *text_set;
  if (prompt_source == PromptSource::kD3gTemplates) {
    return d3g_set_tag(classify_axis.value_or(""), enrichment_axis.value_or(""));
  }
  return to_string(prompt_source);
}

std::string ExperimentConfig::resolved_image_set() const {
  if (image_set) return *image_set;
  if (prompt_source == PromptSource::kD3gTemplates) return resolved_text_set();
  return to_string(PromptSource::kCuplSingle);
}

void ExperimentConfig::validate() const {
  if (store_path.empty()) throw config_error("no store path");
  if (prompt_source == PromptSource::kD3gTemplates && (!classify_axis || !enrichment_axis)) {
    throw config_error("d3g_templates needs both a classify axis and an enrichment axis");
  }
  if (enrichment_axis && !classify_axis) {
    throw config_error("an enrichment axis needs a classify axis");
  }
  if (weight_policy.kind == WeightPolicy::Kind::kFixed) {
    FusionConfig{fusion_mode, weight_policy.weight}.validate();
  } else if (fusion_mode != FusionMode::kStandard && fusion_mode != FusionMode::kConfidence) {
    throw config_error(fmt::format("weight scan needs standard or confidence fusion, not {}",
                                   to_string(fusion_mode)));
  }
  if (select_on && weight_policy.kind != WeightPolicy::Kind::kScan) {
    throw config_error("select_on only applies to a weight scan");
  }
  if (images_per_prompt && *images_per_prompt != 1 && *images_per_prompt != 5) {
    throw config_error(fmt::format("images_per_prompt must be 1 or 5, got {}",
                                   *images_per_prompt));
  }
  if (confused_pairs == 0) throw config_error("confused_pairs must be at least 1");
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

std::string config_to_json(const ExperimentConfig& cfg) {
  const bool fixed = cfg.weight_policy.kind == WeightPolicy::Kind::kFixed;
  json doc = {
      {"store", cfg.store_path.generic_string()},
      {"prompt_source", to_string(cfg.prompt_source)},
      {"fusion_mode", to_string(cfg.fusion_mode)},
      {"weight_policy", fixed ? "fixed" : "scan"},
      {"weight", fixed ? json(cfg.weight_policy.weight) : json(nullptr)},
      {"metric", cfg.metric ? json(to_string(*cfg.metric)) : json(nullptr)},
      {"classify_axis", opt(cfg.classify_axis)},
      {"enrichment_axis", opt(cfg.enrichment_axis)},
      {"text_set", opt(cfg.text_set)},
      {"image_set", opt(cfg.image_set)},
      {"images_per_prompt", opt(cfg.images_per_prompt)},
      {"eval_split", opt(cfg.eval_split)},
      {"select_on", opt(cfg.select_on)},
      {"confused_pairs", cfg.confused_pairs},
  };
  return doc.dump();
}

ExperimentConfig config_from_json(std::string_view text) {
  ExperimentConfig cfg;
  try {
    const auto doc = json::parse(text);
    if (!doc.is_object()) throw config_error("config is not a JSON object");
    cfg.store_path = doc.at("store").get<std::string>();
    if (auto s = get_opt<std::string>(doc, "prompt_source")) {
      cfg.prompt_source = prompt_source_from_string(*s);
    }
    if (auto s = get_opt<std::string>(doc, "fusion_mode")) {
      cfg.fusion_mode = fusion_mode_from_string(*s);
    }
    const auto policy = get_opt<std::string>(doc, "weight_policy").value_or("scan");
    if (policy == "fixed") {
      cfg.weight_policy = WeightPolicy::fixed(doc.at("weight").get<double>());
    } else if (policy != "scan") {
      throw config_error(fmt::format("unknown weight policy '{}'", policy));
    }
    if (auto s = get_opt<std::string>(doc, "metric")) cfg.metric = metric_from_string(*s);
    cfg.classify_axis = get_opt<std::string>(doc, "classify_axis");
    cfg.enrichment_axis = get_opt<std::string>(doc, "enrichment_axis");
    cfg.text_set = get_opt<std::string>(doc, "text_set");
    cfg.image_set = get_opt<std::string>(doc, "image_set");
    cfg.images_per_prompt = get_opt<int>(doc, "images_per_prompt");
    cfg.eval_split = get_opt<std::string>(doc, "eval_split");
    cfg.select_on = get_opt<std::string>(doc, "select_on");
    cfg.confused_pairs = get_opt<std::size_t>(doc, "confused_pairs").value_or(10);
  } catch (const json::exception& e) {
    throw config_error(fmt::format("bad config: {}", e.what()));
  } catch (const Error& e) {
    if (category_of(e.code()) == ErrorCategory::kConfig) throw;
    throw config_error(e.what());
  }
  return cfg;
}

std::string method_label(FusionMode mode, const WeightPolicy& policy) {
  std::string base;
  switch (mode) {
    case FusionMode::kTextOnly: return "Text only";
    case FusionMode::kImageOnly: return "Images only";
    case FusionMode::kStandard: base = "Standard fusion"; break;
    case FusionMode::kConfidence: base = "Confidence fusion"; break;
  }
  if (policy.kind == WeightPolicy::Kind::kFixed) {
    return fmt::format("{} (w = {:.2f})", base, policy.weight);
  }
  return base;
}

EvalReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto store = read_store(cfg.store_path);
  const auto& manifest = store.manifest;

  EvalReport report;
  report.config = cfg;
  report.dataset_name = manifest.dataset_name;
  report.metric = cfg.metric.value_or(manifest.metric);

  std::optional<std::string> target_axis;
  if (cfg.classify_axis) {
    report.classes = resolve_axis(manifest, *cfg.classify_axis).values;
    target_axis = cfg.classify_axis;
    if (cfg.enrichment_axis) resolve_axis(manifest, *cfg.enrichment_axis);
  } else {
    report.classes = manifest.classes;
  }
  const auto n = report.classes.size();

  const ProtoSelection selection{cfg.resolved_text_set(), cfg.resolved_image_set(),
                                 cfg.images_per_prompt, target_axis};
  const auto protos = protos_from_records(store.records, report.classes, selection);

  auto queries = collect_queries(store, report.classes, target_axis, cfg.eval_split);
  if (queries.labeled.empty()) {
    throw Error(ErrorCode::kEmptyEvalSet,
                fmt::format("no labeled queries{}",
                            cfg.eval_split ? " in split '" + *cfg.eval_split + "'" : ""));
  }
  report.num_queries = queries.labeled.size();
  report.num_unlabeled = queries.unlabeled;
  report.num_selection_queries = report.num_queries;

  double weight = cfg.weight_policy.weight;
  if (cfg.weight_policy.kind == WeightPolicy::Kind::kScan) {
    if (cfg.select_on) {
      const auto selection_queries =
          collect_queries(store, report.classes, target_axis, cfg.select_on);
      report.num_selection_queries = selection_queries.labeled.size();
      report.scan = scan_weights(selection_queries.labeled, protos, cfg.fusion_mode,
                                 report.metric, cfg.threads);
    } else {
      report.scan =
          scan_weights(queries.labeled, protos, cfg.fusion_mode, report.metric, cfg.threads);
    }
    weight = report.scan->best_w;
  }

  std::vector<int> predictions;
  report.result = evaluate_method(method_label(cfg.fusion_mode, cfg.weight_policy),
                                  queries.labeled, protos, cfg.fusion_mode, weight,
                                  report.metric, n, cfg.threads, &predictions);
  report.excluded_classes = report.result.per_class.excluded_classes;

  const bool all_text = std::all_of(protos.begin(), protos.end(),
                                    [](const ClassProto& p) { return p.has_text(); });
  const bool all_image = std::all_of(protos.begin(), protos.end(),
                                     [](const ClassProto& p) { return p.has_image(); });
  if (all_text && cfg.fusion_mode != FusionMode::kTextOnly) {
    report.baselines.push_back(evaluate_method("Text only", queries.labeled, protos,
                                               FusionMode::kTextOnly, 1.0, report.metric, n,
                                               cfg.threads));
  }
  if (all_image && cfg.fusion_mode != FusionMode::kImageOnly) {
    report.baselines.push_back(evaluate_method("Images only", queries.labeled, protos,
                                               FusionMode::kImageOnly, 0.0, report.metric, n,
                                               cfg.threads));
  }

  const FusionConfig chosen{cfg.fusion_mode, weight};
  report.confused_pairs =
      top_confused_pairs(predictions, labels_of(queries.labeled), cfg.confused_pairs);
  for (auto& pair : report.confused_pairs) {
    try {
      pair.pair_binary_accuracy = pair_subset_eval(queries.labeled, protos, chosen,
                                                   pair.true_class, pair.predicted_class);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptySubset) throw;
    }
  }

  for (const auto& p : protos) {
    report.text_mean_norms.push_back(p.has_text() ? std::optional(p.text_mean_norm)
                                                  : std::nullopt);
    report.image_mean_norms.push_back(p.has_image() ? std::optional(p.image_mean_norm)
                                                    : std::nullopt);
  }
  return report;
}

}  // namespace fusionkit
