#include "fusionkit/report.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "fusionkit/error.hpp"
#include "io_util.hpp"

namespace fusionkit {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string class_name(const EvalReport& r, int idx) {
  if (idx >= 0 && static_cast<std::size_t>(idx) < r.classes.size()) {
    return r.classes[static_cast<std::size_t>(idx)];
  }
  return fmt::format("#{}", idx);
}

ordered_json method_json(const EvalReport& r, const MethodResult& m) {
  ordered_json per_class = ordered_json::array();
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    const int idx = static_cast<int>(c);
    const auto acc = m.per_class.per_class_accuracy.find(idx);
    per_class.push_back({
        {"class", idx},
        {"name", r.classes[c]},
        {"support", m.per_class.support.contains(idx) ? m.per_class.support.at(idx) : 0},
        {"correct", m.per_class.correct.contains(idx) ? m.per_class.correct.at(idx) : 0},
        {"accuracy", acc == m.per_class.per_class_accuracy.end() ? ordered_json(nullptr)
                                                                 : ordered_json(acc->second)},
    });
  }
  return {{"label", m.label},
          {"mode", to_string(m.mode)},
          {"text_weight", m.text_weight},
          {"image_weight", m.image_weight},
          {"metric_value", m.metric_value},
          {"top1", m.top1},
          {"mean_per_class", m.mean_per_class},
          {"per_class", per_class}};
}

MethodResult method_from_json(const json& doc) {
  MethodResult m;
  m.label = doc.at("label").get<std::string>();
  m.mode = fusion_mode_from_string(doc.at("mode").get<std::string>());
  m.text_weight = doc.at("text_weight").get<double>();
  m.image_weight = doc.at("image_weight").get<double>();
  m.metric_value = doc.at("metric_value").get<double>();
  m.top1 = doc.at("top1").get<double>();
  m.mean_per_class = doc.at("mean_per_class").get<double>();
  for (const auto& row : doc.at("per_class")) {
    const int idx = row.at("class").get<int>();
    const auto support = row.at("support").get<std::size_t>();
    if (support == 0) {
      m.per_class.excluded_classes.push_back(idx);
      continue;
    }
    m.per_class.support[idx] = support;
    m.per_class.correct[idx] = row.at("correct").get<std::size_t>();
    m.per_class.per_class_accuracy[idx] = row.at("accuracy").get<double>();
  }
  return m;
}

ordered_json norms_json(const std::vector<std::optional<double>>& norms) {
  ordered_json out = ordered_json::array();
  for (const auto& n : norms) out.push_back(n ? ordered_json(*n) : ordered_json(nullptr));
  return out;
}

std::vector<std::optional<double>> norms_from_json(const json& doc) {
  std::vector<std::optional<double>> out;
  for (const auto& n : doc) {
    out.push_back(n.is_null() ? std::nullopt : std::optional(n.get<double>()));
  }
  return out;
}

std::string number(double v) { return fmt::format("{}", v); }

std::string percent(double v) { return fmt::format("{:.2f}", 100.0 * v); }

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string md_cell(std::string_view s) {
  std::string out;
  for (char ch : s) {
    if (ch == '|') out += "\\|";
    else if (ch == '\n') out.push_back(' ');
    else out.push_back(ch);
  }
  return out;
}

std::string weight_pair(const MethodResult& m) {
  return fmt::format("({:.2f}, {:.2f})", m.text_weight, m.image_weight);
}

bool is_fused(const MethodResult& m) {
  return m.mode == FusionMode::kStandard || m.mode == FusionMode::kConfidence;
}

}  // namespace

std::string to_string(ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: return "json";
    case ReportFormat::kCsv: return "csv";
    case ReportFormat::kMarkdown: return "markdown";
  }
  return "json";
}

ReportFormat report_format_from_string(std::string_view name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  throw Error(ErrorCode::kConfigInvalid, fmt::format("unknown report format '{}'", name));
}

std::string strategy_label(const ExperimentConfig& cfg) {
  if (cfg.prompt_source == PromptSource::kD3gTemplates) {
    return fmt::format("{} ({} + {})", to_string(cfg.prompt_source),
                       cfg.classify_axis.value_or("?"), cfg.enrichment_axis.value_or("?"));
  }
  return to_string(cfg.prompt_source);
}

std::string report_to_json(const EvalReport& r) {
  ordered_json doc;
  doc["schema"] = kReportSchema;
  doc["config"] = ordered_json::parse(config_to_json(r.config));
  doc["dataset"] = r.dataset_name;
  doc["classes"] = r.classes;
  doc["metric"] = to_string(r.metric);
  doc["metric_value"] = r.result.metric_value;
  doc["weights"] = {{"text", r.result.text_weight}, {"image", r.result.image_weight}};
  doc["num_queries"] = r.num_queries;
  doc["num_unlabeled"] = r.num_unlabeled;
  doc["num_selection_queries"] = r.num_selection_queries;
  doc["result"] = method_json(r, r.result);
  doc["baselines"] = ordered_json::array();
  for (const auto& b : r.baselines) doc["baselines"].push_back(method_json(r, b));
  if (r.scan) {
    doc["scan"] = {{"grid", r.scan->grid},
                   {"accuracy", r.scan->accuracy_at},
                   {"best_w", r.scan->best_w},
                   {"best_accuracy", r.scan->best_accuracy},
                   {"best_index", r.scan->best_index}};
  } else {
    doc["scan"] = nullptr;
  }
  doc["confused_pairs"] = ordered_json::array();
  for (const auto& p : r.confused_pairs) {
    ordered_json pa = nullptr;
    if (p.pair_binary_accuracy) {
      pa = ordered_json::array({p.pair_binary_accuracy->first, p.pair_binary_accuracy->second});
    }
    doc["confused_pairs"].push_back({{"true_class", p.true_class},
                                     {"true_name", class_name(r, p.true_class)},
                                     {"predicted_class", p.predicted_class},
                                     {"predicted_name", class_name(r, p.predicted_class)},
                                     {"count", p.count},
                                     {"pair_accuracy", pa}});
  }
  doc["excluded_classes"] = r.excluded_classes;
  doc["centroid_norms"] = {{"text", norms_json(r.text_mean_norms)},
                           {"image", norms_json(r.image_mean_norms)}};
  return doc.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view text) {
  EvalReport r;
  try {
    const auto doc = json::parse(text);
    if (doc.value("schema", "") != kReportSchema) {
      throw Error(ErrorCode::kMalformedFile, "not a fusionkit report");
    }
    r.config = config_from_json(doc.at("config").dump());
    r.dataset_name = doc.at("dataset").get<std::string>();
    r.classes = doc.at("classes").get<std::vector<std::string>>();
    r.metric = metric_from_string(doc.at("metric").get<std::string>());
    r.num_queries = doc.at("num_queries").get<std::size_t>();
    r.num_unlabeled = doc.at("num_unlabeled").get<std::size_t>();
    r.num_selection_queries = doc.at("num_selection_queries").get<std::size_t>();
    r.result = method_from_json(doc.at("result"));
    for (const auto& b : doc.at("baselines")) r.baselines.push_back(method_from_json(b));
    if (!doc.at("scan").is_null()) {
      const auto& s = doc.at("scan");
      WeightScanResult scan;
      scan.grid = s.at("grid").get<std::vector<double>>();
      scan.accuracy_at = s.at("accuracy").get<std::vector<double>>();
      scan.best_w = s.at("best_w").get<double>();
      scan.best_accuracy = s.at("best_accuracy").get<double>();
      scan.best_index = s.at("best_index").get<std::size_t>();
      r.scan = std::move(scan);
    }
    for (const auto& p : doc.at("confused_pairs")) {
      ConfusionPair pair{p.at("true_class").get<int>(), p.at("predicted_class").get<int>(),
                         p.at("count").get<std::size_t>(), std::nullopt};
      if (!p.at("pair_accuracy").is_null()) {
        const auto& pa = p.at("pair_accuracy");
        pair.pair_binary_accuracy = std::pair(pa.at(0).get<double>(), pa.at(1).get<double>());
      }
      r.confused_pairs.push_back(pair);
    }
    r.excluded_classes = doc.at("excluded_classes").get<std::vector<int>>();
    r.text_mean_norms = norms_from_json(doc.at("centroid_norms").at("text"));
    r.image_mean_norms = norms_from_json(doc.at("centroid_norms").at("image"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedFile, fmt::format("bad report: {}", e.what()));
  }
  return r;
}

std::string report_to_csv(const EvalReport& r) {
  std::string out = "method,field,index,label,value\n";
  auto row = [&](std::string_view method, std::string_view field, std::string_view index,
                 std::string_view label, std::string_view value) {
    out += fmt::format("{},{},{},{},{}\n", csv_field(method), field, index, csv_field(label),
                       value);
  };
  row("", "num_queries", "", "", std::to_string(r.num_queries));
  row("", "num_unlabeled", "", "", std::to_string(r.num_unlabeled));
  row("", "metric", "", to_string(r.metric), number(r.result.metric_value));

  std::vector<const MethodResult*> methods{&r.result};
  for (const auto& b : r.baselines) methods.push_back(&b);
  for (const auto* m : methods) {
    row(m->label, "metric_value", "", "", number(m->metric_value));
    row(m->label, "top1", "", "", number(m->top1));
    row(m->label, "mean_per_class", "", "", number(m->mean_per_class));
    row(m->label, "text_weight", "", "", number(m->text_weight));
    row(m->label, "image_weight", "", "", number(m->image_weight));
    for (const auto& [idx, acc] : m->per_class.per_class_accuracy) {
      const auto i = std::to_string(idx);
      row(m->label, "per_class_accuracy", i, class_name(r, idx), number(acc));
      row(m->label, "per_class_support", i, class_name(r, idx),
          std::to_string(m->per_class.support.at(idx)));
    }
  }
  if (r.scan) {
    for (std::size_t k = 0; k < r.scan->grid.size(); ++k) {
      row(r.result.label, "scan_accuracy", std::to_string(k), number(r.scan->grid[k]),
          number(r.scan->accuracy_at[k]));
    }
  }
  for (std::size_t i = 0; i < r.confused_pairs.size(); ++i) {
    const auto& p = r.confused_pairs[i];
    const auto label = fmt::format("{}->{}", class_name(r, p.true_class),
                                   class_name(r, p.predicted_class));
    row(r.result.label, "confused_count", std::to_string(i), label, std::to_string(p.count));
    if (p.pair_binary_accuracy) {
      row(r.result.label, "confused_pair_accuracy_true", std::to_string(i), label,
          number(p.pair_binary_accuracy->first));
      row(r.result.label, "confused_pair_accuracy_predicted", std::to_string(i), label,
          number(p.pair_binary_accuracy->second));
    }
  }
  return out;
}

std::string report_to_markdown(const EvalReport& r) {
  const auto& cfg = r.config;
  std::string out = fmt::format("# Evaluation report: {}\n\n", md_cell(r.dataset_name));
  out += fmt::format("- Prompt strategy: {} (text set `{}`, image set `{}`)\n",
                     strategy_label(cfg), cfg.resolved_text_set(), cfg.resolved_image_set());
  out += fmt::format("- Fusion: {}, weight policy: {}\n", to_string(cfg.fusion_mode),
                     cfg.weight_policy.kind == WeightPolicy::Kind::kScan
                         ? std::string("scan")
                         : fmt::format("fixed w = {:.2f}", cfg.weight_policy.weight));
  out += fmt::format("- Metric: {}\n", to_string(r.metric));
  out += fmt::format("- Queries: {} evaluated, {} unlabeled", r.num_queries, r.num_unlabeled);
  if (cfg.eval_split) out += fmt::format(", split `{}`", *cfg.eval_split);
  out += "\n";
  if (cfg.select_on) {
    out += fmt::format("- Weight selected on split `{}` ({} queries)\n", *cfg.select_on,
                       r.num_selection_queries);
  }
  out += fmt::format("- Weights (text, image): {}\n", weight_pair(r.result));
  if (!r.excluded_classes.empty()) {
    std::vector<std::string> names;
    for (int c : r.excluded_classes) names.push_back(class_name(r, c));
    out += fmt::format("- Classes without queries (excluded): {}\n", fmt::join(names, ", "));
  }

  std::vector<const MethodResult*> methods;
  for (const auto& b : r.baselines) methods.push_back(&b);
  methods.push_back(&r.result);

  out += fmt::format("\n## Accuracy (%, {})\n\n", to_string(r.metric));
  out += fmt::format("| Method | {} |\n|---|---:|\n", md_cell(strategy_label(cfg)));
  for (const auto* m : methods) {
    out += fmt::format("| {} | {} |\n", md_cell(m->label), percent(m->metric_value));
  }

  out += "\n## Per-class accuracy (%)\n\n| Method |";
  for (const auto& c : r.classes) out += fmt::format(" {} |", md_cell(c));
  out += "\n|---|";
  for (std::size_t c = 0; c < r.classes.size(); ++c) out += "---:|";
  out += "\n";
  for (const auto* m : methods) {
    out += fmt::format("| {} |", md_cell(m->label));
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
      const auto it = m->per_class.per_class_accuracy.find(static_cast<int>(c));
      out += it == m->per_class.per_class_accuracy.end() ? " n/a |"
                                                         : fmt::format(" {} |", percent(it->second));
    }
    out += "\n";
  }

  if (r.scan) {
    out += fmt::format("\n## Weight scan\n\nBest w = {:.2f} ({} = {}%) over {} grid points.\n",
                       r.scan->best_w, to_string(r.metric), percent(r.scan->best_accuracy),
                       r.scan->grid.size());
  }

  if (!r.confused_pairs.empty()) {
    out += "\n## Most confused pairs\n\n"
           "| True class | Predicted as | Count | Pair accuracy (true, predicted) |\n"
           "|---|---|---:|---|\n";
    for (const auto& p : r.confused_pairs) {
      const auto acc = p.pair_binary_accuracy
                           ? fmt::format("({}, {})", percent(p.pair_binary_accuracy->first),
                                         percent(p.pair_binary_accuracy->second))
                           : std::string("n/a");
      out += fmt::format("| {} | {} | {} | {} |\n", md_cell(class_name(r, p.true_class)),
                         md_cell(class_name(r, p.predicted_class)), p.count, acc);
    }
  }
  return out;
}

std::string format_report(const EvalReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: return report_to_json(report);
    case ReportFormat::kCsv: return report_to_csv(report);
    case ReportFormat::kMarkdown: return report_to_markdown(report);
  }
  return report_to_json(report);
}

void emit_report(const EvalReport& report, ReportFormat format,
                 const std::filesystem::path& path) {
  detail::write_file_atomic(path, format_report(report, format));
}

std::string comparison_markdown(std::span<const EvalReport> reports) {
  std::vector<std::string> columns;
  std::vector<std::string> rows;
  std::map<std::pair<std::string, std::string>, const MethodResult*> cells;
  auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : reports) {
    const auto col = strategy_label(r.config);
    add_unique(columns, col);
    std::vector<const MethodResult*> methods;
    for (const auto& b : r.baselines) methods.push_back(&b);
    methods.push_back(&r.result);
    for (const auto* m : methods) {
      add_unique(rows, m->label);
      cells.emplace(std::pair(m->label, col), m);
    }
  }

  auto table = [&](const std::string& title, bool weights) {
    std::string out = fmt::format("## {}\n\n| Method |", title);
    for (const auto& c : columns) out += fmt::format(" {} |", md_cell(c));
    out += "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) out += weights ? "---|" : "---:|";
    out += "\n";
    for (const auto& row : rows) {
      std::string line = fmt::format("| {} |", md_cell(row));
      bool any = false;
      for (const auto& c : columns) {
        const auto it = cells.find({row, c});
        if (it == cells.end() || (weights && !is_fused(*it->second))) {
          line += " |";
          continue;
        }
        any = true;
        line += fmt::format(" {} |", weights ? weight_pair(*it->second)
                                             : percent(it->second->metric_value));
      }
      if (any) out += line + "\n";
    }
    return out;
  };

  std::string out = "# Comparison\n\n";
  out += table("Accuracy (%)", false);
  out += "\n";
  out += table("Weights (text, image)", true);
  return out;
}

}  // namespace fusionkit
