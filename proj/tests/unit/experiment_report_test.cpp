#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "code_of.hpp"
#include "fixtures.hpp"
#include "fusionkit/error.hpp"
#include "fusionkit/experiment.hpp"
#include "fusionkit/report.hpp"
#include "fusionkit/store.hpp"
#include "fusionkit/synth.hpp"
#include "oracle.hpp"

using namespace fusionkit;
using fixtures::code_of;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

SynthSpec hard_spec() {
  SynthSpec spec;
  spec.num_classes = 5;
  spec.dim = 24;
  spec.queries_per_class = 30;
  spec.text_bias = 0.35;
  spec.image_bias = 0.3;
  spec.query_noise = 1.6;
  spec.seed = 11;
  return spec;
}

ExperimentConfig synth_config(const std::filesystem::path& store) {
  ExperimentConfig cfg;
  cfg.store_path = store;
  cfg.image_set = "cupl_single";
  return cfg;
}

struct CsvRow {
  std::string method, field, index, label, value;
};

std::vector<CsvRow> parse_csv(const std::string& text) {
  std::vector<CsvRow> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "method,field,index,label,value");
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cell += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += ch;
      }
    }
    cells.push_back(cell);
    EXPECT_EQ(cells.size(), 5u) << line;
    if (cells.size() == 5) rows.push_back({cells[0], cells[1], cells[2], cells[3], cells[4]});
  }
  return rows;
}

}  // namespace

TEST(Synth, SameSpecSameBytes) {
  fixtures::TempDir dir("synth");
  const auto spec = hard_spec();
  synth_fixture(spec, dir / "a.embs");
  synth_fixture(spec, dir / "b.embs");
  EXPECT_EQ(slurp(dir / "a.embs"), slurp(dir / "b.embs"));
  EXPECT_EQ(slurp(dir / "a.manifest.json"), slurp(dir / "b.manifest.json"));
  auto other = spec;
  other.seed = 12;
  synth_fixture(other, dir / "c.embs");
  EXPECT_NE(slurp(dir / "a.embs"), slurp(dir / "c.embs"));
}

TEST(Synth, Shape) {
  const auto spec = hard_spec();
  const auto store = synth_records(spec);
  EXPECT_EQ(store.manifest.classes.size(), 5u);
  EXPECT_EQ(store.manifest.dataset_name, "synthetic");
  std::size_t texts = 0, images = 0, queries = 0, test_split = 0;
  for (const auto& r : store.records) {
    EXPECT_EQ(r.embedding.dim(), 24u);
    texts += r.role == Role::kClassText;
    images += r.role == Role::kClassImage;
    queries += r.role == Role::kQuery;
    if (r.role == Role::kQuery) test_split += r.axis_tags.at("split") == "test";
  }
  EXPECT_EQ(texts, 5u);
  EXPECT_EQ(images, 25u);
  EXPECT_EQ(queries, 150u);
  EXPECT_EQ(test_split, 75u);
}

TEST(Synth, InvalidSpecs) {
  const auto bad = [](auto mutate) {
    SynthSpec s;
    mutate(s);
    return code_of([&] { synth_records(s); });
  };
  EXPECT_EQ(bad([](SynthSpec& s) { s.num_classes = 1; }), ErrorCode::kSpecInvalid);
  EXPECT_EQ(bad([](SynthSpec& s) { s.dim = 1; }), ErrorCode::kSpecInvalid);
  EXPECT_EQ(bad([](SynthSpec& s) { s.text_bias = 1.5; }), ErrorCode::kSpecInvalid);
  EXPECT_EQ(bad([](SynthSpec& s) { s.query_noise = -1.0; }), ErrorCode::kSpecInvalid);
  EXPECT_EQ(bad([](SynthSpec& s) {
              s.images_per_class = 0;
              s.prompts_per_class = 0;
            }),
            ErrorCode::kSpecInvalid);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig cfg;
  cfg.store_path = "data/idenprof.embs";
  cfg.prompt_source = PromptSource::kD3gTemplates;
  cfg.fusion_mode = FusionMode::kConfidence;
  cfg.weight_policy = WeightPolicy::fixed(0.25);
  cfg.metric = Metric::kMeanPerClass;
  cfg.classify_axis = "profession";
  cfg.enrichment_axis = "race7";
  cfg.images_per_prompt = 1;
  cfg.eval_split = "test";
  cfg.confused_pairs = 3;
  cfg.threads = 8;
  const auto back = config_from_json(config_to_json(cfg));
  EXPECT_EQ(back, cfg);
  EXPECT_EQ(back.threads, 1u);
  EXPECT_EQ(back.resolved_text_set(), "d3g/profession/race7");
  EXPECT_EQ(back.resolved_image_set(), "d3g/profession/race7");
  EXPECT_FALSE(json::parse(config_to_json(cfg)).contains("threads"));

  const auto minimal = config_from_json(R"({"store":"x.embs"})");
  EXPECT_EQ(minimal.prompt_source, PromptSource::kPhotoTemplate);
  EXPECT_EQ(minimal.weight_policy, WeightPolicy::scan());
  EXPECT_EQ(minimal.resolved_image_set(), "cupl_single");
}

TEST(Config, Invalid) {
  EXPECT_EQ(code_of([] { config_from_json("{"); }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(code_of([] { config_from_json(R"({"store":"x","prompt_source":"llm"})"); }),
            ErrorCode::kConfigInvalid);
  EXPECT_EQ(code_of([] { prompt_source_from_string("nope"); }), ErrorCode::kConfigInvalid);
  ExperimentConfig cfg;
  cfg.store_path = "x.embs";
  cfg.weight_policy = WeightPolicy::fixed(1.5);
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kWeightOutOfRange);
  cfg.weight_policy = WeightPolicy::scan();
  cfg.prompt_source = PromptSource::kD3gTemplates;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kConfigInvalid);
}

TEST(Labels, Methods) {
  EXPECT_EQ(method_label(FusionMode::kTextOnly, WeightPolicy::scan()), "Text only");
  EXPECT_EQ(method_label(FusionMode::kImageOnly, WeightPolicy::scan()), "Images only");
  EXPECT_EQ(method_label(FusionMode::kStandard, WeightPolicy::scan()), "Standard fusion");
  EXPECT_EQ(method_label(FusionMode::kConfidence, WeightPolicy::fixed(0.1)),
            "Confidence fusion (w = 0.10)");
}

TEST(Experiment, ScanMatchesOracleAndBaselines) {
  fixtures::TempDir dir("exp");
  const auto path = dir / "s.embs";
  synth_fixture(hard_spec(), path);
  const auto report = run_experiment(synth_config(path));
  ASSERT_TRUE(report.scan.has_value());
  EXPECT_EQ(report.num_queries, 150u);
  EXPECT_EQ(report.result.text_weight, report.scan->best_w);
  EXPECT_EQ(report.result.text_weight + report.result.image_weight, 1.0);
  EXPECT_EQ(report.result.metric_value, report.scan->best_accuracy);
  ASSERT_EQ(report.baselines.size(), 2u);
  EXPECT_EQ(report.baselines[0].label, "Text only");
  EXPECT_EQ(report.baselines[0].metric_value, report.scan->accuracy_at[100]);
  EXPECT_EQ(report.baselines[1].metric_value, report.scan->accuracy_at[0]);
  EXPECT_GE(report.result.metric_value, report.baselines[0].metric_value);
  EXPECT_GE(report.result.metric_value, report.baselines[1].metric_value);

  // Independent recount of the reported accuracy.
  const auto store = read_store(path);
  std::vector<std::vector<Embedding>> t(5), im(5);
  for (const auto& r : store.records) {
    if (r.role == Role::kClassText) t[static_cast<std::size_t>(r.class_index)].push_back(r.embedding);
    if (r.role == Role::kClassImage) im[static_cast<std::size_t>(r.class_index)].push_back(r.embedding);
  }
  std::vector<ClassProto> protos;
  for (int c = 0; c < 5; ++c) protos.push_back(make_class_proto(c, t[c], im[c]));
  const auto lp = oracle::lprotos(protos);
  std::size_t correct = 0;
  for (const auto& r : store.records) {
    if (r.role != Role::kQuery) continue;
    const auto s = oracle::scores(lp, oracle::to_l(r.embedding), FusionMode::kStandard,
                                  static_cast<long double>(report.result.text_weight));
    correct += oracle::argmax(s) == r.class_index;
  }
  EXPECT_EQ(report.result.top1, static_cast<double>(correct) / 150.0);
  for (const auto& n : report.text_mean_norms) EXPECT_NEAR(n.value(), 1.0, 1e-6);
  for (const auto& n : report.image_mean_norms) {
    EXPECT_GT(n.value(), 0.0);
    EXPECT_LT(n.value(), 1.0);
  }
}

TEST(Experiment, IdenticalAcrossThreadCounts) {
  fixtures::TempDir dir("exp-threads");
  const auto path = dir / "s.embs";
  synth_fixture(hard_spec(), path);
  for (auto mode : {FusionMode::kStandard, FusionMode::kConfidence}) {
    auto cfg = synth_config(path);
    cfg.fusion_mode = mode;
    const auto one = report_to_json(run_experiment(cfg));
    for (unsigned t : {2u, 3u, 8u}) {
      cfg.threads = t;
      EXPECT_EQ(report_to_json(run_experiment(cfg)), one);
    }
  }
}

TEST(Experiment, ConfigEchoReproducesReport) {
  fixtures::TempDir dir("exp-echo");
  const auto path = dir / "s.embs";
  synth_fixture(hard_spec(), path);
  auto cfg = synth_config(path);
  cfg.fusion_mode = FusionMode::kConfidence;
  cfg.confused_pairs = 4;
  const auto first = report_to_json(run_experiment(cfg));
  const auto echo = json::parse(first).at("config").dump();
  const auto again = report_to_json(run_experiment(config_from_json(echo)));
  EXPECT_EQ(again, first);
}

TEST(Experiment, FixedWeightAndSplits) {
  fixtures::TempDir dir("exp-split");
  const auto path = dir / "s.embs";
  synth_fixture(hard_spec(), path);
  auto cfg = synth_config(path);
  cfg.weight_policy = WeightPolicy::fixed(0.3);
  cfg.eval_split = "test";
  const auto fixed = run_experiment(cfg);
  EXPECT_FALSE(fixed.scan.has_value());
  EXPECT_EQ(fixed.num_queries, 75u);
  EXPECT_EQ(fixed.result.text_weight, 0.3);
  EXPECT_EQ(fixed.result.label, "Standard fusion (w = 0.30)");

  cfg.weight_policy = WeightPolicy::scan();
  cfg.select_on = "val";
  const auto selected = run_experiment(cfg);
  EXPECT_EQ(selected.num_selection_queries, 75u);
  EXPECT_EQ(selected.num_queries, 75u);
  ASSERT_TRUE(selected.scan.has_value());
  EXPECT_EQ(selected.result.text_weight, selected.scan->best_w);

  cfg.eval_split = "train";
  EXPECT_EQ(code_of([&] { run_experiment(cfg); }), ErrorCode::kEmptyEvalSet);
}

TEST(Experiment, Errors) {
  fixtures::TempDir dir("exp-err");
  auto cfg = synth_config(dir / "missing.embs");
  EXPECT_EQ(code_of([&] { run_experiment(cfg); }), ErrorCode::kIoError);
  const auto path = dir / "s.embs";
  synth_fixture(hard_spec(), path);
  cfg = synth_config(path);
  cfg.image_set = "nothing_here";
  cfg.fusion_mode = FusionMode::kImageOnly;
  EXPECT_EQ(code_of([&] { run_experiment(cfg); }), ErrorCode::kConfigInvalid);
  cfg.weight_policy = WeightPolicy::fixed(0.0);
  EXPECT_EQ(code_of([&] { run_experiment(cfg); }), ErrorCode::kMissingModality);
}

TEST(Experiment, ClassifiesDemographicAxis) {
  // Professions are the manifest classes; race7 is classified through
  // axis-tagged prototypes and race-tagged queries.
  fixtures::TempDir dir("exp-axis");
  std::mt19937_64 rng(3);
  const auto race7 = *find_registered_axis("race7");
  Manifest m;
  m.dataset_name = "IdenProf";
  m.classes = {"Chef", "Doctor"};
  m.axes = {race7};
  std::vector<EmbeddingRecord> records;
  const std::string set = d3g_set_tag("race7", "profession");
  for (std::size_t v = 0; v < race7.values.size(); ++v) {
    const auto dir_v = oracle::random_unit(rng, 16);
    const std::map<std::string, std::string> tags{
        {"prompt_set", set}, {"target", "race7"}, {"race7", race7.values[v]}};
    records.push_back({"t" + std::to_string(v), Role::kClassText, -1, tags, dir_v});
    records.push_back({"i" + std::to_string(v), Role::kClassImage, -1, tags, dir_v});
    for (int q = 0; q < 3; ++q) {
      std::vector<float> noisy(dir_v.values().begin(), dir_v.values().end());
      const auto noise = oracle::random_unit(rng, 16);
      for (std::size_t d = 0; d < noisy.size(); ++d) noisy[d] += 0.3f * noise[d];
      records.push_back({"q" + std::to_string(v) + "-" + std::to_string(q), Role::kQuery, q % 2,
                         {{"race7", race7.values[v]}}, normalize(std::span<const float>(noisy))});
    }
  }
  records.push_back({"q-unknown", Role::kQuery, 0, {}, oracle::random_unit(rng, 16)});
  const auto path = dir / "idenprof.embs";
  write_store(records, m, path);

  ExperimentConfig cfg;
  cfg.store_path = path;
  cfg.prompt_source = PromptSource::kD3gTemplates;
  cfg.classify_axis = "race7";
  cfg.enrichment_axis = "profession";
  const auto report = run_experiment(cfg);
  EXPECT_EQ(report.classes, race7.values);
  EXPECT_EQ(report.num_queries, 21u);
  EXPECT_EQ(report.num_unlabeled, 1u);
  EXPECT_EQ(report.result.per_class.per_class_accuracy.size(), 7u);
  EXPECT_EQ(report.result.top1, 1.0);
  EXPECT_EQ(strategy_label(cfg), "d3g_templates (race7 + profession)");
}

TEST(Report, JsonRoundTripAndSchema) {
  fixtures::TempDir dir("report-json");
  const auto path = dir / "s.embs";
  synth_fixture(hard_spec(), path);
  auto cfg = synth_config(path);
  cfg.fusion_mode = FusionMode::kConfidence;
  const auto report = run_experiment(cfg);
  const auto text = report_to_json(report);
  const auto doc = json::parse(text);
  EXPECT_EQ(doc.at("schema"), "fusionkit.report/1");
  EXPECT_EQ(doc.at("metric_value"), report.result.metric_value);
  EXPECT_EQ(doc.at("scan").at("grid").size(), 101u);
  EXPECT_EQ(doc.at("result").at("per_class").size(), 5u);
  EXPECT_EQ(report_to_json(report_from_json(text)), text);
  EXPECT_EQ(code_of([] { report_from_json(R"({"schema":"x"})"); }), ErrorCode::kMalformedFile);
}

TEST(Report, CsvAgreesWithJson) {
  fixtures::TempDir dir("report-csv");
  const auto path = dir / "s.embs";
  synth_fixture(hard_spec(), path);
  const auto report = run_experiment(synth_config(path));
  const auto doc = json::parse(report_to_json(report));
  const auto rows = parse_csv(report_to_csv(report));
  std::size_t checked = 0, scan_rows = 0;
  for (const auto& row : rows) {
    if (row.method.empty() && row.field == "num_queries") {
      EXPECT_EQ(std::stoul(row.value), doc.at("num_queries").get<std::size_t>());
      ++checked;
    }
    if (row.method == "Standard fusion" && row.field == "metric_value") {
      EXPECT_EQ(std::strtod(row.value.c_str(), nullptr), doc.at("metric_value").get<double>());
      ++checked;
    }
    if (row.method == "Text only" && row.field == "top1") {
      EXPECT_EQ(std::strtod(row.value.c_str(), nullptr),
                doc.at("baselines").at(0).at("top1").get<double>());
      ++checked;
    }
    if (row.field == "scan_accuracy") {
      const auto k = std::stoul(row.index);
      EXPECT_EQ(std::strtod(row.value.c_str(), nullptr), report.scan->accuracy_at[k]);
      EXPECT_EQ(std::strtod(row.label.c_str(), nullptr), report.scan->grid[k]);
      ++scan_rows;
    }
  }
  EXPECT_EQ(checked, 3u);
  EXPECT_EQ(scan_rows, 101u);
}

TEST(Report, CsvQuotesAwkwardLabels) {
  fixtures::TempDir dir("report-quote");
  auto records = synth_records(hard_spec());
  records.manifest.classes[0] = "oak, \"red\"";
  const auto path = dir / "s.embs";
  write_store(records.records, records.manifest, path);
  const auto rows = parse_csv(report_to_csv(run_experiment(synth_config(path))));
  bool found = false;
  for (const auto& row : rows) found = found || row.label == "oak, \"red\"";
  EXPECT_TRUE(found);
}

TEST(Report, MarkdownSections) {
  fixtures::TempDir dir("report-md");
  const auto path = dir / "s.embs";
  synth_fixture(hard_spec(), path);
  const auto report = run_experiment(synth_config(path));
  const auto md = report_to_markdown(report);
  for (const char* heading : {"# Evaluation report: synthetic", "## Accuracy (%, top1)",
                              "## Per-class accuracy (%)", "## Weight scan",
                              "## Most confused pairs"}) {
    EXPECT_NE(md.find(heading), std::string::npos) << heading;
  }
  EXPECT_NE(md.find("| Standard fusion |"), std::string::npos);
  EXPECT_NE(md.find("| Text only |"), std::string::npos);

  const std::vector<EvalReport> both{report, report};
  const auto cmp = comparison_markdown(both);
  EXPECT_EQ(cmp.rfind("# Comparison", 0), 0u);
  EXPECT_NE(cmp.find("Weights (text, image)"), std::string::npos);
}

TEST(Report, EmitWritesEveryFormat) {
  fixtures::TempDir dir("report-emit");
  const auto path = dir / "s.embs";
  synth_fixture(hard_spec(), path);
  const auto report = run_experiment(synth_config(path));
  for (auto f : {ReportFormat::kJson, ReportFormat::kCsv, ReportFormat::kMarkdown}) {
    const auto out = dir / ("out." + to_string(f));
    emit_report(report, f, out);
    EXPECT_EQ(slurp(out), format_report(report, f));
  }
  EXPECT_EQ(report_format_from_string("md"), ReportFormat::kMarkdown);
  EXPECT_EQ(code_of([] { report_format_from_string("xml"); }), ErrorCode::kConfigInvalid);
}
