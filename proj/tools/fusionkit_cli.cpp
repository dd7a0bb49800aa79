// fusionkit command-line harness.
//
// Verbs: synth, build-protos, eval, scan, report, prompts expand.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 bridge error.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "fusionkit/axes.hpp"
#include "fusionkit/bridge.hpp"
#include "fusionkit/cache.hpp"
#include "fusionkit/error.hpp"
#include "fusionkit/experiment.hpp"
#include "fusionkit/prompts.hpp"
#include "fusionkit/protos.hpp"
#include "fusionkit/report.hpp"
#include "fusionkit/store.hpp"
#include "fusionkit/synth.hpp"

namespace fk = fusionkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitBridge = 4;

fk::Error config_error(const std::string& what) {
  return fk::Error(fk::ErrorCode::kConfigInvalid, what);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fk::Error(fk::ErrorCode::kIoError, "cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw fk::Error(fk::ErrorCode::kIoError, "cannot write " + path);
  out << text;
  if (!out) throw fk::Error(fk::ErrorCode::kIoError, "write failed for " + path);
}

unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

fk::DemographicAxis resolve_axis(const fk::Manifest* manifest, const std::string& name) {
  if (manifest) {
    if (const auto* axis = manifest->find_axis(name)) return *axis;
  }
  if (auto axis = fk::find_registered_axis(name)) return *axis;
  throw config_error(fmt::format("unknown demographic axis '{}'", name));
}

struct GlobalOptions {
  unsigned threads = 1;
  std::string cache_dir;
};

// ---------------------------------------------------------------- synth

struct SynthOptions {
  std::string out;
  fk::SynthSpec spec;
};

void add_synth(CLI::App& app, SynthOptions& o, std::function<void()> run) {
  auto* cmd = app.add_subcommand("synth", "Write a seeded synthetic store");
  cmd->add_option("--out", o.out, "Store path (.embs); manifest goes alongside")->required();
  cmd->add_option("--classes", o.spec.num_classes, "Number of classes")->capture_default_str();
  cmd->add_option("--dim", o.spec.dim, "Embedding dimension")->capture_default_str();
  cmd->add_option("--queries-per-class", o.spec.queries_per_class)->capture_default_str();
  cmd->add_option("--text-bias", o.spec.text_bias, "Text row quality in [0, 1]")
      ->capture_default_str();
  cmd->add_option("--image-bias", o.spec.image_bias, "Image row quality in [0, 1]")
      ->capture_default_str();
  cmd->add_option("--seed", o.spec.seed)->capture_default_str();
  cmd->add_option("--images-per-class", o.spec.images_per_class)->capture_default_str();
  cmd->add_option("--prompts-per-class", o.spec.prompts_per_class)->capture_default_str();
  cmd->add_option("--query-noise", o.spec.query_noise)->capture_default_str();
  cmd->callback(std::move(run));
}

int run_synth(const SynthOptions& o) {
  fk::synth_fixture(o.spec, o.out);
  std::cerr << fmt::format("wrote {} and {}\n", o.out, fk::manifest_path_for(o.out).string());
  return kExitOk;
}

// --------------------------------------------------------- build-protos

struct BuildOptions {
  std::string store;
  std::string out;
  std::string source = "cupl_single";
  std::string classify;
  std::string enrich;
  std::string cupl;
  std::string overrides;
  std::string set_name;
  std::optional<int> images_per_prompt;
  int steps = 50;
  double guidance = 15.0;
  std::int64_t seed = 0;
  std::string bridge;
  std::string replay;
  std::string record;
};

void add_build(CLI::App& app, BuildOptions& o, std::function<void()> run) {
  auto* cmd = app.add_subcommand(
      "build-protos", "Embed prompts and generated images through the bridge into a store");
  cmd->add_option("--store", o.store, "Existing store (.embs with manifest)")->required();
  cmd->add_option("--out", o.out, "Output store (default: overwrite --store)");
  cmd->add_option("--source", o.source,
                  "photo_template | clip_templates | cupl_single | cupl_average | d3g_templates")
      ->capture_default_str();
  cmd->add_option("--classify", o.classify, "Axis the D3G prompts describe");
  cmd->add_option("--enrich", o.enrich, "Axis used to enrich the D3G prompts");
  cmd->add_option("--cupl", o.cupl, "CuPL prompt file (default: manifest prompt_files.cupl)");
  cmd->add_option("--overrides", o.overrides,
                  "JSON {class: [prompts]} replacing the prompts of listed classes");
  cmd->add_option("--set-name", o.set_name, "Record tag (default derived from --source)");
  cmd->add_option("--images-per-prompt", o.images_per_prompt,
                  "0, 1 or 5 (default: 5 for cupl_single, 1 for d3g, otherwise 0)");
  cmd->add_option("--steps", o.steps)->capture_default_str();
  cmd->add_option("--guidance", o.guidance)->capture_default_str();
  cmd->add_option("--seed", o.seed)->capture_default_str();
  auto* bridge = cmd->add_option("--bridge", o.bridge, "Bridge command run via /bin/sh -c");
  auto* replay = cmd->add_option("--replay", o.replay, "Serve bridge responses from JSONL");
  bridge->excludes(replay);
  cmd->add_option("--record", o.record, "Append every bridge exchange to this JSONL file");
  cmd->callback(std::move(run));
}

std::vector<fk::PromptSet> prompt_sets_for(const BuildOptions& o, const fk::Manifest& manifest,
                                           fk::PromptSource source,
                                           std::vector<std::string>& targets) {
  if (source == fk::PromptSource::kD3gTemplates) {
    if (o.classify.empty() || o.enrich.empty()) {
      throw config_error("d3g_templates needs --classify and --enrich");
    }
    std::vector<fk::DemographicAxis> axes{resolve_axis(&manifest, o.classify)};
    if (o.enrich != o.classify) axes.push_back(resolve_axis(&manifest, o.enrich));
    targets = axes.front().values;
    std::vector<fk::PromptSet> sets;
    for (const auto& t : targets) {
      auto set = fk::d3g_prompts(o.classify, o.enrich, t, axes);
      set.class_name = t;
      sets.push_back(std::move(set));
    }
    return sets;
  }
  if (!o.classify.empty()) {
    throw config_error("--classify builds axis prototypes with --source d3g_templates only");
  }
  targets = manifest.classes;
  switch (source) {
    case fk::PromptSource::kPhotoTemplate:
      return fk::photo_template_sets(manifest.classes);
    case fk::PromptSource::kClipTemplates:
      return fk::clip_template_set(manifest.dataset_name, manifest.classes);
    default: {
      std::string path = o.cupl;
      if (path.empty()) {
        const auto it = manifest.prompt_files.find("cupl");
        if (it == manifest.prompt_files.end()) {
          throw config_error("no --cupl file and no 'cupl' entry in the manifest");
        }
        path = it->second;
      }
      std::vector<std::string> warnings;
      const auto cupl = fk::load_cupl(path, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      return fk::cupl_sets_for(cupl, manifest.classes,
                               source == fk::PromptSource::kCuplSingle);
    }
  }
}

int run_build(const BuildOptions& o, const GlobalOptions& g) {
  auto store = fk::read_store(o.store);
  const auto source = fk::prompt_source_from_string(o.source);
  std::vector<std::string> targets;
  auto sets = prompt_sets_for(o, store.manifest, source, targets);
  if (!o.overrides.empty()) {
    auto overrides = fk::parse_cupl(read_text(o.overrides));
    for (auto& [name, set] : overrides) set.provenance = fk::PromptProvenance::kTemplate;
    fk::apply_prompt_overrides(sets, overrides);
  }

  fk::ProtoBuildOptions build;
  build.dataset = store.manifest.dataset_name;
  if (!o.set_name.empty()) {
    build.prompt_set = o.set_name;
  } else if (source == fk::PromptSource::kD3gTemplates) {
    build.prompt_set = fk::d3g_set_tag(o.classify, o.enrich);
  } else {
    build.prompt_set = fk::to_string(source);
  }
  const int default_ipp = source == fk::PromptSource::kCuplSingle     ? 5
                          : source == fk::PromptSource::kD3gTemplates ? 1
                                                                      : 0;
  build.generation = {o.images_per_prompt.value_or(default_ipp), o.steps, o.guidance, o.seed};
  if (source == fk::PromptSource::kD3gTemplates) build.target_axis = o.classify;

  std::unique_ptr<fk::Transport> transport;
  if (!o.bridge.empty()) {
    transport = std::make_unique<fk::ProcessTransport>(o.bridge);
  } else if (!o.replay.empty()) {
    transport = std::make_unique<fk::ReplayTransport>(o.replay);
  }
  if (transport && !o.record.empty()) {
    transport = std::make_unique<fk::RecordingTransport>(std::move(transport), o.record);
  }
  std::optional<fk::BridgeClient> client;
  if (transport) {
    client.emplace(std::move(transport),
                   store.dim ? std::optional<std::size_t>(store.dim) : std::nullopt);
  }
  fk::EmbeddingCache cache(g.cache_dir.empty() ? fk::EmbeddingCache::default_root()
                                               : std::filesystem::path(g.cache_dir));
  auto built = fk::build_class_protos(sets, build, client ? &*client : nullptr, cache);

  // Replace earlier records of the same prompt set, keep everything else.
  std::erase_if(store.records, [&](const fk::EmbeddingRecord& r) {
    const auto it = r.axis_tags.find("prompt_set");
    return r.role != fk::Role::kQuery && it != r.axis_tags.end() &&
           it->second == build.prompt_set;
  });
  for (auto& r : built.records) store.records.push_back(std::move(r));
  const auto out = o.out.empty() ? o.store : o.out;
  fk::write_store(store.records, store.manifest, out);
  std::cerr << fmt::format(
      "{}: {} classes, {} records from prompt set '{}' ({} bridge calls, {} cache hits)\n",
      out, built.protos.size(), built.records.size(), build.prompt_set, built.bridge_calls,
      built.cache_hits);
  return kExitOk;
}

// ------------------------------------------------------------ eval/scan

struct EvalOptions {
  std::string store;
  std::string source = "photo_template";
  std::string mode = "standard";
  double weight = 0.5;
  std::string metric;
  std::string classify;
  std::string enrich;
  std::string text_set;
  std::string image_set;
  std::optional<int> images_per_prompt;
  std::string eval_split;
  std::string select_on;
  std::size_t pairs = 10;
  std::string format = "json";
  std::string out;
};

CLI::App* add_eval_common(CLI::App& app, const std::string& name, const std::string& help,
                          EvalOptions& o) {
  auto* cmd = app.add_subcommand(name, help);
  cmd->add_option("--store", o.store, "Store path (.embs)")->required();
  cmd->add_option("--source", o.source, "Prompt strategy the prototypes come from")
      ->capture_default_str();
  cmd->add_option("--mode", o.mode, "text_only | image_only | standard | confidence")
      ->capture_default_str();
  cmd->add_option("--metric", o.metric, "top1 | mean_per_class (default: manifest)");
  cmd->add_option("--classify", o.classify, "Classify a demographic axis");
  cmd->add_option("--enrich", o.enrich, "Enrichment axis of the D3G prompts");
  cmd->add_option("--text-set", o.text_set, "Prompt-set tag of the text records");
  cmd->add_option("--image-set", o.image_set, "Prompt-set tag of the image records");
  cmd->add_option("--images-per-prompt", o.images_per_prompt, "Filter image records (1 or 5)");
  cmd->add_option("--eval-split", o.eval_split, "Evaluate queries of this split only");
  cmd->add_option("--pairs", o.pairs, "Confused pairs to report")->capture_default_str();
  cmd->add_option("--format", o.format, "json | csv | markdown")->capture_default_str();
  cmd->add_option("--out", o.out, "Output file (default: stdout)");
  return cmd;
}

fk::ExperimentConfig to_config(const EvalOptions& o, bool scan, const GlobalOptions& g) {
  fk::ExperimentConfig cfg;
  cfg.store_path = o.store;
  cfg.prompt_source = fk::prompt_source_from_string(o.source);
  cfg.fusion_mode = fk::fusion_mode_from_string(o.mode);
  cfg.weight_policy = scan ? fk::WeightPolicy::scan() : fk::WeightPolicy::fixed(o.weight);
  auto opt = [](const std::string& s) {
    return s.empty() ? std::nullopt : std::optional<std::string>(s);
  };
  if (!o.metric.empty()) cfg.metric = fk::metric_from_string(o.metric);
  cfg.classify_axis = opt(o.classify);
  cfg.enrichment_axis = opt(o.enrich);
  cfg.text_set = opt(o.text_set);
  cfg.image_set = opt(o.image_set);
  cfg.images_per_prompt = o.images_per_prompt;
  cfg.eval_split = opt(o.eval_split);
  cfg.select_on = opt(o.select_on);
  cfg.confused_pairs = o.pairs;
  cfg.threads = resolve_threads(g.threads);
  return cfg;
}

int run_eval(const EvalOptions& o, bool scan, const GlobalOptions& g) {
  const auto format = fk::report_format_from_string(o.format);
  const auto report = fk::run_experiment(to_config(o, scan, g));
  if (o.out.empty() || o.out == "-") {
    std::cout << fk::format_report(report, format);
  } else {
    fk::emit_report(report, format, o.out);
  }
  return kExitOk;
}

// --------------------------------------------------------------- report

struct ReportOptions {
  std::vector<std::string> inputs;
  std::string format = "markdown";
  std::string out;
};

int run_report(const ReportOptions& o) {
  std::vector<fk::EvalReport> reports;
  for (const auto& path : o.inputs) reports.push_back(fk::report_from_json(read_text(path)));
  const auto format = fk::report_format_from_string(o.format);
  std::string text;
  if (reports.size() == 1) {
    text = fk::format_report(reports.front(), format);
  } else if (format == fk::ReportFormat::kMarkdown) {
    text = fk::comparison_markdown(reports);
  } else {
    throw config_error("several reports can only be combined as markdown");
  }
  write_output(o.out, text);
  return kExitOk;
}

// -------------------------------------------------------------- prompts

struct PromptOptions {
  std::string tmpl;
  std::string target;
  std::string target_slot = "class";
  std::string classify;
  std::string enrich;
  std::string clip;
  std::string manifest;
};

int run_prompts(const PromptOptions& o) {
  std::optional<fk::Manifest> manifest;
  if (!o.manifest.empty()) manifest = fk::load_manifest(o.manifest);
  const fk::Manifest* m = manifest ? &*manifest : nullptr;
  const int modes = !o.tmpl.empty() + !o.classify.empty() + !o.clip.empty();
  if (modes != 1) throw config_error("give exactly one of --template, --classify, --clip");

  fk::PromptSet set;
  if (!o.clip.empty()) {
    const std::vector<std::string> classes{o.target};
    set = fk::clip_template_set(o.clip, classes).front();
  } else if (!o.classify.empty()) {
    const auto enrich = o.enrich.empty() ? o.classify : o.enrich;
    std::vector<fk::DemographicAxis> axes{resolve_axis(m, o.classify)};
    if (enrich != o.classify) axes.push_back(resolve_axis(m, enrich));
    set = fk::d3g_prompts(o.classify, enrich, o.target, axes);
  } else {
    std::vector<fk::DemographicAxis> axes;
    for (const auto& name : fk::placeholders(o.tmpl)) {
      if (name == o.target_slot || name == "class") continue;
      const auto* found = m ? m->find_axis(name) : nullptr;
      if (found) {
        axes.push_back(*found);
        continue;
      }
      if (auto reg = fk::find_registered_axis(name == "prof" ? "profession" : name)) {
        axes.push_back(*reg);
      } else if (name == "race") {
        axes.push_back(*fk::find_registered_axis("race7"));
      }
    }
    set = fk::expand(fk::PromptTemplate{o.tmpl, o.target_slot}, o.target, axes);
  }
  for (const auto& p : set.prompts) std::cout << p << "\n";
  return kExitOk;
}

int exit_code_for(const fk::Error& e) {
  switch (fk::category_of(e.code())) {
    case fk::ErrorCategory::kConfig: return kExitConfig;
    case fk::ErrorCategory::kData: return kExitData;
    case fk::ErrorCategory::kBridge: return kExitBridge;
  }
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fusionkit: zero-shot text/image embedding fusion and evaluation"};
  app.set_config("--config", "", "key = value file; command-line flags win");
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--threads", global.threads, "Worker threads (0 = all cores)")
      ->capture_default_str();
  app.add_option("--cache-dir", global.cache_dir,
                 "Bridge cache root (default: $FUSIONKIT_CACHE_DIR or .fusionkit-cache)");

  std::function<int()> action;

  SynthOptions synth;
  add_synth(app, synth, [&] { action = [&] { return run_synth(synth); }; });

  BuildOptions build;
  add_build(app, build, [&] { action = [&] { return run_build(build, global); }; });

  EvalOptions eval_opts;
  auto* eval = add_eval_common(app, "eval", "Evaluate at a fixed weight", eval_opts);
  eval->add_option("--weight", eval_opts.weight, "Text weight w in [0, 1]")
      ->capture_default_str();
  eval->callback([&] { action = [&] { return run_eval(eval_opts, false, global); }; });

  EvalOptions scan_opts;
  auto* scan = add_eval_common(app, "scan", "Scan w over 0.00..1.00 and evaluate at the best",
                               scan_opts);
  scan->add_option("--select-on", scan_opts.select_on,
                   "Pick w on this split instead of the evaluated queries");
  scan->callback([&] { action = [&] { return run_eval(scan_opts, true, global); }; });

  ReportOptions report;
  auto* rep = app.add_subcommand("report", "Re-emit or combine JSON reports");
  rep->add_option("--in", report.inputs, "Report JSON file (repeatable)")->required();
  rep->add_option("--format", report.format, "json | csv | markdown")->capture_default_str();
  rep->add_option("--out", report.out, "Output file (default: stdout)");
  rep->callback([&] { action = [&] { return run_report(report); }; });

  PromptOptions prompts;
  auto* pr = app.add_subcommand("prompts", "Prompt utilities");
  pr->require_subcommand(1);
  auto* expand = pr->add_subcommand("expand", "Print the prompts for one target, one per line");
  expand->add_option("--template", prompts.tmpl, "Pattern with <axis> placeholders");
  expand->add_option("--target", prompts.target, "Target class")->required();
  expand->add_option("--target-slot", prompts.target_slot, "Placeholder for the target")
      ->capture_default_str();
  expand->add_option("--classify", prompts.classify, "D3G: axis being classified");
  expand->add_option("--enrich", prompts.enrich, "D3G: enrichment axis");
  expand->add_option("--clip", prompts.clip, "CLIP template set of this dataset");
  expand->add_option("--manifest", prompts.manifest, "Take axes from this manifest");
  expand->callback([&] { action = [&] { return run_prompts(prompts); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    return action ? action() : kExitConfig;
  } catch (const fk::Error& e) {
    std::cerr << "fusionkit: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "fusionkit: " << e.what() << "\n";
    return kExitData;
  }
}
