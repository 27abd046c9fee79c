// kpe: score translations with prompt-based estimators, correlate with human
// rankings, and render token alignments.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kpe/app.hpp"
#include "kpe/errors.hpp"

namespace {

using kpe::app::RunConfig;

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

std::string dashed(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

// One `--key value` option per config key, with a few short aliases.
void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON run configuration");
  for (const auto& key : RunConfig::keys()) {
    std::string names = "--" + dashed(key);
    if (dashed(key) != key) names += ",--" + key;
    if (key == "scoring_mode") names += ",--mode";
    if (key == "out_dir") names += ",--out";
    cmd->add_option_function<std::string>(
        names, [&flags, key](const std::string& v) { flags.overrides[key] = v; },
        "override config key " + key);
  }
}

RunConfig build_config(const ConfigFlags& flags) {
  RunConfig cfg = flags.config_path.empty() ? RunConfig{} : RunConfig::load(flags.config_path);
  for (const auto& [key, value] : flags.overrides) cfg.set(key, value);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt-based translation quality estimation harness"};
  app.require_subcommand(1);

  auto* templates = app.add_subcommand("templates", "List builtin prompt templates");
  bool templates_json = false;
  templates->add_flag("--json", templates_json, "Machine-readable listing");

  ConfigFlags score_flags;
  auto* score = app.add_subcommand("score", "Score system outputs with the configured estimators");
  add_config_flags(score, score_flags);

  ConfigFlags report_flags;
  std::vector<std::string> report_files;
  auto* report = app.add_subcommand("report", "Correlate score files with human judgments");
  add_config_flags(report, report_flags);
  report->add_option("--scores,scores", report_files, "Score files (default: those of the config)");

  ConfigFlags align_flags;
  std::string align_lp;
  std::string align_system;
  std::vector<std::string> align_segs;
  auto* align = app.add_subcommand("align", "Token alignment heatmaps for selected segments");
  add_config_flags(align, align_flags);
  align->add_option("--lp", align_lp, "Language pair, e.g. de-en")->required();
  align->add_option("--system", align_system, "System id")->required();
  align->add_option("--seg", align_segs, "Segment id (repeatable)")->required();

  auto* cache = app.add_subcommand("cache", "Response cache maintenance");
  cache->require_subcommand(1);
  ConfigFlags gc_flags;
  std::string max_age = "30d";
  auto* gc = cache->add_subcommand("gc", "Delete cache entries older than --max-age");
  add_config_flags(gc, gc_flags);
  gc->add_option("--max-age", max_age, "Age limit such as 7d, 12h, 30m or 45s");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*templates) {
      kpe::app::cmd_templates(std::cout, templates_json);
      return kpe::app::kExitOk;
    }
    if (*score) {
      const auto cfg = build_config(score_flags);
      cfg.validate_for_score();
      auto provider = kpe::app::make_provider(cfg);
      return kpe::app::cmd_score(cfg, *provider, std::cerr).exit_code;
    }
    if (*report) {
      const auto cfg = build_config(report_flags);
      kpe::app::ReportOptions opts;
      for (const auto& f : report_files) opts.score_files.emplace_back(f);
      if (opts.score_files.empty()) {
        for (const auto& kind : cfg.estimator_kinds()) {
          opts.score_files.push_back(cfg.out_dir / kpe::app::score_file_name(kind));
        }
      }
      opts.judgments = cfg.judgments;
      if (!cfg.human_scores.empty()) opts.human_scores = cfg.human_scores;
      opts.out_dir = cfg.out_dir;
      opts.drop_policy = cfg.drop_policy;
      opts.model_id = cfg.model_id;
      kpe::app::cmd_report(opts, std::cerr);
      std::cerr << "wrote " << (opts.out_dir / "report.md").string() << " and report.csv\n";
      return kpe::app::kExitOk;
    }
    if (*align) {
      const auto cfg = build_config(align_flags);
      cfg.validate_for_score();
      auto provider = kpe::app::make_provider(cfg);
      kpe::app::cmd_align(cfg, *provider, align_lp, align_system, align_segs, std::cerr);
      return kpe::app::kExitOk;
    }
    if (*gc) {
      const auto cfg = build_config(gc_flags);
      const auto removed = kpe::app::cmd_cache_gc(cfg.cache_dir, kpe::app::parse_duration(max_age));
      std::cout << removed << "\n";
      return kpe::app::kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "kpe: error: " << e.what() << "\n";
    return kpe::app::kExitFailure;
  }
  return kpe::app::kExitFailure;
}
