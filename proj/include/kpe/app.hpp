#pragma once

// Command implementations behind the `kpe` executable. Each one either
// returns normally or throws kpe::Error; the executable maps those to exit
// codes.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kpe/backend.hpp"
#include "kpe/chains.hpp"
#include "kpe/metrics.hpp"
#include "kpe/prompting.hpp"
#include "kpe/report.hpp"

namespace kpe::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitErrorRate = 2;

/// Environment variable holding the API key for the HTTP provider.
inline constexpr const char* kApiKeyEnv = "KPE_API_KEY";

struct RunConfig {
  std::string endpoint_url;
  std::string model_id = "gpt-4";
  std::filesystem::path cache_dir = ".kpe-cache";
  std::size_t max_in_flight = 4;
  prompting::ScoringMode scoring_mode = prompting::ScoringMode::cat5;
  std::vector<chains::Estimator> estimators = {
      chains::Estimator::prompt1_perplexity, chains::Estimator::prompt2_token,
      chains::Estimator::prompt3_sentence, chains::Estimator::cot1, chains::Estimator::cot2};
  metrics::DropPolicy drop_policy = metrics::DropPolicy::drop;
  chains::StepFailurePolicy step_failure = chains::StepFailurePolicy::abort_pair;
  std::filesystem::path segments;
  std::filesystem::path outputs;
  std::filesystem::path judgments;
  std::filesystem::path human_scores;
  std::filesystem::path mock_fixtures;
  std::string provider = "http";  // http or mock
  std::filesystem::path out_dir = "out";
  double temperature = 0.0;
  int max_tokens = 256;
  /// Largest tolerated share of unparsed scores per estimator.
  double error_threshold = 0.01;
  int timeout_s = 120;

  /// Keys accepted in the config file and as `--key value` overrides.
  static const std::vector<std::string>& keys();

  /// Relative paths are resolved against `base_dir`. Throws ConfigError for
  /// unknown keys and bad values.
  static RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);

  /// Applies one override; `key` may use '-' or '_'.
  void set(std::string_view key, std::string_view value);

  /// Checks max_in_flight and that the files needed for scoring exist.
  void validate_for_score() const;

  std::vector<chains::EstimatorKind> estimator_kinds() const;
  backend::GenParams gen_params() const;
};

/// "7d", "12h", "30m", "45s" or a bare number of seconds.
std::chrono::seconds parse_duration(std::string_view text);

/// Registry listing, one line per template or a JSON array with `json`.
void cmd_templates(std::ostream& out, bool json);

/// HTTP (after a reachability check; throws TransportError when the endpoint
/// does not answer) or mock provider, per `config.provider`.
std::unique_ptr<backend::CompletionProvider> make_provider(const RunConfig& config);

struct ScoreOutcome {
  std::vector<std::filesystem::path> files;
  std::vector<chains::ScoreTable> tables;
  std::size_t provider_calls = 0;
  /// Worst (dropped + errored) / total over the estimators.
  double worst_error_rate = 0.0;
  int exit_code = kExitOk;
};

/// Scores every configured estimator and writes `scores_<estimator>.jsonl`
/// into out_dir. Progress and the provider call count go to `log`.
ScoreOutcome cmd_score(const RunConfig& config, backend::CompletionProvider& provider,
                       std::ostream& log);

std::string score_file_name(chains::EstimatorKind kind);

struct ReportOptions {
  std::vector<std::filesystem::path> score_files;
  std::filesystem::path judgments;
  std::optional<std::filesystem::path> human_scores;
  std::filesystem::path out_dir;
  metrics::DropPolicy drop_policy = metrics::DropPolicy::drop;
  std::string model_id = "unknown";
};

/// Writes report.md and report.csv into out_dir; warnings go to `log`.
report::Report cmd_report(const ReportOptions& options, std::ostream& log);

/// Writes `<lp>_<system>_<seg>.svg` and `.json` per segment id into out_dir.
/// Throws NotFoundError naming the first unknown id before doing any work.
std::vector<std::filesystem::path> cmd_align(const RunConfig& config,
                                             backend::CompletionProvider& provider,
                                             std::string_view lp, std::string_view system_id,
                                             const std::vector<std::string>& seg_ids,
                                             std::ostream& log);

/// Throws IoError when `cache_dir` is not a directory.
std::size_t cmd_cache_gc(const std::filesystem::path& cache_dir, std::chrono::seconds max_age);

}  // namespace kpe::app
