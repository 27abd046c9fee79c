#pragma once

// The estimators: the one-step classifier baseline, the three one-step KPE
// prompts (perplexity, token similarity, sentence similarity) and the two
// chain-of-thought composites that feed step answers into a combining
// prompt. Execution is stage-synchronous over a whole dataset.

#include <compare>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kpe/backend.hpp"
#include "kpe/corpus.hpp"
#include "kpe/prompting.hpp"

namespace kpe::chains {

enum class Estimator { gemba, prompt1_perplexity, prompt2_token, prompt3_sentence, cot1, cot2 };

inline constexpr Estimator kAllEstimators[] = {
    Estimator::gemba,        Estimator::prompt1_perplexity, Estimator::prompt2_token,
    Estimator::prompt3_sentence, Estimator::cot1,           Estimator::cot2};

std::string_view to_string(Estimator e);
/// Accepts the canonical names and the short aliases prompt1/prompt2/prompt3.
Estimator parse_estimator(std::string_view name);
bool is_chain(Estimator e);

struct EstimatorKind {
  Estimator estimator = Estimator::gemba;
  prompting::ScoringMode mode = prompting::ScoringMode::cat5;

  bool operator==(const EstimatorKind&) const = default;
};

enum class StepFailurePolicy { abort_pair, substitute_middle };
StepFailurePolicy parse_step_failure(std::string_view name);
std::string_view to_string(StepFailurePolicy p);

enum class FailureKind { none, input, backend, parse };
std::string_view to_string(FailureKind k);

struct StepRecord {
  std::string template_id;
  int version = 1;
  std::string digest;
  prompting::Bindings bindings;
  /// Only held in memory; the cache keeps it by digest.
  std::string raw_response;
  /// Ordinal, star count or scalar value.
  std::optional<double> parsed;
  /// Class string for categorical steps.
  std::string parsed_label;
  std::string error;
  /// The step failed to parse and the middle class was bound instead.
  bool substituted = false;
};

struct QualityScore {
  std::string lp;
  std::string system_id;
  std::string seg_id;
  EstimatorKind kind;
  std::optional<double> ordinal;
  FailureKind failure = FailureKind::none;
  std::string error;
  std::vector<StepRecord> steps;
};

struct ScoreKey {
  std::string lp;
  std::string system_id;
  std::string seg_id;

  auto operator<=>(const ScoreKey&) const = default;
};

struct ScoreSummary {
  std::size_t parsed = 0;
  /// Final answer could not be parsed.
  std::size_t dropped = 0;
  /// Provider or input failures.
  std::size_t errored = 0;

  std::size_t total() const noexcept { return parsed + dropped + errored; }
};

struct ScoreTable {
  EstimatorKind kind;
  std::map<ScoreKey, QualityScore> scores;

  ScoreSummary summary() const;
  const QualityScore* find(std::string_view lp, std::string_view system_id,
                           std::string_view seg_id) const;
};

struct ChainOptions {
  backend::GenParams params;
  std::size_t max_in_flight = 4;
  StepFailurePolicy step_failure = StepFailurePolicy::abort_pair;
  backend::RetryPolicy retry;
  const prompting::TemplateRegistry* registry = nullptr;  // builtin when null
  /// Receives one line per stage.
  std::function<void(const std::string&)> progress;
};

/// Template ids in execution order; the last one produces the final score.
std::vector<std::string> chain_templates(EstimatorKind kind);

/// One (src, mt) pair through a one-step estimator. Throws InputError for an
/// empty mt, or an empty src when the template binds it; provider and parse
/// failures are recorded in the returned score.
QualityScore estimate_one_step(EstimatorKind kind, std::string_view src, std::string_view mt,
                               backend::CompletionProvider& provider,
                               backend::ResponseCache* cache, const ChainOptions& options,
                               backend::RequestContext context = {});
/// Perplexity and token steps, then the cot1 combiner.
QualityScore estimate_cot1(std::string_view src, std::string_view mt,
                           backend::CompletionProvider& provider, backend::ResponseCache* cache,
                           const ChainOptions& options, backend::RequestContext context = {},
                           prompting::ScoringMode mode = prompting::ScoringMode::cat5);
/// Perplexity, token and sentence steps, then the cot2 combiner.
QualityScore estimate_cot2(std::string_view src, std::string_view mt,
                           backend::CompletionProvider& provider, backend::ResponseCache* cache,
                           const ChainOptions& options, backend::RequestContext context = {},
                           prompting::ScoringMode mode = prompting::ScoringMode::cat5);

/// One QualityScore per system output. All step-k prompts go through one
/// run_batch before any step-(k+1) prompt.
ScoreTable score_dataset(EstimatorKind kind, const corpus::EvalDataset& dataset,
                         backend::CompletionProvider& provider, backend::ResponseCache* cache,
                         const ChainOptions& options);

/// Re-renders every step from its recorded bindings and checks the digest.
bool verify_trace(const QualityScore& score, const backend::GenParams& params,
                  const prompting::TemplateRegistry& registry = prompting::builtin_templates());

/// One JSON object per score, sorted by (lp, system_id, seg_id).
void write_score_table(std::ostream& os, const ScoreTable& table);
void save_score_table(const ScoreTable& table, const std::filesystem::path& path);
/// Throws FormatError; all lines must share one estimator and mode.
ScoreTable load_score_table(const std::filesystem::path& path);

}  // namespace kpe::chains
