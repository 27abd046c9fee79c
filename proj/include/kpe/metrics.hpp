#pragma once

// Segment-level Kendall tau over relative-ranking judgments, system-level
// pairwise accuracy, and score distributions.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kpe/chains.hpp"
#include "kpe/corpus.hpp"

namespace kpe::metrics {

/// What to do with a judgment whose metric score is missing or unparseable.
enum class DropPolicy { drop, middle };
DropPolicy parse_drop_policy(std::string_view name);
std::string_view to_string(DropPolicy p);

/// Ordinal used by DropPolicy::middle: middle class, middle star, mid-range.
double middle_value(prompting::ScoringMode mode);

struct KendallSummary {
  std::string lp;
  std::string estimator;
  std::size_t concordant = 0;
  std::size_t discordant = 0;
  std::size_t excluded = 0;
  /// (C - D) / (C + D); nullopt when C + D == 0.
  std::optional<double> tau;
};

/// Metric scores of one human judgment; `better` is the system the human
/// preferred.
struct JudgedPair {
  std::optional<double> better;
  std::optional<double> worse;
};

/// better > worse is concordant; better < worse and metric ties are
/// discordant. Missing scores are excluded under `drop`, replaced by
/// `middle` otherwise.
KendallSummary kendall_tau(std::span<const JudgedPair> pairs, DropPolicy policy,
                           double middle = 0.0);

/// One summary per language pair present in `judgments`, keyed by "src-tgt".
std::map<std::string, KendallSummary> kendall_tau_rr(const chains::ScoreTable& scores,
                                                     std::span<const corpus::RRJudgment> judgments,
                                                     DropPolicy policy);

struct SystemScoreRow {
  std::string lp;
  std::string system_id;
  double mean_ordinal = 0;
  std::size_t n = 0;
};

/// Mean parsed ordinal per (lp, system), sorted by key. Throws
/// EmptySystemError when a system has no parsed score.
std::vector<SystemScoreRow> system_score(const chains::ScoreTable& scores);

struct HumanSystemScore {
  std::string lp;
  std::string system_id;
  double score = 0;
};

/// TSV `lp<TAB>system_id<TAB>score`.
std::vector<HumanSystemScore> load_human_scores(const std::filesystem::path& path);

/// Share of system pairs whose metric difference has the sign of the human
/// difference. Pairs tied by humans are left out; a metric tie never agrees.
/// Systems present on only one side are ignored. Throws
/// InsufficientSystemsError with fewer than two shared systems or no pair
/// with distinct human scores.
double pairwise_accuracy(std::span<const SystemScoreRow> metric_rows,
                         std::span<const HumanSystemScore> human_rows);

struct DistributionStats {
  prompting::ScoringMode mode = prompting::ScoringMode::cat5;
  std::vector<std::size_t> counts;
  std::size_t parsed = 0;
  /// Middle-class share; defined for an odd class count and parsed > 0.
  std::optional<double> neutral_fraction;
};

/// Histogram of ordinals 0..num_classes-1 (values are rounded and clamped).
DistributionStats score_distribution(std::span<const double> ordinals, std::size_t num_classes);
/// Over the parsed scores of a table. Scalar tables produce ten equal-width
/// bins over 0-100; stars are shifted to start at 0.
DistributionStats score_distribution(const chains::ScoreTable& scores);

}  // namespace kpe::metrics
