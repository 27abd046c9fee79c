#pragma once

// Result tables: per estimator and language pair Kendall tau with an average
// column, exclusion counts, score distributions and optional system-level
// pairwise accuracy, rendered as Markdown and CSV.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kpe/chains.hpp"
#include "kpe/corpus.hpp"
#include "kpe/metrics.hpp"

namespace kpe::report {

struct EstimatorRow {
  chains::EstimatorKind kind;
  std::string label;
  std::string category;
  std::map<std::string, metrics::KendallSummary> kendall;  // by lp
  /// Mean of the defined per-lp taus.
  std::optional<double> avg;
  chains::ScoreSummary summary;
  metrics::DistributionStats distribution;
  std::map<std::string, double> accuracy;  // by lp, when human scores given
  std::optional<double> accuracy_avg;
};

struct Report {
  std::vector<std::string> lps;
  std::vector<EstimatorRow> rows;
  metrics::DropPolicy drop_policy = metrics::DropPolicy::drop;
  std::string model_id;
  std::string timestamp;
  std::map<std::string, int> template_versions;
  bool has_accuracy = false;
  std::vector<std::string> warnings;
};

/// Rows follow the order of `tables`. Language pairs are those of the
/// judgments, sorted.
Report build_report(std::span<const chains::ScoreTable> tables,
                    std::span<const corpus::RRJudgment> judgments,
                    const std::vector<metrics::HumanSystemScore>* human, metrics::DropPolicy policy,
                    std::string model_id, std::string timestamp);

/// One decimal and a percent sign: 0.2912 -> "29.1%".
std::string format_percent(double fraction);

std::string row_label(chains::EstimatorKind kind);
std::string row_category(chains::Estimator e);

/// Everything except the line starting with "generated:" is a deterministic
/// function of the inputs.
std::string render_markdown(const Report& report);
/// Same table as the Markdown one with tau at full precision.
std::string render_csv(const Report& report);

}  // namespace kpe::report
