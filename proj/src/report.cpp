#include "kpe/report.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "kpe/errors.hpp"

namespace kpe::report {

using chains::Estimator;

namespace {

constexpr const char* kMissing = "\xE2\x80\x94";  // em dash for missing cells

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double sum = 0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0);
  std::string s(buf);
  if (s == "-0.0") s = "0.0";
  return s + "%";
}

std::string row_label(chains::EstimatorKind kind) {
  std::string label;
  switch (kind.estimator) {
    case Estimator::gemba:
      label = "GEMBA";
      break;
    case Estimator::prompt1_perplexity:
      label = "Prompt1(Perplexity)";
      break;
    case Estimator::prompt2_token:
      label = "Prompt2(Token)";
      break;
    case Estimator::prompt3_sentence:
      label = "Prompt3(Sentence)";
      break;
    case Estimator::cot1:
      label = "CoT1(ppl+token)";
      break;
    case Estimator::cot2:
      label = "CoT2(ppl + token + sent)";
      break;
  }
  if (kind.mode != prompting::ScoringMode::cat5) {
    label += " [" + std::string(prompting::to_string(kind.mode)) + "]";
  }
  return label;
}

std::string row_category(Estimator e) {
  return chains::is_chain(e) ? "CoT LLMs" : "One Step LLMs";
}

Report build_report(std::span<const chains::ScoreTable> tables,
                    std::span<const corpus::RRJudgment> judgments,
                    const std::vector<metrics::HumanSystemScore>* human, metrics::DropPolicy policy,
                    std::string model_id, std::string timestamp) {
  Report r;
  r.drop_policy = policy;
  r.model_id = std::move(model_id);
  r.timestamp = std::move(timestamp);
  r.has_accuracy = human != nullptr;

  std::set<std::string> lps;
  for (const auto& j : judgments) lps.insert(j.lp.str());
  r.lps.assign(lps.begin(), lps.end());

  for (const auto& table : tables) {
    EstimatorRow row;
    row.kind = table.kind;
    row.label = row_label(table.kind);
    row.category = row_category(table.kind.estimator);
    row.summary = table.summary();
    row.distribution = metrics::score_distribution(table);
    row.kendall = metrics::kendall_tau_rr(table, judgments, policy);

    std::set<std::string> covered;
    for (const auto& [key, score] : table.scores) {
      covered.insert(key.lp);
      for (const auto& step : score.steps) r.template_versions[step.template_id] = step.version;
    }
    std::vector<double> taus;
    for (const auto& lp : r.lps) {
      auto it = row.kendall.find(lp);
      if (!covered.contains(lp)) {
        r.warnings.push_back(row.label + " has no scores for " + lp);
      }
      if (it != row.kendall.end() && it->second.tau) taus.push_back(*it->second.tau);
    }
    row.avg = mean_of(taus);

    if (human) {
      std::vector<metrics::SystemScoreRow> sys;
      try {
        sys = metrics::system_score(table);
      } catch (const EmptySystemError& e) {
        r.warnings.push_back(row.label + ": " + e.what());
      }
      std::vector<double> accs;
      for (const auto& lp : r.lps) {
        std::vector<metrics::SystemScoreRow> m;
        std::vector<metrics::HumanSystemScore> h;
        for (const auto& s : sys) {
          if (s.lp == lp) m.push_back(s);
        }
        for (const auto& s : *human) {
          if (s.lp == lp) h.push_back(s);
        }
        try {
          const double acc = metrics::pairwise_accuracy(m, h);
          row.accuracy[lp] = acc;
          accs.push_back(acc);
        } catch (const InsufficientSystemsError& e) {
          r.warnings.push_back(row.label + " " + lp + ": " + e.what());
        }
      }
      row.accuracy_avg = mean_of(accs);
    }
    r.rows.push_back(std::move(row));
  }
  return r;
}

std::string render_markdown(const Report& report) {
  std::string md = "# Segment-level Kendall tau\n\n";
  md += "generated: " + report.timestamp + "\n\n";
  md += "model_id: " + report.model_id + "  \n";
  md += "drop_policy: " + std::string(metrics::to_string(report.drop_policy)) + "\n\n";

  auto header = [&](std::string first_cols) {
    std::string h = "| " + first_cols;
    std::string rule = "|---|---|";
    for (const auto& lp : report.lps) {
      h += " | " + lp;
      rule += "---|";
    }
    return h + " | avg |\n" + rule + "---|\n";
  };

  md += header("model | category");
  for (const auto& row : report.rows) {
    md += "| " + row.label + " | " + row.category;
    for (const auto& lp : report.lps) {
      auto it = row.kendall.find(lp);
      md += " | ";
      md += (it != row.kendall.end() && it->second.tau) ? format_percent(*it->second.tau) : kMissing;
    }
    md += " | " + (row.avg ? format_percent(*row.avg) : std::string(kMissing)) + " |\n";
  }

  md += "\n## Judgment accounting\n\n";
  md += "| model | lp | concordant | discordant | excluded |\n|---|---|---|---|---|\n";
  for (const auto& row : report.rows) {
    for (const auto& lp : report.lps) {
      auto it = row.kendall.find(lp);
      if (it == row.kendall.end()) continue;
      const auto& k = it->second;
      md += "| " + row.label + " | " + lp + " | " + std::to_string(k.concordant) + " | " +
            std::to_string(k.discordant) + " | " + std::to_string(k.excluded) + " |\n";
    }
  }

  md += "\n## Scoring summary\n\n";
  md += "| model | mode | parsed | dropped | errored | class counts | neutral fraction |\n";
  md += "|---|---|---|---|---|---|---|\n";
  for (const auto& row : report.rows) {
    std::string counts;
    for (std::size_t i = 0; i < row.distribution.counts.size(); ++i) {
      if (i) counts += " / ";
      counts += std::to_string(row.distribution.counts[i]);
    }
    md += "| " + row.label + " | " + std::string(prompting::to_string(row.kind.mode)) + " | " +
          std::to_string(row.summary.parsed) + " | " + std::to_string(row.summary.dropped) +
          " | " + std::to_string(row.summary.errored) + " | " + counts + " | " +
          (row.distribution.neutral_fraction ? format_percent(*row.distribution.neutral_fraction)
                                             : std::string(kMissing)) +
          " |\n";
  }

  if (report.has_accuracy) {
    md += "\n## System-level pairwise accuracy\n\n";
    md += header("model | category");
    for (const auto& row : report.rows) {
      md += "| " + row.label + " | " + row.category;
      for (const auto& lp : report.lps) {
        auto it = row.accuracy.find(lp);
        md += " | ";
        md += it != row.accuracy.end() ? format_percent(it->second) : kMissing;
      }
      md += " | " + (row.accuracy_avg ? format_percent(*row.accuracy_avg) : std::string(kMissing)) +
            " |\n";
    }
  }

  md += "\n## Templates\n\n";
  for (const auto& [id, version] : report.template_versions) {
    md += "- " + id + " v" + std::to_string(version) + "\n";
  }
  if (!report.warnings.empty()) {
    md += "\n## Warnings\n\n";
    for (const auto& w : report.warnings) md += "- " + w + "\n";
  }
  return md;
}

std::string render_csv(const Report& report) {
  std::string csv = "model,category,mode,metric";
  for (const auto& lp : report.lps) csv += "," + lp;
  csv += ",avg\n";
  auto emit = [&](const EstimatorRow& row, const char* metric, auto value_for,
                  const std::optional<double>& avg) {
    csv += csv_field(row.label) + "," + csv_field(row.category) + "," +
           std::string(prompting::to_string(row.kind.mode)) + "," + metric;
    for (const auto& lp : report.lps) {
      csv += ",";
      if (auto v = value_for(lp)) csv += full_precision(*v);
    }
    csv += ",";
    if (avg) csv += full_precision(*avg);
    csv += "\n";
  };
  for (const auto& row : report.rows) {
    emit(
        row, "kendall_tau",
        [&](const std::string& lp) -> std::optional<double> {
          auto it = row.kendall.find(lp);
          return it == row.kendall.end() ? std::nullopt : it->second.tau;
        },
        row.avg);
  }
  if (report.has_accuracy) {
    for (const auto& row : report.rows) {
      emit(
          row, "pairwise_accuracy",
          [&](const std::string& lp) -> std::optional<double> {
            auto it = row.accuracy.find(lp);
            if (it == row.accuracy.end()) return std::nullopt;
            return it->second;
          },
          row.accuracy_avg);
    }
  }
  return csv;
}

}  // namespace kpe::report
