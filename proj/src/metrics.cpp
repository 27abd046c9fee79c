#include "kpe/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "kpe/errors.hpp"
#include "kpe/text.hpp"

namespace kpe::metrics {

using prompting::ScoringMode;

DropPolicy parse_drop_policy(std::string_view name) {
  if (name == "drop") return DropPolicy::drop;
  if (name == "middle") return DropPolicy::middle;
  throw ConfigError("unknown drop_policy '" + std::string(name) + "' (expected drop or middle)");
}

std::string_view to_string(DropPolicy p) { return p == DropPolicy::drop ? "drop" : "middle"; }

double middle_value(ScoringMode mode) {
  switch (mode) {
    case ScoringMode::cat5:
      return 2;
    case ScoringMode::cat3:
      return 1;
    case ScoringMode::stars:
      return 3;
    case ScoringMode::scalar:
      return 50;
  }
  return 0;
}

KendallSummary kendall_tau(std::span<const JudgedPair> pairs, DropPolicy policy, double middle) {
  KendallSummary s;
  for (const auto& p : pairs) {
    std::optional<double> better = p.better;
    std::optional<double> worse = p.worse;
    if (policy == DropPolicy::middle) {
      if (!better) better = middle;
      if (!worse) worse = middle;
    }
    if (!better || !worse) {
      ++s.excluded;
    } else if (*better > *worse) {
      ++s.concordant;
    } else {
      ++s.discordant;
    }
  }
  const auto denom = s.concordant + s.discordant;
  if (denom > 0) {
    s.tau = (static_cast<double>(s.concordant) - static_cast<double>(s.discordant)) /
            static_cast<double>(denom);
  }
  return s;
}

std::map<std::string, KendallSummary> kendall_tau_rr(const chains::ScoreTable& scores,
                                                     std::span<const corpus::RRJudgment> judgments,
                                                     DropPolicy policy) {
  std::map<std::string, std::vector<JudgedPair>> by_lp;
  auto ordinal_of = [&](const std::string& lp, const std::string& sys,
                        const std::string& seg) -> std::optional<double> {
    const auto* q = scores.find(lp, sys, seg);
    return q ? q->ordinal : std::nullopt;
  };
  for (const auto& j : judgments) {
    const auto lp = j.lp.str();
    by_lp[lp].push_back(
        {ordinal_of(lp, j.better_system, j.seg_id), ordinal_of(lp, j.worse_system, j.seg_id)});
  }
  std::map<std::string, KendallSummary> out;
  const double middle = middle_value(scores.kind.mode);
  for (const auto& [lp, pairs] : by_lp) {
    auto s = kendall_tau(pairs, policy, middle);
    s.lp = lp;
    s.estimator = std::string(chains::to_string(scores.kind.estimator));
    out.emplace(lp, std::move(s));
  }
  return out;
}

std::vector<SystemScoreRow> system_score(const chains::ScoreTable& scores) {
  struct Acc {
    double sum = 0;
    std::size_t n = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> acc;
  for (const auto& [key, q] : scores.scores) {
    auto& a = acc[{key.lp, key.system_id}];
    if (q.ordinal) {
      a.sum += *q.ordinal;
      ++a.n;
    }
  }
  std::vector<SystemScoreRow> rows;
  for (const auto& [key, a] : acc) {
    if (a.n == 0) {
      throw EmptySystemError("system " + key.second + " in " + key.first + " has no parsed score");
    }
    rows.push_back({key.first, key.second, a.sum / static_cast<double>(a.n), a.n});
  }
  return rows;
}

std::vector<HumanSystemScore> load_human_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<HumanSystemScore> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::trim(line).empty()) continue;
    const auto parts = text::split(line, '\t');
    if (parts.size() != 3) {
      throw FormatError(path.string(), number, "expected lp<TAB>system_id<TAB>score");
    }
    const auto lp = std::string(text::trim(parts[0]));
    try {
      corpus::LanguagePair::parse(lp);
    } catch (const Error& e) {
      throw FormatError(path.string(), number, e.what());
    }
    const auto value = text::trim(parts[2]);
    double score = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), score);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw FormatError(path.string(), number, "bad score '" + std::string(value) + "'");
    }
    out.push_back({lp, std::string(text::trim(parts[1])), score});
  }
  return out;
}

double pairwise_accuracy(std::span<const SystemScoreRow> metric_rows,
                         std::span<const HumanSystemScore> human_rows) {
  struct Both {
    double metric;
    double human;
  };
  std::vector<Both> systems;
  for (const auto& m : metric_rows) {
    for (const auto& h : human_rows) {
      if (h.system_id == m.system_id && (h.lp.empty() || m.lp.empty() || h.lp == m.lp)) {
        systems.push_back({m.mean_ordinal, h.score});
        break;
      }
    }
  }
  if (systems.size() < 2) {
    throw InsufficientSystemsError("pairwise accuracy needs at least two systems with both "
                                   "metric and human scores, got " +
                                   std::to_string(systems.size()));
  }
  auto sign = [](double d) { return (d > 0) - (d < 0); };
  std::size_t agree = 0;
  std::size_t total = 0;
  for (std::size_t a = 0; a < systems.size(); ++a) {
    for (std::size_t b = a + 1; b < systems.size(); ++b) {
      const int h = sign(systems[a].human - systems[b].human);
      if (h == 0) continue;
      ++total;
      if (sign(systems[a].metric - systems[b].metric) == h) ++agree;
    }
  }
  if (total == 0) throw InsufficientSystemsError("every system pair is tied in the human scores");
  return static_cast<double>(agree) / static_cast<double>(total);
}

DistributionStats score_distribution(std::span<const double> ordinals, std::size_t num_classes) {
  DistributionStats d;
  d.counts.assign(num_classes, 0);
  if (num_classes == 0) return d;
  for (double v : ordinals) {
    const auto bin = static_cast<long>(std::lround(v));
    ++d.counts[static_cast<std::size_t>(std::clamp(bin, 0L, static_cast<long>(num_classes) - 1))];
    ++d.parsed;
  }
  if (num_classes % 2 == 1 && d.parsed > 0) {
    d.neutral_fraction =
        static_cast<double>(d.counts[num_classes / 2]) / static_cast<double>(d.parsed);
  }
  return d;
}

DistributionStats score_distribution(const chains::ScoreTable& scores) {
  std::vector<double> values;
  for (const auto& [key, q] : scores.scores) {
    if (!q.ordinal) continue;
    double v = *q.ordinal;
    switch (scores.kind.mode) {
      case ScoringMode::stars:
        v -= 1;
        break;
      case ScoringMode::scalar:
        v = std::floor(std::min(v, 99.999) / 10.0);
        break;
      default:
        break;
    }
    values.push_back(v);
  }
  std::size_t classes = 5;
  if (scores.kind.mode == ScoringMode::cat3) classes = 3;
  if (scores.kind.mode == ScoringMode::scalar) classes = 10;
  auto d = score_distribution(values, classes);
  d.mode = scores.kind.mode;
  return d;
}

}  // namespace kpe::metrics
