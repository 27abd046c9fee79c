#include <gtest/gtest.h>

#include <map>
#include <random>

#include "kpe/errors.hpp"
#include "kpe/metrics.hpp"
#include "support.hpp"

using namespace kpe::metrics;
using kpe::chains::EstimatorKind;
using kpe::chains::QualityScore;
using kpe::chains::ScoreKey;
using kpe::chains::ScoreTable;
using kpe::corpus::LanguagePair;
using kpe::corpus::RRJudgment;
using kpe::prompting::ScoringMode;

namespace {

void put(ScoreTable& t, const std::string& lp, const std::string& sys, const std::string& seg,
         std::optional<double> ordinal) {
  QualityScore q;
  q.lp = lp;
  q.system_id = sys;
  q.seg_id = seg;
  q.kind = t.kind;
  q.ordinal = ordinal;
  if (!ordinal) q.failure = kpe::chains::FailureKind::parse;
  t.scores[ScoreKey{lp, sys, seg}] = q;
}

RRJudgment judge(const std::string& lp, const std::string& seg, const std::string& better,
                 const std::string& worse) {
  return {LanguagePair::parse(lp), seg, better, worse};
}

struct Counts {
  std::size_t c = 0, d = 0, x = 0;
};

// Straight recount from a plain map, no shared code with the library.
Counts oracle(const std::map<std::pair<std::string, std::string>, std::optional<int>>& scores,
              const std::vector<RRJudgment>& js, bool middle_policy, int middle) {
  Counts k;
  for (const auto& j : js) {
    auto b = scores.at({j.better_system, j.seg_id});
    auto w = scores.at({j.worse_system, j.seg_id});
    if (middle_policy) {
      if (!b) b = middle;
      if (!w) w = middle;
    }
    if (!b || !w) {
      ++k.x;
    } else if (*b > *w) {
      ++k.c;
    } else {
      ++k.d;
    }
  }
  return k;
}

double oracle_accuracy(const std::vector<double>& metric, const std::vector<double>& human) {
  int agree = 0, total = 0;
  for (std::size_t a = 0; a < metric.size(); ++a) {
    for (std::size_t b = 0; b < metric.size(); ++b) {
      if (a >= b) continue;
      const double h = human[a] - human[b];
      if (h == 0) continue;
      const double m = metric[a] - metric[b];
      ++total;
      if ((h > 0 && m > 0) || (h < 0 && m < 0)) ++agree;
    }
  }
  return static_cast<double>(agree) / total;
}

std::vector<SystemScoreRow> rows(const std::vector<double>& v) {
  std::vector<SystemScoreRow> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back({"de-en", "s" + std::to_string(i), v[i], 1});
  return out;
}
std::vector<HumanSystemScore> human(const std::vector<double>& v) {
  std::vector<HumanSystemScore> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back({"de-en", "s" + std::to_string(i), v[i]});
  return out;
}

}  // namespace

TEST(Kendall, PerfectAgreement) {
  ScoreTable t;
  put(t, "de-en", "A", "1", 4);
  put(t, "de-en", "B", "1", 2);
  put(t, "de-en", "C", "1", 0);
  const std::vector<RRJudgment> js{judge("de-en", "1", "A", "B"), judge("de-en", "1", "B", "C"),
                                   judge("de-en", "1", "A", "C")};
  const auto s = kendall_tau_rr(t, js, DropPolicy::drop).at("de-en");
  EXPECT_EQ(s.concordant, 3u);
  EXPECT_EQ(s.tau, 1.0);
}

TEST(Kendall, BalancedIsZero) {
  ScoreTable t;
  put(t, "de-en", "A", "1", 4);
  put(t, "de-en", "B", "1", 2);
  const std::vector<RRJudgment> js{judge("de-en", "1", "A", "B"), judge("de-en", "1", "B", "A")};
  EXPECT_EQ(kendall_tau_rr(t, js, DropPolicy::drop).at("de-en").tau, 0.0);
}

TEST(Kendall, MetricTiesAreDiscordant) {
  ScoreTable t;
  std::vector<RRJudgment> js;
  for (int seg = 0; seg < 10; ++seg) {
    const auto id = std::to_string(seg);
    put(t, "de-en", "A", id, seg % 5);
    put(t, "de-en", "B", id, seg % 5);
    js.push_back(judge("de-en", id, seg % 2 ? "A" : "B", seg % 2 ? "B" : "A"));
  }
  const auto s = kendall_tau_rr(t, js, DropPolicy::drop).at("de-en");
  EXPECT_EQ(s.discordant, 10u);
  EXPECT_EQ(s.tau, -1.0);
}

TEST(Kendall, RandomInstancesMatchOracle) {
  std::mt19937 rng(7);
  for (int round = 0; round < 200; ++round) {
    ScoreTable t;
    std::map<std::pair<std::string, std::string>, std::optional<int>> plain;
    const std::vector<std::string> systems{"A", "B", "C", "D"};
    for (int seg = 0; seg < 10; ++seg) {
      for (const auto& s : systems) {
        std::optional<int> v = static_cast<int>(rng() % 5);
        if (rng() % 10 == 0) v.reset();
        plain[{s, std::to_string(seg)}] = v;
        put(t, "de-en", s, std::to_string(seg), v ? std::optional<double>(*v) : std::nullopt);
      }
    }
    std::vector<RRJudgment> js;
    for (int k = 0; k < 200; ++k) {
      const auto a = rng() % 4;
      auto b = rng() % 4;
      if (a == b) b = (b + 1) % 4;
      js.push_back(judge("de-en", std::to_string(rng() % 10), systems[a], systems[b]));
    }
    for (bool middle : {false, true}) {
      const auto want = oracle(plain, js, middle, 2);
      const auto got =
          kendall_tau_rr(t, js, middle ? DropPolicy::middle : DropPolicy::drop).at("de-en");
      EXPECT_EQ(got.concordant, want.c);
      EXPECT_EQ(got.discordant, want.d);
      EXPECT_EQ(got.excluded, want.x);
      if (want.c + want.d > 0) {
        EXPECT_DOUBLE_EQ(*got.tau, (double(want.c) - double(want.d)) / double(want.c + want.d));
      }
    }
  }
}

TEST(Kendall, MissingScoresAndPolicies) {
  ScoreTable t;
  t.kind = {kpe::chains::Estimator::cot1, ScoringMode::cat5};
  put(t, "de-en", "A", "1", std::nullopt);
  put(t, "de-en", "B", "1", 1);
  const std::vector<RRJudgment> js{judge("de-en", "1", "A", "B"), judge("de-en", "1", "C", "B")};
  const auto dropped = kendall_tau_rr(t, js, DropPolicy::drop).at("de-en");
  EXPECT_EQ(dropped.excluded, 2u);
  EXPECT_FALSE(dropped.tau.has_value());
  // Middle class (2) replaces both the unparsed and the absent score.
  const auto middle = kendall_tau_rr(t, js, DropPolicy::middle).at("de-en");
  EXPECT_EQ(middle.concordant, 2u);
  EXPECT_EQ(middle.excluded, 0u);
}

TEST(Kendall, SeparatePerLanguagePair) {
  ScoreTable t;
  put(t, "de-en", "A", "1", 3);
  put(t, "de-en", "B", "1", 1);
  put(t, "zh-en", "A", "1", 1);
  put(t, "zh-en", "B", "1", 3);
  const std::vector<RRJudgment> js{judge("de-en", "1", "A", "B"), judge("zh-en", "1", "A", "B")};
  const auto m = kendall_tau_rr(t, js, DropPolicy::drop);
  EXPECT_EQ(m.at("de-en").tau, 1.0);
  EXPECT_EQ(m.at("zh-en").tau, -1.0);
  EXPECT_EQ(m.at("zh-en").lp, "zh-en");
}

TEST(Kendall, MiddleValues) {
  EXPECT_EQ(middle_value(ScoringMode::cat5), 2);
  EXPECT_EQ(middle_value(ScoringMode::cat3), 1);
  EXPECT_EQ(middle_value(ScoringMode::stars), 3);
  EXPECT_EQ(middle_value(ScoringMode::scalar), 50);
  EXPECT_THROW(parse_drop_policy("skip"), kpe::ConfigError);
}

TEST(SystemScore, Means) {
  ScoreTable t;
  put(t, "de-en", "single", "1", 4);
  put(t, "de-en", "pair", "1", 0);
  put(t, "de-en", "pair", "2", 4);
  put(t, "de-en", "three", "1", 1);
  put(t, "de-en", "three", "2", 2);
  put(t, "de-en", "three", "3", 4);
  put(t, "de-en", "three", "4", std::nullopt);
  const auto r = system_score(t);
  ASSERT_EQ(r.size(), 3u);
  std::map<std::string, SystemScoreRow> by;
  for (const auto& row : r) by[row.system_id] = row;
  EXPECT_DOUBLE_EQ(by["single"].mean_ordinal, 4.0);
  EXPECT_DOUBLE_EQ(by["pair"].mean_ordinal, 2.0);
  EXPECT_DOUBLE_EQ(by["three"].mean_ordinal, (1.0 + 2.0 + 4.0) / 3.0);
  EXPECT_EQ(by["three"].n, 3u);
}

TEST(SystemScore, SystemWithoutParsedScores) {
  ScoreTable t;
  put(t, "de-en", "A", "1", std::nullopt);
  EXPECT_THROW(system_score(t), kpe::EmptySystemError);
}

TEST(PairwiseAccuracy, Examples) {
  EXPECT_EQ(pairwise_accuracy(rows({1, 2, 3, 4}), human({10, 20, 30, 40})), 1.0);
  EXPECT_EQ(pairwise_accuracy(rows({4, 3, 2, 1}), human({10, 20, 30, 40})), 0.0);
  // (A,B) agree, (A,C) agree, (A,D) agree, (B,C) metric tie, (B,D) agree, (C,D) agree.
  EXPECT_DOUBLE_EQ(pairwise_accuracy(rows({3, 2, 2, 1}), human({4, 3, 2, 1})), 5.0 / 6.0);
}

TEST(PairwiseAccuracy, HumanTiesAreSkipped) {
  EXPECT_DOUBLE_EQ(pairwise_accuracy(rows({1, 2, 3}), human({1, 1, 2})), 1.0);
  EXPECT_THROW(pairwise_accuracy(rows({1, 2}), human({5, 5})), kpe::InsufficientSystemsError);
  EXPECT_THROW(pairwise_accuracy(rows({1}), human({5})), kpe::InsufficientSystemsError);
}

TEST(PairwiseAccuracy, RandomVectorsMatchOracle) {
  std::mt19937 rng(11);
  for (int round = 0; round < 200; ++round) {
    const std::size_t n = 3 + rng() % 8;
    std::vector<double> m(n), h(n);
    for (auto& x : m) x = static_cast<double>(rng() % 5);
    for (auto& x : h) x = static_cast<double>(rng() % 7);
    bool any = false;
    for (std::size_t i = 1; i < n; ++i) any |= h[i] != h[0];
    if (!any) continue;
    EXPECT_DOUBLE_EQ(pairwise_accuracy(rows(m), human(h)), oracle_accuracy(m, h));
  }
}

TEST(HumanScores, LoadTsv) {
  kpe::test::TempDir dir;
  kpe::test::write_text(dir / "h.tsv", "de-en\tA\t0.25\nde-en\tB\t-1.5\n");
  const auto h = load_human_scores(dir / "h.tsv");
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[1].system_id, "B");
  EXPECT_DOUBLE_EQ(h[1].score, -1.5);
  kpe::test::write_text(dir / "bad.tsv", "de-en\tA\tgood\n");
  EXPECT_THROW(load_human_scores(dir / "bad.tsv"), kpe::FormatError);
}

TEST(Distribution, Examples) {
  EXPECT_EQ(score_distribution(std::vector<double>(7, 1.0), 3).neutral_fraction, 1.0);
  EXPECT_DOUBLE_EQ(*score_distribution(std::vector<double>{0, 1, 2, 3, 4}, 5).neutral_fraction, 0.2);
  std::vector<double> v;
  for (int i = 0; i < 31; ++i) v.push_back(1);
  for (int i = 0; i < 40; ++i) v.push_back(0);
  for (int i = 0; i < 29; ++i) v.push_back(2);
  const auto d = score_distribution(v, 3);
  EXPECT_DOUBLE_EQ(*d.neutral_fraction, 0.31);
  EXPECT_EQ(d.counts, (std::vector<std::size_t>{40, 31, 29}));
  EXPECT_FALSE(score_distribution(std::vector<double>{1, 2}, 4).neutral_fraction);
  EXPECT_FALSE(score_distribution(std::vector<double>{}, 3).neutral_fraction);
}

TEST(Distribution, FromTables) {
  ScoreTable stars;
  stars.kind = {kpe::chains::Estimator::gemba, ScoringMode::stars};
  put(stars, "de-en", "A", "1", 3);
  put(stars, "de-en", "A", "2", 5);
  put(stars, "de-en", "A", "3", std::nullopt);
  const auto d = score_distribution(stars);
  EXPECT_EQ(d.counts, (std::vector<std::size_t>{0, 0, 1, 0, 1}));
  EXPECT_DOUBLE_EQ(*d.neutral_fraction, 0.5);

  ScoreTable scalar;
  scalar.kind = {kpe::chains::Estimator::gemba, ScoringMode::scalar};
  put(scalar, "de-en", "A", "1", 0);
  put(scalar, "de-en", "A", "2", 55);
  put(scalar, "de-en", "A", "3", 100);
  const auto s = score_distribution(scalar);
  ASSERT_EQ(s.counts.size(), 10u);
  EXPECT_EQ(s.counts[0], 1u);
  EXPECT_EQ(s.counts[5], 1u);
  EXPECT_EQ(s.counts[9], 1u);
}
