#include <gtest/gtest.h>

#include <mutex>
#include <sstream>

#include "kpe/chains.hpp"
#include "kpe/errors.hpp"
#include "kpe/mock_provider.hpp"
#include "support.hpp"

using namespace kpe::chains;
using kpe::backend::CompletionRequest;
using kpe::backend::ResponseCache;
using kpe::mock::Fixture;
using kpe::mock::FixtureTable;
using kpe::prompting::ScoringMode;

namespace {

const std::string kSrc = "Er kam heute.";
const std::string kMt = "He came today.";

// Mock with scripted misbehaviour for chosen templates and a call log.
class ScriptedMock : public kpe::backend::CompletionProvider {
 public:
  explicit ScriptedMock(FixtureTable fx) : inner_(std::move(fx)) {}
  std::string id() const override { return "scripted-mock"; }

  std::string garbage_for;
  std::string deny_for;

  std::vector<std::string> log() {
    std::lock_guard lock(mu_);
    return log_;
  }
  std::size_t count(const std::string& template_id) {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(std::count(log_.begin(), log_.end(), template_id));
  }

 protected:
  std::string do_call(const CompletionRequest& r) override {
    {
      std::lock_guard lock(mu_);
      log_.push_back(r.prompt.template_id);
    }
    if (r.prompt.template_id == garbage_for) return "I would rather not say.";
    if (r.prompt.template_id == deny_for) throw kpe::AuthError("denied");
    return inner_.call(r);
  }

 private:
  kpe::mock::MockProvider inner_;
  std::mutex mu_;
  std::vector<std::string> log_;
};

FixtureTable identity_fixture() {
  FixtureTable fx;
  fx.add("de-en", "1", Fixture{kMt, {}});
  return fx;
}

ChainOptions options(StepFailurePolicy policy = StepFailurePolicy::abort_pair) {
  ChainOptions o;
  o.params.model_id = "mock";
  o.step_failure = policy;
  return o;
}

kpe::backend::RequestContext ctx() { return {"de-en", "sysA", "1"}; }

const std::string& cls(std::size_t i) {
  return kpe::prompting::builtin_templates().get("kpe_perplexity").schema.classes[i];
}

kpe::corpus::EvalDataset toy_lp(const std::string& lp) {
  using namespace kpe::corpus;
  const auto dir = kpe::test::toy_dir();
  auto segs = load_segments(dir / "segments.tsv", FileFormat::tsv);
  auto outs = load_system_outputs(dir / "outputs.tsv", FileFormat::tsv);
  std::erase_if(segs, [&](const Segment& s) { return s.lp.str() != lp; });
  std::erase_if(outs, [&](const SystemOutput& o) { return o.lp.str() != lp; });
  return EvalDataset::assemble(std::move(segs), std::move(outs), {});
}

}  // namespace

TEST(Plan, TemplatesPerEstimator) {
  using V = std::vector<std::string>;
  EXPECT_EQ(chain_templates({Estimator::gemba, ScoringMode::cat5}), V{"gemba_classify"});
  EXPECT_EQ(chain_templates({Estimator::gemba, ScoringMode::stars}), V{"gemba_stars"});
  EXPECT_EQ(chain_templates({Estimator::prompt2_token, ScoringMode::cat3}), V{"kpe_token_sim_cat3"});
  EXPECT_EQ(chain_templates({Estimator::cot1, ScoringMode::cat5}),
            (V{"kpe_perplexity", "kpe_token_sim", "kpe_cot1_combine"}));
  EXPECT_EQ(chain_templates({Estimator::cot2, ScoringMode::cat3}),
            (V{"kpe_perplexity_cat3", "kpe_token_sim_cat3", "kpe_sent_sim_cat3",
               "kpe_cot2_combine_cat3"}));
  EXPECT_THROW(chain_templates({Estimator::cot1, ScoringMode::scalar}), kpe::ConfigError);
}

TEST(Names, ParseAndPrint) {
  for (auto e : kAllEstimators) EXPECT_EQ(parse_estimator(to_string(e)), e);
  EXPECT_EQ(parse_estimator("prompt1"), Estimator::prompt1_perplexity);
  EXPECT_THROW(parse_estimator("prompt4"), kpe::ConfigError);
  EXPECT_EQ(parse_step_failure("substitute_middle"), StepFailurePolicy::substitute_middle);
  EXPECT_THROW(parse_step_failure("ignore"), kpe::ConfigError);
}

TEST(OneStep, PerplexityPromptOmitsSource) {
  kpe::mock::MockProvider p(identity_fixture());
  const auto s = estimate_one_step({Estimator::prompt1_perplexity}, kSrc, kMt, p, nullptr,
                                   options(), ctx());
  ASSERT_EQ(s.steps.size(), 1u);
  const auto& b = s.steps[0].bindings;
  EXPECT_EQ(b.size(), 1u);
  EXPECT_EQ(b.at("target_seg"), kMt);
  const auto rendered = kpe::prompting::render_template(
      kpe::prompting::builtin_templates().get("kpe_perplexity"), b);
  EXPECT_NE(rendered.final_text.find(kMt), std::string::npos);
  EXPECT_EQ(rendered.final_text.find(kSrc), std::string::npos);
}

TEST(OneStep, IdenticalTranslationGetsTopClass) {
  kpe::mock::MockProvider p(identity_fixture());
  const auto s =
      estimate_one_step({Estimator::prompt2_token}, kSrc, kMt, p, nullptr, options(), ctx());
  ASSERT_TRUE(s.ordinal.has_value());
  EXPECT_EQ(*s.ordinal, 4.0);
  EXPECT_EQ(s.failure, FailureKind::none);
  EXPECT_EQ(s.steps[0].parsed_label, "Perfect translation");
}

TEST(OneStep, StarsAndScalarModes) {
  kpe::mock::MockProvider p(identity_fixture());
  EXPECT_EQ(estimate_one_step({Estimator::gemba, ScoringMode::stars}, kSrc, kMt, p, nullptr,
                              options(), ctx())
                .ordinal,
            5.0);
  EXPECT_EQ(estimate_one_step({Estimator::prompt3_sentence, ScoringMode::scalar}, kSrc, kMt, p,
                              nullptr, options(), ctx())
                .ordinal,
            100.0);
}

TEST(OneStep, EmptyInputs) {
  kpe::mock::MockProvider p(identity_fixture());
  EXPECT_THROW(estimate_one_step({Estimator::prompt2_token}, kSrc, "  ", p, nullptr, options(), ctx()),
               kpe::InputError);
  EXPECT_THROW(estimate_one_step({Estimator::prompt2_token}, "", kMt, p, nullptr, options(), ctx()),
               kpe::InputError);
  // The perplexity prompt never sees the source.
  EXPECT_NO_THROW(
      estimate_one_step({Estimator::prompt1_perplexity}, "", kMt, p, nullptr, options(), ctx()));
  EXPECT_THROW(estimate_one_step({Estimator::cot1}, kSrc, kMt, p, nullptr, options(), ctx()),
               kpe::ConfigError);
  EXPECT_EQ(p.calls(), 1u);
}

TEST(Cot1, HandTraceOnIdenticalPair) {
  ScriptedMock p(identity_fixture());
  const auto s = estimate_cot1(kSrc, kMt, p, nullptr, options(), ctx());
  ASSERT_EQ(s.steps.size(), 3u);
  EXPECT_EQ(s.steps[0].template_id, "kpe_perplexity");
  EXPECT_EQ(s.steps[1].template_id, "kpe_token_sim");
  EXPECT_EQ(s.steps[2].template_id, "kpe_cot1_combine");
  EXPECT_EQ(s.steps[0].parsed, 4.0);
  EXPECT_EQ(s.steps[1].parsed, 4.0);
  const auto combine = kpe::prompting::render_template(
      kpe::prompting::builtin_templates().get("kpe_cot1_combine"), s.steps[2].bindings);
  EXPECT_EQ(s.steps[2].bindings.at("perplexity_answer"), cls(4));
  EXPECT_EQ(s.steps[2].bindings.at("token_answer"), cls(4));
  EXPECT_NE(combine.final_text.find(cls(4)), std::string::npos);
  EXPECT_EQ(s.ordinal, 4.0);
  EXPECT_EQ(p.log(), (std::vector<std::string>{"kpe_perplexity", "kpe_token_sim", "kpe_cot1_combine"}));
}

TEST(Cot1, GarbageStepAbortsBeforeCombining) {
  ScriptedMock p(identity_fixture());
  p.garbage_for = "kpe_token_sim";
  const auto s = estimate_cot1(kSrc, kMt, p, nullptr, options(), ctx());
  EXPECT_FALSE(s.ordinal.has_value());
  EXPECT_EQ(s.failure, FailureKind::parse);
  EXPECT_NE(s.error.find("kpe_token_sim"), std::string::npos);
  EXPECT_EQ(s.steps.size(), 2u);
  EXPECT_FALSE(s.steps[1].error.empty());
  EXPECT_EQ(p.count("kpe_cot1_combine"), 0u);
}

TEST(Cot2, HandTraceOnIdenticalPair) {
  kpe::mock::MockProvider p(identity_fixture());
  const auto s = estimate_cot2(kSrc, kMt, p, nullptr, options(), ctx());
  ASSERT_EQ(s.steps.size(), 4u);
  EXPECT_EQ(s.steps[0].template_id, "kpe_perplexity");
  EXPECT_EQ(s.steps[1].template_id, "kpe_token_sim");
  EXPECT_EQ(s.steps[2].template_id, "kpe_sent_sim");
  EXPECT_EQ(s.steps[3].template_id, "kpe_cot2_combine");
  EXPECT_EQ(s.ordinal, 4.0);
}

TEST(Cot2, SubstituteMiddleKeepsTheChainGoing) {
  ScriptedMock p(identity_fixture());
  p.garbage_for = "kpe_sent_sim";
  const auto s = estimate_cot2(kSrc, kMt, p, nullptr, options(StepFailurePolicy::substitute_middle), ctx());
  ASSERT_EQ(s.steps.size(), 4u);
  EXPECT_TRUE(s.steps[2].substituted);
  EXPECT_EQ(s.steps[3].bindings.at("sentence_answer"), cls(2));
  EXPECT_EQ(p.count("kpe_cot2_combine"), 1u);
  // Answers 4, 4 and the substituted 2 average to 3.33, class 3.
  EXPECT_EQ(s.ordinal, 3.0);
}

TEST(Cot2, AbortPolicyStopsOnParseFailure) {
  ScriptedMock p(identity_fixture());
  p.garbage_for = "kpe_sent_sim";
  const auto s = estimate_cot2(kSrc, kMt, p, nullptr, options(), ctx());
  EXPECT_FALSE(s.ordinal);
  EXPECT_EQ(s.steps.size(), 3u);
  EXPECT_EQ(p.count("kpe_cot2_combine"), 0u);
}

TEST(Cot2, BackendFailureAlwaysAborts) {
  ScriptedMock p(identity_fixture());
  p.deny_for = "kpe_token_sim";
  const auto s = estimate_cot2(kSrc, kMt, p, nullptr, options(StepFailurePolicy::substitute_middle), ctx());
  EXPECT_FALSE(s.ordinal);
  EXPECT_EQ(s.failure, FailureKind::backend);
  EXPECT_EQ(p.count("kpe_sent_sim"), 0u);
}

TEST(Cot2, FinalStepParseFailureIsNeverSubstituted) {
  ScriptedMock p(identity_fixture());
  p.garbage_for = "kpe_cot2_combine";
  const auto s = estimate_cot2(kSrc, kMt, p, nullptr, options(StepFailurePolicy::substitute_middle), ctx());
  EXPECT_FALSE(s.ordinal);
  EXPECT_EQ(s.failure, FailureKind::parse);
  EXPECT_FALSE(s.steps.back().substituted);
}

TEST(Dataset, ToyLanguagePairScoresCleanly) {
  const auto ds = toy_lp("cs-en");
  ASSERT_EQ(ds.outputs().size(), 80u);
  kpe::test::TempDir dir;
  ResponseCache cache(dir.path());
  kpe::mock::MockProvider p(FixtureTable::load_jsonl(kpe::test::toy_dir() / "mock_fixtures.jsonl"));
  const auto table = score_dataset({Estimator::cot1}, ds, p, &cache, options());
  EXPECT_EQ(table.scores.size(), 80u);
  EXPECT_EQ(table.summary().parsed, 80u);
  EXPECT_EQ(p.calls(), 3u * 80u);

  const auto calls = p.calls();
  const auto again = score_dataset({Estimator::cot1}, ds, p, &cache, options());
  EXPECT_EQ(p.calls(), calls);
  std::ostringstream a, b;
  write_score_table(a, table);
  write_score_table(b, again);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Dataset, StagesRunInLockstep) {
  const auto ds = toy_lp("de-en");
  ScriptedMock p(FixtureTable::load_jsonl(kpe::test::toy_dir() / "mock_fixtures.jsonl"));
  auto opts = options();
  opts.max_in_flight = 4;
  std::vector<std::string> progress;
  opts.progress = [&](const std::string& line) { progress.push_back(line); };
  score_dataset({Estimator::cot2}, ds, p, nullptr, opts);
  const auto log = p.log();
  ASSERT_EQ(log.size(), 4u * 80u);
  const std::vector<std::string> order{"kpe_perplexity", "kpe_token_sim", "kpe_sent_sim",
                                       "kpe_cot2_combine"};
  for (std::size_t i = 0; i < log.size(); ++i) EXPECT_EQ(log[i], order[i / 80]) << i;
  EXPECT_EQ(progress.size(), 4u);
}

TEST(Trace, RecordedBindingsReproduceDigests) {
  const auto ds = toy_lp("fi-en");
  kpe::mock::MockProvider p(FixtureTable::load_jsonl(kpe::test::toy_dir() / "mock_fixtures.jsonl"));
  const auto opts = options();
  auto table = score_dataset({Estimator::cot2}, ds, p, nullptr, opts);
  for (const auto& [key, s] : table.scores) EXPECT_TRUE(verify_trace(s, opts.params));
  auto tampered = table.scores.begin()->second;
  tampered.steps[1].bindings["target_seg"] += "!";
  EXPECT_FALSE(verify_trace(tampered, opts.params));
  auto other_model = opts.params;
  other_model.model_id = "other";
  EXPECT_FALSE(verify_trace(table.scores.begin()->second, other_model));
}

TEST(ScoreFile, RoundTrip) {
  ScriptedMock p(identity_fixture());
  p.garbage_for = "kpe_token_sim";
  ScoreTable t;
  t.kind = {Estimator::cot1};
  const auto ok = estimate_cot1(kSrc, kMt, p, nullptr, options(StepFailurePolicy::substitute_middle), ctx());
  auto failed = estimate_cot1(kSrc, kMt, p, nullptr, options(), {"de-en", "sysB", "1"});
  t.scores.emplace(ScoreKey{"de-en", "sysA", "1"}, ok);
  t.scores.emplace(ScoreKey{"de-en", "sysB", "1"}, failed);

  kpe::test::TempDir dir;
  save_score_table(t, dir / "scores.jsonl");
  const auto back = load_score_table(dir / "scores.jsonl");
  EXPECT_EQ(back.kind, t.kind);
  ASSERT_EQ(back.scores.size(), 2u);
  const auto* a = back.find("de-en", "sysA", "1");
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(a->ordinal, ok.ordinal);
  EXPECT_EQ(a->steps.size(), 3u);
  EXPECT_TRUE(a->steps[1].substituted);
  EXPECT_TRUE(verify_trace(*a, options().params));
  const auto* b = back.find("de-en", "sysB", "1");
  EXPECT_FALSE(b->ordinal);
  EXPECT_EQ(b->failure, FailureKind::parse);
  EXPECT_EQ(back.summary().parsed, 1u);
  EXPECT_EQ(back.summary().dropped, 1u);

  std::ostringstream first, second;
  write_score_table(first, t);
  write_score_table(second, back);
  EXPECT_EQ(first.str(), second.str());
}

TEST(ScoreFile, RejectsMixedKinds) {
  kpe::test::TempDir dir;
  kpe::test::write_text(
      dir / "mixed.jsonl",
      R"({"lp":"de-en","system_id":"a","seg_id":"1","estimator":"cot1","mode":"cat5","ordinal":1,"error":null,"steps":[]})"
      "\n"
      R"({"lp":"de-en","system_id":"b","seg_id":"1","estimator":"cot2","mode":"cat5","ordinal":1,"error":null,"steps":[]})"
      "\n");
  EXPECT_THROW(load_score_table(dir / "mixed.jsonl"), kpe::FormatError);
  kpe::test::write_text(dir / "broken.jsonl", "{\n");
  EXPECT_THROW(load_score_table(dir / "broken.jsonl"), kpe::FormatError);
}
