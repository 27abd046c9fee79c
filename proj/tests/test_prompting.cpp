#include <gtest/gtest.h>

#include "kpe/errors.hpp"
#include "kpe/prompting.hpp"

using namespace kpe::prompting;

namespace {

PromptTemplate make(std::string body) {
  PromptTemplate t;
  t.template_id = "t";
  t.body = std::move(body);
  t.placeholders = placeholders_in(t.body);
  t.schema = ResponseSchema::categorical({"bad", "good"});
  t.validate();
  return t;
}

const std::vector<std::string> kGembaClasses = {
    "No meaning preserved", "Some meaning preserved, but not understandable",
    "Some meaning preserved and understandable", "Most meaning preserved, minor issues",
    "Perfect translation"};

}  // namespace

TEST(Placeholders, FirstAppearanceOrder) {
  EXPECT_EQ(placeholders_in("{b} and {a} then {b}"), (std::vector<std::string>{"b", "a"}));
  EXPECT_TRUE(placeholders_in("no placeholders, {} or { x }").empty());
}

TEST(Render, SimpleSubstitution) {
  const auto r = render_template(make(R"(source: "{source_seg}")"), {{"source_seg", "Hi"}});
  EXPECT_EQ(r.final_text, R"(source: "Hi")");
  EXPECT_EQ(r.template_id, "t");
  EXPECT_EQ(r.bindings.at("source_seg"), "Hi");
}

TEST(Render, ValuesAreNotReexpanded) {
  const auto r = render_template(make("{a}|{b}"), {{"a", "{b}"}, {"b", "x"}});
  EXPECT_EQ(r.final_text, "{b}|x");
}

TEST(Render, MissingBindingNamesIt) {
  const auto& gemba = builtin_templates().get("gemba_classify");
  try {
    render_template(gemba, {{"source_seg", "x"}});
    FAIL() << "expected MissingBindingError";
  } catch (const kpe::MissingBindingError& e) {
    EXPECT_EQ(e.names(), std::vector<std::string>{"target_seg"});
  }
}

TEST(Render, UnknownAndEmptyBindings) {
  const auto t = make("{a}");
  EXPECT_THROW(render_template(t, {{"a", "x"}, {"zz", "y"}}), kpe::UnknownBindingError);
  EXPECT_THROW(render_template(t, {{"a", ""}}), kpe::EmptyValueError);
  auto opt = t;
  opt.optional.insert("a");
  EXPECT_EQ(render_template(opt, {{"a", ""}}).final_text, "");
}

TEST(Render, NoUnexpandedPlaceholdersInBuiltins) {
  for (const auto& [id, t] : builtin_templates().all()) {
    Bindings b;
    for (const auto& name : t.placeholders) b[name] = "VALUE";
    const auto r = render_template(t, b);
    for (const auto& name : t.placeholders) {
      EXPECT_EQ(r.final_text.find("{" + name + "}"), std::string::npos) << id;
    }
  }
}

TEST(Builtins, GembaPromptText) {
  const auto r = render_template(builtin_templates().get("gemba_classify"),
                                 {{"source_seg", "Er kam heute."}, {"target_seg", "He came today."}});
  EXPECT_EQ(r.final_text.rfind("Classify the quality of machine translation into one of following classes", 0), 0u);
  EXPECT_NE(r.final_text.find("He came today."), std::string::npos);
}

TEST(Builtins, GembaClassList) {
  const auto& t = builtin_templates().get("gemba_classify");
  EXPECT_EQ(t.schema.kind, SchemaKind::categorical);
  EXPECT_EQ(t.schema.classes, kGembaClasses);
}

TEST(Builtins, PerplexityBindsOnlyTarget) {
  EXPECT_EQ(builtin_templates().get("kpe_perplexity").placeholders,
            std::vector<std::string>{"target_seg"});
}

TEST(Builtins, UnknownIdIsNotFound) {
  EXPECT_THROW(builtin_templates().get("no_such_template"), kpe::NotFoundError);
  EXPECT_EQ(builtin_templates().find("no_such_template"), nullptr);
}

TEST(Builtins, CatalogContents) {
  for (const char* id : {"gemba_classify", "kpe_perplexity", "kpe_token_sim", "kpe_sent_sim",
                         "kpe_cot1_combine", "kpe_cot2_combine", "kpe_token_align"}) {
    EXPECT_NE(builtin_templates().find(id), nullptr) << id;
  }
  EXPECT_EQ(builtin_templates().get("kpe_cot2_combine").placeholders,
            (std::vector<std::string>{"source_seg", "target_seg", "perplexity_answer",
                                      "token_answer", "sentence_answer"}));
  EXPECT_EQ(builtin_templates().get("kpe_token_align").schema.kind, SchemaKind::matrix);
  EXPECT_EQ(builtin_templates().get("kpe_token_sim_cat3").schema.classes.size(), 3u);
  EXPECT_EQ(builtin_templates().get("gemba_stars").schema.kind, SchemaKind::stars);
}

TEST(Builtins, EveryTemplateValidates) {
  for (const auto& [id, t] : builtin_templates().all()) {
    EXPECT_NO_THROW(t.validate()) << id;
    EXPECT_EQ(id, t.template_id);
  }
}

TEST(Validate, Rejections) {
  PromptTemplate t;
  t.template_id = "x";
  t.body = "{a}";
  t.schema = ResponseSchema::categorical({"bad", "good"});
  t.placeholders = {"a", "b"};
  EXPECT_THROW(t.validate(), kpe::TemplateError);
  t.placeholders = {"a"};
  t.schema = ResponseSchema::categorical({"only"});
  EXPECT_THROW(t.validate(), kpe::TemplateError);
  t.schema = ResponseSchema::categorical({"same", "same"});
  EXPECT_THROW(t.validate(), kpe::TemplateError);
  t.schema = ResponseSchema::scalar(5, 5);
  EXPECT_THROW(t.validate(), kpe::TemplateError);
}

TEST(Registry, DuplicateIdRejected) {
  TemplateRegistry reg;
  reg.add(make("{a}"));
  EXPECT_THROW(reg.add(make("{a}")), kpe::TemplateError);
}

TEST(Asset, RoundTrip) {
  for (const auto& [id, t] : builtin_templates().all()) {
    EXPECT_EQ(parse_template_asset(format_template_asset(t)).body, t.body) << id;
    const auto back = parse_template_asset(format_template_asset(t));
    EXPECT_EQ(back.placeholders, t.placeholders) << id;
    EXPECT_EQ(back.schema, t.schema) << id;
    EXPECT_EQ(back.version, t.version) << id;
  }
}

TEST(Asset, ParseHeader) {
  const auto t = parse_template_asset(
      "template_id: demo\nversion: 3\nschema: scalar 0 10\nplaceholders: a, b?\n---\n{a}:{b}\n");
  EXPECT_EQ(t.template_id, "demo");
  EXPECT_EQ(t.version, 3);
  EXPECT_EQ(t.body, "{a}:{b}");
  EXPECT_EQ(t.schema, ResponseSchema::scalar(0, 10));
  EXPECT_TRUE(t.optional.contains("b"));
  EXPECT_THROW(parse_template_asset("template_id: x\n{a}"), kpe::TemplateError);
}

TEST(Modes, ParseAndVariantIds) {
  EXPECT_EQ(parse_scoring_mode("cat3"), ScoringMode::cat3);
  EXPECT_THROW(parse_scoring_mode("cat7"), kpe::ConfigError);
  EXPECT_EQ(variant_id("kpe_token_sim", ScoringMode::cat5), "kpe_token_sim");
  EXPECT_EQ(variant_id("kpe_token_sim", ScoringMode::stars), "kpe_token_sim_stars");
}
