#include "kpe/chains.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kpe/errors.hpp"
#include "kpe/parsing.hpp"
#include "kpe/text.hpp"

namespace kpe::chains {

using json = nlohmann::json;
using prompting::ScoringMode;

namespace {

struct Step {
  std::string template_id;
  // Binding name under which a later combiner receives this step's answer.
  std::string answer_name;
};

std::vector<Step> plan_for(EstimatorKind kind) {
  const auto v = [&](std::string_view base) { return prompting::variant_id(base, kind.mode); };
  if (is_chain(kind.estimator) && kind.mode != ScoringMode::cat5 && kind.mode != ScoringMode::cat3) {
    throw ConfigError(std::string(to_string(kind.estimator)) +
                      " needs a categorical scoring mode (cat5 or cat3)");
  }
  switch (kind.estimator) {
    case Estimator::gemba:
      return {{kind.mode == ScoringMode::stars    ? "gemba_stars"
               : kind.mode == ScoringMode::scalar ? "gemba_scalar"
                                                  : v("gemba_classify"),
               ""}};
    case Estimator::prompt1_perplexity:
      return {{v("kpe_perplexity"), ""}};
    case Estimator::prompt2_token:
      return {{v("kpe_token_sim"), ""}};
    case Estimator::prompt3_sentence:
      return {{v("kpe_sent_sim"), ""}};
    case Estimator::cot1:
      return {{v("kpe_perplexity"), "perplexity_answer"},
              {v("kpe_token_sim"), "token_answer"},
              {v("kpe_cot1_combine"), ""}};
    case Estimator::cot2:
      return {{v("kpe_perplexity"), "perplexity_answer"},
              {v("kpe_token_sim"), "token_answer"},
              {v("kpe_sent_sim"), "sentence_answer"},
              {v("kpe_cot2_combine"), ""}};
  }
  throw ConfigError("unknown estimator");
}

struct PairInput {
  backend::RequestContext context;
  std::string src;
  std::string mt;
};

struct WorkItem {
  QualityScore score;
  prompting::Bindings answers;
  bool active = true;
};

const prompting::TemplateRegistry& registry_of(const ChainOptions& options) {
  return options.registry ? *options.registry : prompting::builtin_templates();
}

prompting::Bindings bindings_for(const prompting::PromptTemplate& tmpl, const PairInput& pair,
                                 const prompting::Bindings& answers) {
  prompting::Bindings b;
  for (const auto& name : tmpl.placeholders) {
    if (name == "source_seg") {
      b.emplace(name, pair.src);
    } else if (name == "target_seg") {
      b.emplace(name, pair.mt);
    } else if (auto it = answers.find(name); it != answers.end()) {
      b.emplace(name, it->second);
    }
  }
  return b;
}

bool is_parse_error(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ParseError&) {
    return true;
  } catch (...) {
    return false;
  }
}

void check_inputs(EstimatorKind kind, std::string_view src, std::string_view mt,
                  const prompting::TemplateRegistry& registry) {
  if (text::trim(mt).empty()) throw InputError("machine translation is empty");
  bool binds_src = false;
  for (const auto& id : chain_templates(kind)) {
    const auto& ph = registry.get(id).placeholders;
    binds_src |= std::find(ph.begin(), ph.end(), "source_seg") != ph.end();
  }
  if (binds_src && text::trim(src).empty()) throw InputError("source segment is empty");
}

std::vector<QualityScore> run_chain(EstimatorKind kind, const std::vector<PairInput>& pairs,
                                    backend::CompletionProvider& provider,
                                    backend::ResponseCache* cache, const ChainOptions& options) {
  const auto& registry = registry_of(options);
  const auto plan = plan_for(kind);

  std::vector<WorkItem> items(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& s = items[i].score;
    s.lp = pairs[i].context.lp;
    s.system_id = pairs[i].context.system_id;
    s.seg_id = pairs[i].context.seg_id;
    s.kind = kind;
  }

  for (std::size_t k = 0; k < plan.size(); ++k) {
    const auto& step = plan[k];
    const bool final_step = k + 1 == plan.size();
    const auto& tmpl = registry.get(step.template_id);

    std::vector<std::size_t> members;
    std::vector<backend::CompletionRequest> requests;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (!items[i].active) continue;
      members.push_back(i);
      requests.push_back({prompting::render_template(
                              tmpl, bindings_for(tmpl, pairs[i], items[i].answers)),
                          options.params, pairs[i].context});
    }
    if (requests.empty()) break;

    const auto calls_before = provider.calls();
    const auto results = backend::run_batch(provider, cache, requests, options.max_in_flight,
                                            options.retry);

    std::size_t failed = 0;
    for (std::size_t m = 0; m < members.size(); ++m) {
      auto& item = items[members[m]];
      const auto& req = requests[m];
      StepRecord rec;
      rec.template_id = req.prompt.template_id;
      rec.version = req.prompt.version;
      rec.digest = backend::cache_key(req.prompt, req.params);
      rec.bindings = req.prompt.bindings;

      FailureKind failure = FailureKind::none;
      if (!results[m].ok()) {
        rec.error = results[m].error_message;
        failure = is_parse_error(results[m].error) ? FailureKind::parse : FailureKind::backend;
      } else {
        rec.raw_response = results[m].result->text;
        try {
          if (tmpl.schema.kind == prompting::SchemaKind::categorical) {
            auto cat = parsing::parse_categorical(rec.raw_response, tmpl.schema.classes);
            rec.parsed = static_cast<double>(cat.class_index);
            rec.parsed_label = cat.class_string;
          } else {
            rec.parsed = parsing::parse_score(rec.raw_response, tmpl.schema);
          }
        } catch (const ParseError& e) {
          rec.error = e.what();
          failure = FailureKind::parse;
        }
      }

      if (failure == FailureKind::none) {
        if (final_step) {
          item.score.ordinal = rec.parsed;
        } else {
          item.answers[step.answer_name] = rec.parsed_label;
        }
      } else if (!final_step && failure == FailureKind::parse &&
                 options.step_failure == StepFailurePolicy::substitute_middle) {
        rec.substituted = true;
        item.answers[step.answer_name] = tmpl.schema.classes[(tmpl.schema.classes.size() - 1) / 2];
      } else {
        ++failed;
        item.active = false;
        item.score.failure = failure;
        item.score.error = rec.template_id + ": " + rec.error;
      }
      item.score.steps.push_back(std::move(rec));
    }

    if (options.progress) {
      std::ostringstream msg;
      msg << "[" << to_string(kind.estimator) << "/" << prompting::to_string(kind.mode) << "] step "
          << (k + 1) << "/" << plan.size() << " " << step.template_id << ": " << requests.size()
          << " prompts, " << (provider.calls() - calls_before) << " provider calls, " << failed
          << " failed";
      options.progress(msg.str());
    }
  }

  std::vector<QualityScore> out;
  out.reserve(items.size());
  for (auto& item : items) out.push_back(std::move(item.score));
  return out;
}

QualityScore estimate_single(EstimatorKind kind, std::string_view src, std::string_view mt,
                             backend::CompletionProvider& provider, backend::ResponseCache* cache,
                             const ChainOptions& options, backend::RequestContext context) {
  check_inputs(kind, src, mt, registry_of(options));
  std::vector<PairInput> pairs{{std::move(context), std::string(text::trim(src)),
                                std::string(text::trim(mt))}};
  return std::move(run_chain(kind, pairs, provider, cache, options).front());
}

json step_to_json(const StepRecord& s) {
  json j{{"template_id", s.template_id},
         {"version", s.version},
         {"digest", s.digest},
         {"bindings", s.bindings}};
  if (!s.parsed_label.empty()) {
    j["parsed"] = s.parsed_label;
  } else if (s.parsed) {
    j["parsed"] = *s.parsed;
  } else {
    j["parsed"] = nullptr;
  }
  if (!s.error.empty()) j["error"] = s.error;
  if (s.substituted) j["substituted"] = true;
  return j;
}

json number_json(double v) {
  if (v == static_cast<double>(static_cast<long long>(v))) return static_cast<long long>(v);
  return v;
}

}  // namespace

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::gemba:
      return "gemba";
    case Estimator::prompt1_perplexity:
      return "prompt1_perplexity";
    case Estimator::prompt2_token:
      return "prompt2_token";
    case Estimator::prompt3_sentence:
      return "prompt3_sentence";
    case Estimator::cot1:
      return "cot1";
    case Estimator::cot2:
      return "cot2";
  }
  return "gemba";
}

Estimator parse_estimator(std::string_view name) {
  for (auto e : kAllEstimators) {
    if (to_string(e) == name) return e;
  }
  if (name == "prompt1") return Estimator::prompt1_perplexity;
  if (name == "prompt2") return Estimator::prompt2_token;
  if (name == "prompt3") return Estimator::prompt3_sentence;
  throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

bool is_chain(Estimator e) { return e == Estimator::cot1 || e == Estimator::cot2; }

StepFailurePolicy parse_step_failure(std::string_view name) {
  if (name == "abort_pair") return StepFailurePolicy::abort_pair;
  if (name == "substitute_middle") return StepFailurePolicy::substitute_middle;
  throw ConfigError("unknown step_failure policy '" + std::string(name) + "'");
}

std::string_view to_string(StepFailurePolicy p) {
  return p == StepFailurePolicy::abort_pair ? "abort_pair" : "substitute_middle";
}

std::string_view to_string(FailureKind k) {
  switch (k) {
    case FailureKind::none:
      return "none";
    case FailureKind::input:
      return "input";
    case FailureKind::backend:
      return "backend";
    case FailureKind::parse:
      return "parse";
  }
  return "none";
}

ScoreSummary ScoreTable::summary() const {
  ScoreSummary s;
  for (const auto& [key, score] : scores) {
    if (score.ordinal) {
      ++s.parsed;
    } else if (score.failure == FailureKind::parse) {
      ++s.dropped;
    } else {
      ++s.errored;
    }
  }
  return s;
}

const QualityScore* ScoreTable::find(std::string_view lp, std::string_view system_id,
                                     std::string_view seg_id) const {
  auto it = scores.find(ScoreKey{std::string(lp), std::string(system_id), std::string(seg_id)});
  return it == scores.end() ? nullptr : &it->second;
}

std::vector<std::string> chain_templates(EstimatorKind kind) {
  std::vector<std::string> ids;
  for (auto& step : plan_for(kind)) ids.push_back(std::move(step.template_id));
  return ids;
}

QualityScore estimate_one_step(EstimatorKind kind, std::string_view src, std::string_view mt,
                               backend::CompletionProvider& provider,
                               backend::ResponseCache* cache, const ChainOptions& options,
                               backend::RequestContext context) {
  if (is_chain(kind.estimator)) {
    throw ConfigError(std::string(to_string(kind.estimator)) + " is not a one-step estimator");
  }
  return estimate_single(kind, src, mt, provider, cache, options, std::move(context));
}

QualityScore estimate_cot1(std::string_view src, std::string_view mt,
                           backend::CompletionProvider& provider, backend::ResponseCache* cache,
                           const ChainOptions& options, backend::RequestContext context,
                           ScoringMode mode) {
  return estimate_single({Estimator::cot1, mode}, src, mt, provider, cache, options,
                         std::move(context));
}

QualityScore estimate_cot2(std::string_view src, std::string_view mt,
                           backend::CompletionProvider& provider, backend::ResponseCache* cache,
                           const ChainOptions& options, backend::RequestContext context,
                           ScoringMode mode) {
  return estimate_single({Estimator::cot2, mode}, src, mt, provider, cache, options,
                         std::move(context));
}

ScoreTable score_dataset(EstimatorKind kind, const corpus::EvalDataset& dataset,
                         backend::CompletionProvider& provider, backend::ResponseCache* cache,
                         const ChainOptions& options) {
  std::vector<PairInput> pairs;
  pairs.reserve(dataset.outputs().size());
  for (const auto& o : dataset.outputs()) {
    const auto* seg = dataset.find_segment(o.lp, o.seg_id);
    if (!seg) throw ReferentialError("output references unknown segment " + o.seg_id);
    pairs.push_back({{o.lp.str(), o.system_id, o.seg_id}, seg->src_text, o.mt_text});
  }
  ScoreTable table;
  table.kind = kind;
  for (auto& score : run_chain(kind, pairs, provider, cache, options)) {
    ScoreKey key{score.lp, score.system_id, score.seg_id};
    table.scores.emplace(std::move(key), std::move(score));
  }
  return table;
}

bool verify_trace(const QualityScore& score, const backend::GenParams& params,
                  const prompting::TemplateRegistry& registry) {
  for (const auto& step : score.steps) {
    const auto* tmpl = registry.find(step.template_id);
    if (!tmpl || tmpl->version != step.version) return false;
    try {
      const auto rendered = prompting::render_template(*tmpl, step.bindings);
      if (backend::cache_key(rendered, params) != step.digest) return false;
    } catch (const Error&) {
      return false;
    }
  }
  return true;
}

void write_score_table(std::ostream& os, const ScoreTable& table) {
  for (const auto& [key, s] : table.scores) {
    json j{{"lp", s.lp},
           {"system_id", s.system_id},
           {"seg_id", s.seg_id},
           {"estimator", to_string(s.kind.estimator)},
           {"mode", prompting::to_string(s.kind.mode)}};
    j["ordinal"] = s.ordinal ? number_json(*s.ordinal) : json(nullptr);
    j["error"] = s.error.empty() ? json(nullptr) : json(s.error);
    j["error_kind"] = to_string(s.failure);
    j["steps"] = json::array();
    for (const auto& step : s.steps) j["steps"].push_back(step_to_json(step));
    os << j.dump() << '\n';
  }
}

void save_score_table(const ScoreTable& table, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    write_score_table(os, table);
    if (!os.flush()) throw IoError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ScoreTable load_score_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open score file " + path.string());
  ScoreTable table;
  bool first = true;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::trim(line).empty()) continue;
    QualityScore s;
    try {
      const auto j = json::parse(line);
      s.lp = j.at("lp").get<std::string>();
      s.system_id = j.at("system_id").get<std::string>();
      s.seg_id = j.at("seg_id").get<std::string>();
      s.kind = {parse_estimator(j.at("estimator").get<std::string>()),
                prompting::parse_scoring_mode(j.at("mode").get<std::string>())};
      if (!j.at("ordinal").is_null()) s.ordinal = j.at("ordinal").get<double>();
      if (!j.at("error").is_null()) s.error = j.at("error").get<std::string>();
      const auto kind = j.value("error_kind", std::string("none"));
      s.failure = kind == "parse"     ? FailureKind::parse
                  : kind == "backend" ? FailureKind::backend
                  : kind == "input"   ? FailureKind::input
                                      : FailureKind::none;
      if (!s.ordinal && s.failure == FailureKind::none) s.failure = FailureKind::backend;
      for (const auto& st : j.at("steps")) {
        StepRecord rec;
        rec.template_id = st.at("template_id").get<std::string>();
        rec.version = st.at("version").get<int>();
        rec.digest = st.at("digest").get<std::string>();
        rec.bindings = st.at("bindings").get<prompting::Bindings>();
        const auto& parsed = st.at("parsed");
        if (parsed.is_string()) {
          rec.parsed_label = parsed.get<std::string>();
        } else if (parsed.is_number()) {
          rec.parsed = parsed.get<double>();
        }
        rec.error = st.value("error", std::string());
        rec.substituted = st.value("substituted", false);
        s.steps.push_back(std::move(rec));
      }
    } catch (const json::exception& e) {
      throw FormatError(path.string(), number, e.what());
    } catch (const ConfigError& e) {
      throw FormatError(path.string(), number, e.what());
    }
    if (first) {
      table.kind = s.kind;
      first = false;
    } else if (!(table.kind == s.kind)) {
      throw FormatError(path.string(), number, "score file mixes estimators or modes");
    }
    ScoreKey key{s.lp, s.system_id, s.seg_id};
    table.scores.emplace(std::move(key), std::move(s));
  }
  return table;
}

}  // namespace kpe::chains
