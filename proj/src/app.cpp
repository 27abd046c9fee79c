#include "kpe/app.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "kpe/alignment.hpp"
#include "kpe/corpus.hpp"
#include "kpe/errors.hpp"
#include "kpe/http_provider.hpp"
#include "kpe/mock_provider.hpp"
#include "kpe/text.hpp"

namespace kpe::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string normalize_key(std::string_view key) {
  std::string k(key);
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto t = text::trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return value;
}

std::vector<chains::Estimator> parse_estimator_list(std::string_view text) {
  std::vector<chains::Estimator> out;
  for (const auto& part : text::split(text, ',')) {
    const auto name = text::trim(part);
    if (name.empty()) continue;
    if (name == "all") {
      out.assign(std::begin(chains::kAllEstimators), std::end(chains::kAllEstimators));
      continue;
    }
    try {
      out.push_back(chains::parse_estimator(name));
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  if (out.empty()) throw ConfigError("estimators: empty list");
  return out;
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

std::string file_component(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '.' || c == '-' || c == '_';
    if (!keep) c = '_';
  }
  return out;
}

void require_file(const fs::path& p, std::string_view what) {
  if (p.empty()) throw ConfigError(std::string(what) + " path is not set");
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) {
    throw IoError(std::string(what) + " file not found: " + p.string());
  }
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "endpoint_url", "model_id",     "cache_dir",     "max_in_flight", "scoring_mode",
      "estimators",   "drop_policy",  "step_failure",  "segments",      "outputs",
      "judgments",    "human_scores", "mock_fixtures", "provider",      "out_dir",
      "temperature",  "max_tokens",   "error_threshold", "timeout_s"};
  return k;
}

RunConfig RunConfig::from_json(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (key == "api_key") throw ConfigError("api keys are read from " + std::string(kApiKeyEnv));
    const auto& names = keys();
    if (std::find(names.begin(), names.end(), key) == names.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array() && key == "estimators") {
      for (const auto& item : value) {
        if (!item.is_string()) throw ConfigError("estimators must be strings");
        if (!text.empty()) text += ",";
        text += item.get<std::string>();
      }
    } else if (value.is_number()) {
      text = value.dump();
    } else {
      throw ConfigError("bad value for " + key + ": " + value.dump());
    }
    if (key == "segments" || key == "outputs" || key == "judgments" || key == "human_scores" ||
        key == "mock_fixtures" || key == "cache_dir" || key == "out_dir") {
      text = resolve(base_dir, text).string();
    }
    cfg.set(key, text);
  }
  return cfg;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path());
}

void RunConfig::set(std::string_view raw_key, std::string_view value) {
  const auto key = normalize_key(raw_key);
  const std::string v(value);
  if (key == "endpoint_url") {
    endpoint_url = v;
  } else if (key == "model_id") {
    model_id = v;
  } else if (key == "cache_dir") {
    cache_dir = v;
  } else if (key == "max_in_flight") {
    const auto n = parse_number<long long>(key, value);
    if (n < 1) throw ConfigError("max_in_flight must be at least 1");
    max_in_flight = static_cast<std::size_t>(n);
  } else if (key == "scoring_mode") {
    try {
      scoring_mode = prompting::parse_scoring_mode(value);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "estimators") {
    estimators = parse_estimator_list(value);
  } else if (key == "drop_policy") {
    drop_policy = metrics::parse_drop_policy(value);
  } else if (key == "step_failure") {
    try {
      step_failure = chains::parse_step_failure(value);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "segments") {
    segments = v;
  } else if (key == "outputs") {
    outputs = v;
  } else if (key == "judgments") {
    judgments = v;
  } else if (key == "human_scores") {
    human_scores = v;
  } else if (key == "mock_fixtures") {
    mock_fixtures = v;
  } else if (key == "provider") {
    if (v != "http" && v != "mock") throw ConfigError("provider must be http or mock");
    provider = v;
  } else if (key == "out_dir") {
    out_dir = v;
  } else if (key == "temperature") {
    temperature = parse_number<double>(key, value);
  } else if (key == "max_tokens") {
    max_tokens = parse_number<int>(key, value);
    if (max_tokens < 1) throw ConfigError("max_tokens must be at least 1");
  } else if (key == "error_threshold") {
    error_threshold = parse_number<double>(key, value);
    if (error_threshold < 0 || error_threshold > 1) {
      throw ConfigError("error_threshold must be within [0, 1]");
    }
  } else if (key == "timeout_s") {
    timeout_s = parse_number<int>(key, value);
    if (timeout_s < 1) throw ConfigError("timeout_s must be at least 1");
  } else {
    throw ConfigError("unknown config key '" + std::string(raw_key) + "'");
  }
}

void RunConfig::validate_for_score() const {
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
  require_file(segments, "segments");
  require_file(outputs, "outputs");
  if (!judgments.empty()) require_file(judgments, "judgments");
  if (!human_scores.empty()) require_file(human_scores, "human_scores");
  if (provider == "mock") {
    require_file(mock_fixtures, "mock_fixtures");
  } else if (endpoint_url.empty()) {
    throw ConfigError("endpoint_url is required for the http provider");
  }
}

std::vector<chains::EstimatorKind> RunConfig::estimator_kinds() const {
  std::vector<chains::EstimatorKind> out;
  for (auto e : estimators) out.push_back({e, scoring_mode});
  return out;
}

backend::GenParams RunConfig::gen_params() const {
  backend::GenParams p;
  p.model_id = model_id;
  p.temperature = temperature;
  p.max_tokens = max_tokens;
  return p;
}

std::chrono::seconds parse_duration(std::string_view text) {
  auto t = text::trim(text);
  if (t.empty()) throw ConfigError("empty duration");
  long long unit = 1;
  switch (t.back()) {
    case 'd':
      unit = 86400;
      break;
    case 'h':
      unit = 3600;
      break;
    case 'm':
      unit = 60;
      break;
    case 's':
      break;
    default:
      unit = 0;
  }
  if (unit != 0) {
    t.remove_suffix(1);
  } else {
    unit = 1;
  }
  const auto n = parse_number<long long>("duration", t);
  if (n < 0) throw ConfigError("duration must not be negative");
  return std::chrono::seconds(n * unit);
}

namespace {

std::string_view schema_kind_name(prompting::SchemaKind k) {
  switch (k) {
    case prompting::SchemaKind::categorical:
      return "categorical";
    case prompting::SchemaKind::stars:
      return "stars";
    case prompting::SchemaKind::scalar:
      return "scalar";
    case prompting::SchemaKind::matrix:
      return "matrix";
  }
  return "categorical";
}

std::string schema_text(const prompting::ResponseSchema& s) {
  std::string out(schema_kind_name(s.kind));
  if (s.kind == prompting::SchemaKind::categorical) {
    out += "(" + std::to_string(s.classes.size()) + ")";
  } else if (s.kind != prompting::SchemaKind::matrix) {
    out += " " + std::to_string(static_cast<int>(s.lo)) + "-" + std::to_string(static_cast<int>(s.hi));
  }
  return out;
}

}  // namespace

void cmd_templates(std::ostream& out, bool as_json) {
  const auto& registry = prompting::builtin_templates();
  if (as_json) {
    json arr = json::array();
    for (const auto& [id, t] : registry.all()) {
      json schema = {{"kind", schema_kind_name(t.schema.kind)}};
      if (t.schema.kind == prompting::SchemaKind::categorical) {
        schema["classes"] = t.schema.classes;
      } else if (t.schema.kind != prompting::SchemaKind::matrix) {
        schema["min"] = t.schema.lo;
        schema["max"] = t.schema.hi;
      }
      arr.push_back({{"template_id", id},
                     {"version", t.version},
                     {"placeholders", t.placeholders},
                     {"schema", schema}});
    }
    out << arr.dump(2) << "\n";
    return;
  }
  for (const auto& [id, t] : registry.all()) {
    std::string ph;
    for (const auto& p : t.placeholders) {
      if (!ph.empty()) ph += ",";
      ph += p;
    }
    out << id << "\tv" << t.version << "\t" << schema_text(t.schema) << "\t" << ph << "\n";
  }
}

std::unique_ptr<backend::CompletionProvider> make_provider(const RunConfig& config) {
  if (config.provider == "mock") {
    require_file(config.mock_fixtures, "mock_fixtures");
    return std::make_unique<mock::MockProvider>(mock::FixtureTable::load_jsonl(config.mock_fixtures));
  }
  if (config.endpoint_url.empty()) {
    throw ConfigError("endpoint_url is required for the http provider");
  }
  backend::Endpoint::parse(config.endpoint_url);
  if (!backend::endpoint_reachable(config.endpoint_url)) {
    throw TransportError("endpoint unreachable: " + config.endpoint_url);
  }
  const char* key = std::getenv(kApiKeyEnv);
  return std::make_unique<backend::HttpProvider>(config.endpoint_url, key ? key : "",
                                                 std::chrono::seconds(config.timeout_s));
}

std::string score_file_name(chains::EstimatorKind kind) {
  std::string name = "scores_" + std::string(chains::to_string(kind.estimator));
  if (kind.mode != prompting::ScoringMode::cat5) {
    name += "_" + std::string(prompting::to_string(kind.mode));
  }
  return name + ".jsonl";
}

namespace {

corpus::EvalDataset load_dataset(const RunConfig& config) {
  auto segments = corpus::load_segments(config.segments, corpus::format_for_path(config.segments));
  auto outputs =
      corpus::load_system_outputs(config.outputs, corpus::format_for_path(config.outputs));
  std::vector<corpus::RRJudgment> judgments;
  if (!config.judgments.empty()) {
    judgments = corpus::load_rr_judgments(config.judgments, corpus::format_for_path(config.judgments));
  }
  return corpus::EvalDataset::assemble(std::move(segments), std::move(outputs),
                                       std::move(judgments));
}

}  // namespace

ScoreOutcome cmd_score(const RunConfig& config, backend::CompletionProvider& provider,
                       std::ostream& log) {
  config.validate_for_score();
  const auto dataset = load_dataset(config);
  fs::create_directories(config.out_dir);
  fs::create_directories(config.cache_dir);
  backend::ResponseCache cache(config.cache_dir);

  chains::ChainOptions options;
  options.params = config.gen_params();
  options.max_in_flight = config.max_in_flight;
  options.step_failure = config.step_failure;
  options.progress = [&log](const std::string& line) { log << line << "\n" << std::flush; };

  ScoreOutcome outcome;
  const auto calls_before = provider.calls();
  for (const auto kind : config.estimator_kinds()) {
    log << "scoring " << chains::to_string(kind.estimator) << " ("
        << prompting::to_string(kind.mode) << ")\n";
    auto table = chains::score_dataset(kind, dataset, provider, &cache, options);
    const auto s = table.summary();
    const double rate =
        s.total() == 0 ? 0.0
                       : static_cast<double>(s.total() - s.parsed) / static_cast<double>(s.total());
    outcome.worst_error_rate = std::max(outcome.worst_error_rate, rate);
    log << "  parsed " << s.parsed << ", dropped " << s.dropped << ", errored " << s.errored
        << "\n";
    const auto path = config.out_dir / score_file_name(kind);
    chains::save_score_table(table, path);
    outcome.files.push_back(path);
    outcome.tables.push_back(std::move(table));
  }
  outcome.provider_calls = provider.calls() - calls_before;
  log << "provider calls: " << outcome.provider_calls << "\n";
  if (outcome.worst_error_rate > config.error_threshold) {
    log << "error rate " << report::format_percent(outcome.worst_error_rate)
        << " exceeds threshold " << report::format_percent(config.error_threshold) << "\n";
    outcome.exit_code = kExitErrorRate;
  }
  return outcome;
}

report::Report cmd_report(const ReportOptions& options, std::ostream& log) {
  if (options.score_files.empty()) throw ConfigError("no score files given");
  require_file(options.judgments, "judgments");
  std::vector<chains::ScoreTable> tables;
  for (const auto& p : options.score_files) tables.push_back(chains::load_score_table(p));
  const auto judgments =
      corpus::load_rr_judgments(options.judgments, corpus::format_for_path(options.judgments));
  std::optional<std::vector<metrics::HumanSystemScore>> human;
  if (options.human_scores) {
    require_file(*options.human_scores, "human_scores");
    human = metrics::load_human_scores(*options.human_scores);
  }
  auto rep = report::build_report(tables, judgments, human ? &*human : nullptr,
                                  options.drop_policy, options.model_id,
                                  backend::format_timestamp(std::chrono::system_clock::now()));
  for (const auto& w : rep.warnings) log << "warning: " << w << "\n";
  fs::create_directories(options.out_dir);
  write_file(options.out_dir / "report.md", report::render_markdown(rep));
  write_file(options.out_dir / "report.csv", report::render_csv(rep));
  return rep;
}

std::vector<fs::path> cmd_align(const RunConfig& config, backend::CompletionProvider& provider,
                                std::string_view lp_text, std::string_view system_id,
                                const std::vector<std::string>& seg_ids, std::ostream& log) {
  if (seg_ids.empty()) throw ConfigError("no segment ids given");
  config.validate_for_score();
  const auto dataset = load_dataset(config);
  const auto lp = corpus::LanguagePair::parse(lp_text);

  struct Job {
    const corpus::Segment* segment;
    const corpus::SystemOutput* output;
  };
  std::vector<Job> jobs;
  for (const auto& id : seg_ids) {
    const auto* seg = dataset.find_segment(lp, id);
    if (!seg) throw NotFoundError("unknown seg id '" + id + "' in " + lp.str());
    const auto* out = dataset.find_output(lp, system_id, id);
    if (!out) {
      throw NotFoundError("no output of system '" + std::string(system_id) + "' for seg id '" +
                          id + "' in " + lp.str());
    }
    jobs.push_back({seg, out});
  }

  fs::create_directories(config.out_dir);
  fs::create_directories(config.cache_dir);
  backend::ResponseCache cache(config.cache_dir);
  std::vector<fs::path> written;
  for (const auto& job : jobs) {
    const auto src = alignment::tokenize(job.segment->src_text);
    const auto mt = alignment::tokenize(job.output->mt_text);
    auto result = alignment::align_tokens(src, mt, provider, &cache, config.gen_params(),
                                          {lp.str(), std::string(system_id), job.segment->seg_id});
    if (result.clamped > 0) {
      log << "warning: " << result.clamped << " cells clamped for seg " << job.segment->seg_id
          << "\n";
    }
    const auto stem = file_component(lp.str()) + "_" + file_component(system_id) + "_" +
                      file_component(job.segment->seg_id);
    const auto svg = config.out_dir / (stem + ".svg");
    const auto js = config.out_dir / (stem + ".json");
    write_file(svg, alignment::render_heatmap(result.matrix));
    write_file(js, alignment::matrix_to_json(result.matrix) + "\n");
    written.push_back(svg);
    written.push_back(js);
    log << "aligned " << stem << "\n";
  }
  return written;
}

std::size_t cmd_cache_gc(const fs::path& cache_dir, std::chrono::seconds max_age) {
  std::error_code ec;
  if (!fs::is_directory(cache_dir, ec)) {
    throw IoError("cache directory not found: " + cache_dir.string());
  }
  backend::ResponseCache cache(cache_dir);
  return cache.gc(max_age);
}

}  // namespace kpe::app
