#include "kpe/mock_provider.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "kpe/alignment.hpp"
#include "kpe/errors.hpp"
#include "kpe/parsing.hpp"
#include "kpe/text.hpp"

namespace kpe::mock {

using json = nlohmann::json;
using prompting::SchemaKind;

namespace {

std::set<std::u32string> trigrams(std::string_view s) {
  const auto cps = text::decode_utf8(text::ascii_lower(s));
  std::set<std::u32string> out;
  for (std::size_t i = 0; i + 3 <= cps.size(); ++i) out.insert(cps.substr(i, 3));
  return out;
}

bool all_punctuation(std::string_view token) {
  const auto cps = text::decode_utf8(token);
  return !cps.empty() && std::all_of(cps.begin(), cps.end(), text::is_punctuation);
}

std::string binding(const backend::CompletionRequest& request, std::string_view name) {
  auto it = request.prompt.bindings.find(name);
  if (it == request.prompt.bindings.end()) {
    throw MissingFixtureError("mock: prompt " + request.prompt.template_id + " has no '" +
                              std::string(name) + "' binding");
  }
  return it->second;
}

const std::string& reference_for(const backend::CompletionRequest& request,
                                 const FixtureTable& fixtures) {
  const auto& ctx = request.context;
  const Fixture* f = fixtures.find(ctx.lp, ctx.seg_id);
  if (!f) {
    throw MissingFixtureError("mock: no fixture for (" + ctx.lp + ", " + ctx.seg_id + ")");
  }
  auto it = f->by_template.find(request.prompt.template_id);
  return it == f->by_template.end() ? f->reference : it->second;
}

std::string alignment_answer(const backend::CompletionRequest& request) {
  const auto src = alignment::parse_token_list(binding(request, "source_seg"));
  const auto mt = alignment::parse_token_list(binding(request, "target_seg"));
  std::string out;
  for (const auto& s : src) {
    for (std::size_t j = 0; j < mt.size(); ++j) {
      int pct = 2;
      if (s == mt[j] && all_punctuation(s)) {
        pct = 95;
      } else if (text::ascii_lower(s) == text::ascii_lower(mt[j])) {
        pct = 100;
      }
      if (j) out += ",";
      out += std::to_string(pct);
    }
    out += "\n";
  }
  return out;
}

}  // namespace

FixtureTable FixtureTable::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mock fixtures " + path.string());
  FixtureTable table;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      Fixture f;
      f.reference = j.at("reference").get<std::string>();
      if (auto it = j.find("by_template"); it != j.end()) {
        for (const auto& [id, ref] : it->items()) f.by_template.emplace(id, ref.get<std::string>());
      }
      table.add(j.at("lp").get<std::string>(), j.at("seg_id").get<std::string>(), std::move(f));
    } catch (const json::exception& e) {
      throw FormatError(path.string(), number, e.what());
    }
  }
  return table;
}

void FixtureTable::add(std::string lp, std::string seg_id, Fixture fixture) {
  fixtures_.insert_or_assign({std::move(lp), std::move(seg_id)}, std::move(fixture));
}

const Fixture* FixtureTable::find(std::string_view lp, std::string_view seg_id) const {
  auto it = fixtures_.find({std::string(lp), std::string(seg_id)});
  return it == fixtures_.end() ? nullptr : &it->second;
}

double trigram_overlap(std::string_view a, std::string_view b) {
  const auto ta = trigrams(a);
  const auto tb = trigrams(b);
  if (ta.empty() || tb.empty()) return text::ascii_lower(a) == text::ascii_lower(b) ? 1.0 : 0.0;
  std::size_t shared = 0;
  for (const auto& t : ta) shared += tb.count(t);
  return static_cast<double>(shared) / static_cast<double>(std::min(ta.size(), tb.size()));
}

std::size_t grade_index(double overlap, std::size_t k) {
  const auto idx = static_cast<std::size_t>(std::floor(std::max(0.0, overlap) * k));
  return std::min(k - 1, idx);
}

std::string mock_complete(const backend::CompletionRequest& request, const FixtureTable& fixtures,
                          const prompting::TemplateRegistry& registry) {
  const auto& tmpl = registry.get(request.prompt.template_id);
  const auto& schema = tmpl.schema;
  if (schema.kind == SchemaKind::matrix) return alignment_answer(request);

  // Chain combiners average the ordinals of the step answers they were given.
  std::vector<std::size_t> answers;
  for (const auto& [name, value] : request.prompt.bindings) {
    if (name.size() > 7 && name.ends_with("_answer")) {
      answers.push_back(parsing::category_to_ordinal(value, schema.classes));
    }
  }
  if (!answers.empty() && schema.kind == SchemaKind::categorical) {
    double sum = 0;
    for (auto a : answers) sum += static_cast<double>(a);
    const auto idx = static_cast<std::size_t>(std::floor(sum / answers.size() + 0.5));
    return "Class: " + schema.classes[std::min(idx, schema.classes.size() - 1)];
  }

  const double o = trigram_overlap(binding(request, "target_seg"), reference_for(request, fixtures));
  switch (schema.kind) {
    case SchemaKind::categorical:
      return "Class: " + schema.classes[grade_index(o, schema.classes.size())];
    case SchemaKind::stars: {
      const auto lo = static_cast<std::size_t>(schema.lo);
      const auto span = static_cast<std::size_t>(schema.hi - schema.lo) + 1;
      return std::to_string(lo + grade_index(o, span)) + " stars";
    }
    case SchemaKind::scalar:
      return "Score: " + std::to_string(std::lround(schema.lo + o * (schema.hi - schema.lo)));
    case SchemaKind::matrix:
      break;
  }
  return {};
}

MockProvider::MockProvider(FixtureTable fixtures, const prompting::TemplateRegistry& registry)
    : fixtures_(std::move(fixtures)), registry_(registry) {}

std::string MockProvider::do_call(const backend::CompletionRequest& request) {
  if (max_latency_.count() > 0) {
    const auto h = std::hash<std::string>{}(request.prompt.final_text);
    std::this_thread::sleep_for(std::chrono::milliseconds(h % (max_latency_.count() + 1)));
  }
  return mock_complete(request, fixtures_, registry_);
}

}  // namespace kpe::mock
