#include "kpe/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "kpe/errors.hpp"
#include "kpe/text.hpp"

namespace kpe::corpus {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

bool valid_code(std::string_view code) {
  if (code.size() < 2 || code.size() > 3) return false;
  return std::all_of(code.begin(), code.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

// One non-blank input line with its 1-based number.
struct Line {
  std::size_t number;
  std::string text;
};

std::vector<Line> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Line> lines;
  std::string buf;
  std::size_t number = 0;
  while (std::getline(in, buf)) {
    ++number;
    if (auto bad = text::find_invalid_utf8(buf)) {
      throw FormatError(path.string(), number,
                        "invalid UTF-8 at byte " + std::to_string(*bad));
    }
    if (text::trim(buf).empty()) continue;
    lines.push_back({number, std::move(buf)});
  }
  if (in.bad()) throw IoError("read failed for " + path.string());
  return lines;
}

// Splits a record into exactly `names.size()` trimmed fields.
std::vector<std::string> fields_of(const fs::path& path, const Line& line, FileFormat format,
                                   const std::vector<std::string_view>& names) {
  std::vector<std::string> out;
  if (format == FileFormat::tsv) {
    const auto parts = text::split(line.text, '\t');
    if (parts.size() != names.size()) {
      throw FormatError(path.string(), line.number,
                        "expected " + std::to_string(names.size()) + " tab-separated columns, got " +
                            std::to_string(parts.size()));
    }
    for (auto p : parts) out.emplace_back(text::trim(p));
    return out;
  }
  json obj;
  try {
    obj = json::parse(line.text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string(), line.number, std::string("bad JSON: ") + e.what());
  }
  if (!obj.is_object()) throw FormatError(path.string(), line.number, "expected a JSON object");
  for (auto name : names) {
    auto it = obj.find(std::string(name));
    if (it == obj.end() || !it->is_string()) {
      throw FormatError(path.string(), line.number,
                        "missing string field '" + std::string(name) + "'");
    }
    out.emplace_back(text::trim(it->get<std::string>()));
  }
  return out;
}

void require_non_empty(const fs::path& path, const Line& line, const std::string& value,
                       std::string_view name) {
  if (value.empty()) {
    throw FormatError(path.string(), line.number, "empty " + std::string(name));
  }
}

LanguagePair lp_field(const fs::path& path, const Line& line, const std::string& value) {
  try {
    return LanguagePair::parse(value);
  } catch (const Error& e) {
    throw FormatError(path.string(), line.number, e.what());
  }
}

template <typename Key>
void check_unique(std::map<Key, std::size_t>& seen, Key key, const fs::path& path,
                  const Line& line, const std::string& label) {
  auto [it, inserted] = seen.emplace(std::move(key), line.number);
  if (!inserted) {
    throw DuplicateKeyError(path.string(), line.number,
                            "duplicate key " + label + " (first seen on line " +
                                std::to_string(it->second) + ")");
  }
}

}  // namespace

LanguagePair LanguagePair::parse(std::string_view text) {
  const auto dash = text.find('-');
  if (dash == std::string_view::npos) {
    throw Error("language pair '" + std::string(text) + "' must look like src-tgt");
  }
  LanguagePair lp{std::string(text.substr(0, dash)), std::string(text.substr(dash + 1))};
  if (!valid_code(lp.src) || !valid_code(lp.tgt)) {
    throw Error("language pair '" + std::string(text) +
                "' must use lowercase 2-3 letter codes");
  }
  return lp;
}

FileFormat format_for_path(const fs::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json") ? FileFormat::jsonl : FileFormat::tsv;
}

std::vector<Segment> load_segments(const fs::path& path, FileFormat format) {
  std::vector<Segment> out;
  std::map<std::tuple<LanguagePair, std::string>, std::size_t> seen;
  for (const auto& line : read_lines(path)) {
    auto f = fields_of(path, line, format, {"lp", "seg_id", "src_text"});
    Segment seg{lp_field(path, line, f[0]), std::move(f[1]), std::move(f[2])};
    require_non_empty(path, line, seg.seg_id, "seg_id");
    require_non_empty(path, line, seg.src_text, "src_text");
    check_unique(seen, std::tuple{seg.lp, seg.seg_id}, path, line,
                 "(" + seg.lp.str() + ", " + seg.seg_id + ")");
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<SystemOutput> load_system_outputs(const fs::path& path, FileFormat format) {
  std::vector<SystemOutput> out;
  std::map<std::tuple<LanguagePair, std::string, std::string>, std::size_t> seen;
  for (const auto& line : read_lines(path)) {
    auto f = fields_of(path, line, format, {"lp", "system_id", "seg_id", "mt_text"});
    SystemOutput o{lp_field(path, line, f[0]), std::move(f[1]), std::move(f[2]), std::move(f[3])};
    require_non_empty(path, line, o.system_id, "system_id");
    require_non_empty(path, line, o.seg_id, "seg_id");
    require_non_empty(path, line, o.mt_text, "mt_text");
    check_unique(seen, std::tuple{o.lp, o.system_id, o.seg_id}, path, line,
                 "(" + o.lp.str() + ", " + o.system_id + ", " + o.seg_id + ")");
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<RRJudgment> load_rr_judgments(const fs::path& path, FileFormat format) {
  std::vector<RRJudgment> out;
  for (const auto& line : read_lines(path)) {
    auto f = fields_of(path, line, format, {"lp", "seg_id", "better_system", "worse_system"});
    RRJudgment j{lp_field(path, line, f[0]), std::move(f[1]), std::move(f[2]), std::move(f[3])};
    require_non_empty(path, line, j.seg_id, "seg_id");
    require_non_empty(path, line, j.better_system, "better_system");
    require_non_empty(path, line, j.worse_system, "worse_system");
    if (j.better_system == j.worse_system) {
      throw SelfComparisonError(path.string(), line.number,
                                "system '" + j.better_system + "' compared with itself");
    }
    out.push_back(std::move(j));
  }
  return out;
}

EvalDataset EvalDataset::assemble(std::vector<Segment> segments,
                                  std::vector<SystemOutput> outputs,
                                  std::vector<RRJudgment> judgments) {
  std::sort(segments.begin(), segments.end());
  std::sort(outputs.begin(), outputs.end(), [](const SystemOutput& a, const SystemOutput& b) {
    return std::tie(a.lp, a.system_id, a.seg_id) < std::tie(b.lp, b.system_id, b.seg_id);
  });
  for (std::size_t i = 1; i < segments.size(); ++i) {
    if (segments[i].lp == segments[i - 1].lp && segments[i].seg_id == segments[i - 1].seg_id) {
      throw DuplicateKeyError("<dataset>", 0,
                              "duplicate segment (" + segments[i].lp.str() + ", " +
                                  segments[i].seg_id + ")");
    }
  }
  for (std::size_t i = 1; i < outputs.size(); ++i) {
    const auto& a = outputs[i - 1];
    const auto& b = outputs[i];
    if (a.lp == b.lp && a.system_id == b.system_id && a.seg_id == b.seg_id) {
      throw DuplicateKeyError("<dataset>", 0,
                              "duplicate output (" + b.lp.str() + ", " + b.system_id + ", " +
                                  b.seg_id + ")");
    }
  }

  EvalDataset ds;
  ds.segments_ = std::move(segments);
  ds.outputs_ = std::move(outputs);
  for (const auto& o : ds.outputs_) {
    if (!ds.find_segment(o.lp, o.seg_id)) {
      throw ReferentialError("output of system '" + o.system_id + "' references unknown segment (" +
                             o.lp.str() + ", " + o.seg_id + ")");
    }
  }
  for (const auto& j : judgments) {
    if (j.better_system == j.worse_system) {
      throw ReferentialError("judgment on (" + j.lp.str() + ", " + j.seg_id +
                             ") compares system '" + j.better_system + "' with itself");
    }
    if (!ds.find_segment(j.lp, j.seg_id)) {
      throw ReferentialError("judgment references unknown segment (" + j.lp.str() + ", " +
                             j.seg_id + ")");
    }
    for (const auto* sys : {&j.better_system, &j.worse_system}) {
      if (!ds.find_output(j.lp, *sys, j.seg_id)) {
        throw ReferentialError("judgment references system '" + *sys + "' with no output for (" +
                               j.lp.str() + ", " + j.seg_id + ")");
      }
    }
  }
  ds.judgments_ = std::move(judgments);
  return ds;
}

const Segment* EvalDataset::find_segment(const LanguagePair& lp, std::string_view seg_id) const {
  auto it = std::lower_bound(segments_.begin(), segments_.end(), 0,
                             [&](const Segment& s, int) {
                               if (s.lp != lp) return s.lp < lp;
                               return std::string_view(s.seg_id) < seg_id;
                             });
  if (it != segments_.end() && it->lp == lp && it->seg_id == seg_id) return &*it;
  return nullptr;
}

const SystemOutput* EvalDataset::find_output(const LanguagePair& lp, std::string_view system_id,
                                             std::string_view seg_id) const {
  auto it = std::lower_bound(outputs_.begin(), outputs_.end(), 0,
                             [&](const SystemOutput& o, int) {
                               if (o.lp != lp) return o.lp < lp;
                               if (o.system_id != system_id) {
                                 return std::string_view(o.system_id) < system_id;
                               }
                               return std::string_view(o.seg_id) < seg_id;
                             });
  if (it != outputs_.end() && it->lp == lp && it->system_id == system_id && it->seg_id == seg_id) {
    return &*it;
  }
  return nullptr;
}

DatasetStats dataset_stats(const EvalDataset& dataset) {
  DatasetStats stats;
  std::map<std::string, std::set<std::string>> systems;
  for (const auto& s : dataset.segments()) ++stats.per_lp[s.lp.str()].segments;
  for (const auto& o : dataset.outputs()) systems[o.lp.str()].insert(o.system_id);
  for (const auto& [lp, ids] : systems) stats.per_lp[lp].systems = ids.size();
  for (const auto& j : dataset.judgments()) {
    ++stats.per_lp[j.lp.str()].judgments;
    ++stats.total_judgments;
  }
  return stats;
}

void write_segments_jsonl(std::ostream& os, const std::vector<Segment>& segments) {
  for (const auto& s : segments) {
    os << json{{"lp", s.lp.str()}, {"seg_id", s.seg_id}, {"src_text", s.src_text}}.dump() << '\n';
  }
}

void write_outputs_jsonl(std::ostream& os, const std::vector<SystemOutput>& outputs) {
  for (const auto& o : outputs) {
    os << json{{"lp", o.lp.str()},
               {"system_id", o.system_id},
               {"seg_id", o.seg_id},
               {"mt_text", o.mt_text}}
              .dump()
       << '\n';
  }
}

void write_judgments_jsonl(std::ostream& os, const std::vector<RRJudgment>& judgments) {
  for (const auto& j : judgments) {
    os << json{{"lp", j.lp.str()},
               {"seg_id", j.seg_id},
               {"better_system", j.better_system},
               {"worse_system", j.worse_system}}
              .dump()
       << '\n';
  }
}

void save_dataset_jsonl(const EvalDataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("segments.jsonl");
    write_segments_jsonl(os, dataset.segments());
  }
  {
    auto os = open("outputs.jsonl");
    write_outputs_jsonl(os, dataset.outputs());
  }
  {
    auto os = open("judgments.jsonl");
    write_judgments_jsonl(os, dataset.judgments());
  }
}

EvalDataset load_dataset_jsonl(const fs::path& dir) {
  return EvalDataset::assemble(load_segments(dir / "segments.jsonl", FileFormat::jsonl),
                               load_system_outputs(dir / "outputs.jsonl", FileFormat::jsonl),
                               load_rr_judgments(dir / "judgments.jsonl", FileFormat::jsonl));
}

}  // namespace kpe::corpus
