#pragma once

// Evaluation data: source segments, system outputs and human relative-ranking
// judgments, loaded from the canonical TSV/JSONL formats and cross-checked.

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace kpe::corpus {

/// "src-tgt" pair of lowercase ISO 639 codes, e.g. zh-en.
struct LanguagePair {
  std::string src;
  std::string tgt;

  /// Throws kpe::Error when `text` is not two 2-3 letter lowercase codes
  /// joined by '-'.
  static LanguagePair parse(std::string_view text);
  std::string str() const { return src + "-" + tgt; }

  auto operator<=>(const LanguagePair&) const = default;
};

struct Segment {
  LanguagePair lp;
  std::string seg_id;
  std::string src_text;

  auto operator<=>(const Segment&) const = default;
};

struct SystemOutput {
  LanguagePair lp;
  std::string system_id;
  std::string seg_id;
  std::string mt_text;

  auto operator<=>(const SystemOutput&) const = default;
};

/// Human says `better_system` translated `seg_id` better than `worse_system`.
struct RRJudgment {
  LanguagePair lp;
  std::string seg_id;
  std::string better_system;
  std::string worse_system;

  auto operator<=>(const RRJudgment&) const = default;
};

enum class FileFormat { tsv, jsonl };

/// `.jsonl` / `.json` selects JSONL, anything else TSV.
FileFormat format_for_path(const std::filesystem::path& path);

std::vector<Segment> load_segments(const std::filesystem::path& path, FileFormat format);
std::vector<SystemOutput> load_system_outputs(const std::filesystem::path& path,
                                              FileFormat format);
/// Order-preserving; duplicate judgments are kept.
std::vector<RRJudgment> load_rr_judgments(const std::filesystem::path& path, FileFormat format);

/// Validated, immutable dataset. Segments and outputs are held sorted by key;
/// judgments keep file order.
class EvalDataset {
 public:
  EvalDataset() = default;

  /// Checks referential integrity; throws ReferentialError or
  /// DuplicateKeyError.
  static EvalDataset assemble(std::vector<Segment> segments, std::vector<SystemOutput> outputs,
                              std::vector<RRJudgment> judgments);

  const std::vector<Segment>& segments() const noexcept { return segments_; }
  const std::vector<SystemOutput>& outputs() const noexcept { return outputs_; }
  const std::vector<RRJudgment>& judgments() const noexcept { return judgments_; }

  const Segment* find_segment(const LanguagePair& lp, std::string_view seg_id) const;
  const SystemOutput* find_output(const LanguagePair& lp, std::string_view system_id,
                                  std::string_view seg_id) const;

  bool operator==(const EvalDataset&) const = default;

 private:
  std::vector<Segment> segments_;
  std::vector<SystemOutput> outputs_;
  std::vector<RRJudgment> judgments_;
};

struct LpStats {
  std::size_t segments = 0;
  std::size_t systems = 0;
  std::size_t judgments = 0;

  bool operator==(const LpStats&) const = default;
};

struct DatasetStats {
  std::map<std::string, LpStats> per_lp;  // keyed by "src-tgt"
  std::size_t total_judgments = 0;

  bool operator==(const DatasetStats&) const = default;
};

DatasetStats dataset_stats(const EvalDataset& dataset);

void write_segments_jsonl(std::ostream& os, const std::vector<Segment>& segments);
void write_outputs_jsonl(std::ostream& os, const std::vector<SystemOutput>& outputs);
void write_judgments_jsonl(std::ostream& os, const std::vector<RRJudgment>& judgments);

/// Writes segments.jsonl, outputs.jsonl and judgments.jsonl into `dir`.
void save_dataset_jsonl(const EvalDataset& dataset, const std::filesystem::path& dir);
EvalDataset load_dataset_jsonl(const std::filesystem::path& dir);

}  // namespace kpe::corpus
