#pragma once

// Versioned prompt templates with `{name}` placeholders, the builtin catalog,
// and literal rendering.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace kpe::prompting {

enum class SchemaKind { categorical, stars, scalar, matrix };

/// Expected shape of a completion.
struct ResponseSchema {
  SchemaKind kind = SchemaKind::categorical;
  /// Categorical only, ordered worst to best.
  std::vector<std::string> classes;
  /// Stars and scalar range, inclusive.
  double lo = 0;
  double hi = 0;

  static ResponseSchema categorical(std::vector<std::string> classes);
  static ResponseSchema stars(int lo = 1, int hi = 5);
  static ResponseSchema scalar(double lo = 0, double hi = 100);
  static ResponseSchema matrix();

  bool operator==(const ResponseSchema&) const = default;
};

/// Score granularity an estimator asks for.
enum class ScoringMode { cat5, cat3, stars, scalar };

std::string_view to_string(ScoringMode mode);
/// Throws kpe::ConfigError on unknown names.
ScoringMode parse_scoring_mode(std::string_view name);

/// Builtin templates come in one variant per scoring mode: the cat5 variant
/// carries the bare id, others append `_cat3`, `_stars` or `_scalar`.
std::string variant_id(std::string_view base_id, ScoringMode mode);

using Bindings = std::map<std::string, std::string, std::less<>>;

struct PromptTemplate {
  std::string template_id;
  int version = 1;
  std::string body;
  /// Names in order of first appearance in `body`.
  std::vector<std::string> placeholders;
  /// Subset of placeholders that may be bound to an empty string.
  std::set<std::string, std::less<>> optional;
  ResponseSchema schema;

  /// Throws TemplateError when body and placeholder list disagree or the
  /// schema is malformed.
  void validate() const;
};

struct RenderedPrompt {
  std::string template_id;
  int version = 1;
  std::string final_text;
  Bindings bindings;

  bool operator==(const RenderedPrompt&) const = default;
};

/// `{name}` occurrences in `body`, first-appearance order, no duplicates.
std::vector<std::string> placeholders_in(std::string_view body);

/// Literal substitution of every declared placeholder. Values are inserted
/// as-is, never re-expanded.
RenderedPrompt render_template(const PromptTemplate& tmpl, const Bindings& bindings);

/// Parses the text asset format: `key: value` header lines (template_id,
/// version, schema, placeholders, classes followed by one class per line),
/// a `---` line, then the body. A single trailing newline is not part of the
/// body. Placeholders listed with a trailing `?` are optional.
PromptTemplate parse_template_asset(std::string_view asset);
std::string format_template_asset(const PromptTemplate& tmpl);

class TemplateRegistry {
 public:
  /// Throws TemplateError on duplicate ids or invalid templates.
  void add(PromptTemplate tmpl);
  /// Throws NotFoundError.
  const PromptTemplate& get(std::string_view template_id) const;
  const PromptTemplate* find(std::string_view template_id) const;
  const std::map<std::string, PromptTemplate, std::less<>>& all() const noexcept {
    return templates_;
  }

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

/// Catalog compiled from assets/templates. Immutable.
const TemplateRegistry& builtin_templates();

}  // namespace kpe::prompting
