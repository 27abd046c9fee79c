#include "kpe/prompting.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "kpe/errors.hpp"
#include "kpe/text.hpp"

namespace kpe::prompting {

namespace {

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

// Length of the `{name}` token at `pos` (0 if there is none) and the name.
std::size_t placeholder_at(std::string_view body, std::size_t pos, std::string_view& name) {
  if (body[pos] != '{' || pos + 2 >= body.size() || !ident_start(body[pos + 1])) return 0;
  std::size_t end = pos + 1;
  while (end < body.size() && ident_char(body[end])) ++end;
  if (end >= body.size() || body[end] != '}') return 0;
  name = body.substr(pos + 1, end - pos - 1);
  return end - pos + 1;
}

std::string_view strip_prefix(std::string_view line, std::string_view key) {
  if (line.substr(0, key.size()) != key) return {};
  return text::trim(line.substr(key.size()));
}

int parse_int(std::string_view s, std::string_view what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw TemplateError("bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return value;
}

double parse_double(std::string_view s, std::string_view what) {
  double value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw TemplateError("bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return value;
}

std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

ResponseSchema ResponseSchema::categorical(std::vector<std::string> classes) {
  ResponseSchema s;
  s.kind = SchemaKind::categorical;
  s.classes = std::move(classes);
  return s;
}

ResponseSchema ResponseSchema::stars(int lo, int hi) {
  ResponseSchema s;
  s.kind = SchemaKind::stars;
  s.lo = lo;
  s.hi = hi;
  return s;
}

ResponseSchema ResponseSchema::scalar(double lo, double hi) {
  ResponseSchema s;
  s.kind = SchemaKind::scalar;
  s.lo = lo;
  s.hi = hi;
  return s;
}

ResponseSchema ResponseSchema::matrix() {
  ResponseSchema s;
  s.kind = SchemaKind::matrix;
  return s;
}

std::string_view to_string(ScoringMode mode) {
  switch (mode) {
    case ScoringMode::cat5:
      return "cat5";
    case ScoringMode::cat3:
      return "cat3";
    case ScoringMode::stars:
      return "stars";
    case ScoringMode::scalar:
      return "scalar";
  }
  return "cat5";
}

ScoringMode parse_scoring_mode(std::string_view name) {
  if (name == "cat5") return ScoringMode::cat5;
  if (name == "cat3") return ScoringMode::cat3;
  if (name == "stars") return ScoringMode::stars;
  if (name == "scalar") return ScoringMode::scalar;
  throw ConfigError("unknown scoring mode '" + std::string(name) +
                    "' (expected cat5, cat3, stars or scalar)");
}

std::string variant_id(std::string_view base_id, ScoringMode mode) {
  std::string id(base_id);
  if (mode != ScoringMode::cat5) id += "_" + std::string(to_string(mode));
  return id;
}

std::vector<std::string> placeholders_in(std::string_view body) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < body.size(); ++i) {
    std::string_view name;
    if (std::size_t len = placeholder_at(body, i, name)) {
      if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
      i += len - 1;
    }
  }
  return names;
}

void PromptTemplate::validate() const {
  if (template_id.empty()) throw TemplateError("template without id");
  if (version < 1) throw TemplateError(template_id + ": version must be >= 1");
  auto in_body = placeholders_in(body);
  auto declared = placeholders;
  std::sort(in_body.begin(), in_body.end());
  std::sort(declared.begin(), declared.end());
  if (std::adjacent_find(declared.begin(), declared.end()) != declared.end()) {
    throw TemplateError(template_id + ": placeholder declared twice");
  }
  if (in_body != declared) {
    throw TemplateError(template_id + ": declared placeholders do not match the body");
  }
  for (const auto& name : optional) {
    if (!std::binary_search(declared.begin(), declared.end(), name)) {
      throw TemplateError(template_id + ": optional placeholder '" + name + "' is not declared");
    }
  }
  switch (schema.kind) {
    case SchemaKind::categorical: {
      if (schema.classes.size() < 2) {
        throw TemplateError(template_id + ": categorical schema needs at least two classes");
      }
      auto sorted = schema.classes;
      for (auto& c : sorted) c = text::ascii_lower(c);
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw TemplateError(template_id + ": class names must be distinct");
      }
      break;
    }
    case SchemaKind::stars:
    case SchemaKind::scalar:
      if (!(schema.lo < schema.hi)) throw TemplateError(template_id + ": empty score range");
      break;
    case SchemaKind::matrix:
      break;
  }
}

RenderedPrompt render_template(const PromptTemplate& tmpl, const Bindings& bindings) {
  std::vector<std::string> missing;
  for (const auto& name : tmpl.placeholders) {
    if (!bindings.contains(name)) missing.push_back(name);
  }
  if (!missing.empty()) throw MissingBindingError(std::move(missing));

  std::vector<std::string> unknown;
  for (const auto& [name, value] : bindings) {
    if (std::find(tmpl.placeholders.begin(), tmpl.placeholders.end(), name) ==
        tmpl.placeholders.end()) {
      unknown.push_back(name);
    }
  }
  if (!unknown.empty()) throw UnknownBindingError(std::move(unknown));

  for (const auto& [name, value] : bindings) {
    if (value.empty() && !tmpl.optional.contains(name)) {
      throw EmptyValueError("binding '" + name + "' of template " + tmpl.template_id +
                            " is empty");
    }
  }

  RenderedPrompt out{tmpl.template_id, tmpl.version, {}, bindings};
  const std::string_view body = tmpl.body;
  out.final_text.reserve(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) {
    std::string_view name;
    if (std::size_t len = placeholder_at(body, i, name)) {
      auto it = bindings.find(name);
      if (it != bindings.end()) {
        out.final_text += it->second;
        i += len - 1;
        continue;
      }
    }
    out.final_text.push_back(body[i]);
  }
  return out;
}

PromptTemplate parse_template_asset(std::string_view asset) {
  PromptTemplate t;
  const auto sep = asset.find("\n---\n");
  if (sep == std::string_view::npos) throw TemplateError("template asset lacks '---' separator");
  std::string_view body = asset.substr(sep + 5);
  if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
  t.body = std::string(body);

  bool have_id = false;
  bool have_schema = false;
  bool in_classes = false;
  std::vector<std::string> classes;
  std::string schema_spec;
  for (auto raw : text::split(asset.substr(0, sep), '\n')) {
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    if (in_classes) {
      classes.emplace_back(line);
      continue;
    }
    if (auto v = strip_prefix(line, "template_id:"); !v.empty()) {
      t.template_id = std::string(v);
      have_id = true;
    } else if (auto v = strip_prefix(line, "version:"); !v.empty()) {
      t.version = parse_int(v, "version");
    } else if (auto v = strip_prefix(line, "schema:"); !v.empty()) {
      schema_spec = std::string(v);
      have_schema = true;
    } else if (line.substr(0, 13) == "placeholders:") {
      for (auto item : text::split(line.substr(13), ',')) {
        auto name = std::string(text::trim(item));
        if (name.empty()) continue;
        if (name.back() == '?') {
          name.pop_back();
          t.optional.insert(name);
        }
        t.placeholders.push_back(std::move(name));
      }
    } else if (line == "classes:") {
      in_classes = true;
    } else {
      throw TemplateError("unknown template header line '" + std::string(line) + "'");
    }
  }
  if (!have_id || !have_schema) throw TemplateError("template asset lacks template_id or schema");

  std::istringstream spec(schema_spec);
  std::string kind;
  spec >> kind;
  std::string lo;
  std::string hi;
  spec >> lo >> hi;
  if (kind == "categorical") {
    t.schema = ResponseSchema::categorical(std::move(classes));
  } else if (kind == "stars") {
    t.schema = ResponseSchema::stars(lo.empty() ? 1 : parse_int(lo, "star range"),
                                     hi.empty() ? 5 : parse_int(hi, "star range"));
  } else if (kind == "scalar") {
    t.schema = ResponseSchema::scalar(lo.empty() ? 0 : parse_double(lo, "scalar range"),
                                      hi.empty() ? 100 : parse_double(hi, "scalar range"));
  } else if (kind == "matrix") {
    t.schema = ResponseSchema::matrix();
  } else {
    throw TemplateError("unknown schema '" + schema_spec + "'");
  }
  if (t.schema.kind != SchemaKind::categorical && !classes.empty()) {
    throw TemplateError(t.template_id + ": classes given for a non-categorical schema");
  }
  t.validate();
  return t;
}

std::string format_template_asset(const PromptTemplate& tmpl) {
  std::string out = "template_id: " + tmpl.template_id + "\n";
  out += "version: " + std::to_string(tmpl.version) + "\n";
  out += "schema: ";
  switch (tmpl.schema.kind) {
    case SchemaKind::categorical:
      out += "categorical";
      break;
    case SchemaKind::stars:
      out += "stars " + format_number(tmpl.schema.lo) + " " + format_number(tmpl.schema.hi);
      break;
    case SchemaKind::scalar:
      out += "scalar " + format_number(tmpl.schema.lo) + " " + format_number(tmpl.schema.hi);
      break;
    case SchemaKind::matrix:
      out += "matrix";
      break;
  }
  out += "\nplaceholders: ";
  for (std::size_t i = 0; i < tmpl.placeholders.size(); ++i) {
    if (i) out += ", ";
    out += tmpl.placeholders[i];
    if (tmpl.optional.contains(tmpl.placeholders[i])) out += "?";
  }
  out += "\n";
  if (tmpl.schema.kind == SchemaKind::categorical) {
    out += "classes:\n";
    for (const auto& c : tmpl.schema.classes) out += c + "\n";
  }
  out += "---\n" + tmpl.body + "\n";
  return out;
}

void TemplateRegistry::add(PromptTemplate tmpl) {
  tmpl.validate();
  if (templates_.contains(tmpl.template_id)) {
    throw TemplateError("duplicate template id " + tmpl.template_id);
  }
  auto id = tmpl.template_id;
  templates_.emplace(std::move(id), std::move(tmpl));
}

const PromptTemplate* TemplateRegistry::find(std::string_view template_id) const {
  auto it = templates_.find(template_id);
  return it == templates_.end() ? nullptr : &it->second;
}

const PromptTemplate& TemplateRegistry::get(std::string_view template_id) const {
  if (const auto* t = find(template_id)) return *t;
  throw NotFoundError("no template named '" + std::string(template_id) + "'");
}

}  // namespace kpe::prompting
