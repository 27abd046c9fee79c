#pragma once

// Deterministic stand-in for an LLM. It grades a translation by character
// trigram overlap with a pseudo-reference, combines chain answers by
// averaging, and answers alignment prompts by token identity.

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "kpe/backend.hpp"
#include "kpe/prompting.hpp"

namespace kpe::mock {

struct Fixture {
  std::string reference;
  /// Per-template pseudo-references that replace `reference` for prompts
  /// rendered from that template id.
  std::map<std::string, std::string, std::less<>> by_template;
};

class FixtureTable {
 public:
  /// JSONL: {"lp", "seg_id", "reference", optional "by_template": {id: text}}.
  static FixtureTable load_jsonl(const std::filesystem::path& path);

  void add(std::string lp, std::string seg_id, Fixture fixture);
  const Fixture* find(std::string_view lp, std::string_view seg_id) const;
  std::size_t size() const noexcept { return fixtures_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, Fixture> fixtures_;
};

/// |T(a) ∩ T(b)| / min(|T(a)|, |T(b)|) over sets of code-point trigrams of the
/// ASCII-lowercased strings. When either string has fewer than three code
/// points the result is 1 for equal strings and 0 otherwise.
double trigram_overlap(std::string_view a, std::string_view b);

/// Class index for overlap `o` among `k` classes: min(k-1, floor(o*k)).
std::size_t grade_index(double overlap, std::size_t k);

/// Pure function of the request, the fixtures and the template catalog.
/// Throws MissingFixtureError when a graded prompt has no fixture.
std::string mock_complete(const backend::CompletionRequest& request, const FixtureTable& fixtures,
                          const prompting::TemplateRegistry& registry);

class MockProvider : public backend::CompletionProvider {
 public:
  explicit MockProvider(FixtureTable fixtures,
                        const prompting::TemplateRegistry& registry = prompting::builtin_templates());

  std::string id() const override { return "mock"; }

  /// Sleeps up to `max` per call, pseudo-randomly but reproducibly per prompt.
  void set_artificial_latency(std::chrono::milliseconds max) { max_latency_ = max; }

 protected:
  std::string do_call(const backend::CompletionRequest& request) override;

 private:
  FixtureTable fixtures_;
  const prompting::TemplateRegistry& registry_;
  std::chrono::milliseconds max_latency_{0};
};

}  // namespace kpe::mock
