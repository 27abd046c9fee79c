#pragma once

// Completion providers, the content-addressed response cache, retrying
// completion and the bounded-concurrency batch runner.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kpe/prompting.hpp"

namespace kpe::backend {

struct GenParams {
  std::string model_id;
  double temperature = 0.0;
  int max_tokens = 256;
  std::vector<std::string> stop;

  bool operator==(const GenParams&) const = default;
};

/// Where a prompt came from. Used for routing (the mock provider looks up
/// its fixture by lp and seg_id) and progress messages; never part of the
/// cache key.
struct RequestContext {
  std::string lp;
  std::string system_id;
  std::string seg_id;
};

struct CompletionRequest {
  prompting::RenderedPrompt prompt;
  GenParams params;
  RequestContext context;
};

struct CompletionResult {
  std::string text;
  std::string provider_id;
  bool from_cache = false;
  std::int64_t latency_ms = 0;
  std::string request_digest;
  /// Provider attempts made for this result; 0 on a cache hit.
  int attempts = 0;
};

/// SHA-256 over a length-prefixed canonical serialization of every field,
/// as 64 lowercase hex characters.
std::string cache_key(std::string_view model_id, std::string_view template_id,
                      int template_version, std::string_view final_text, const GenParams& params);
std::string cache_key(const prompting::RenderedPrompt& prompt, const GenParams& params);

class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;

  virtual std::string id() const = 0;

  /// One attempt. Throws AuthError, RateLimitError, TransportError or
  /// ProviderError; transient ones say so through Error::transient().
  std::string call(const CompletionRequest& request);

  /// Attempts made so far, across threads.
  std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  virtual std::string do_call(const CompletionRequest& request) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  /// Defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Calls the provider, retrying transient failures with exponential backoff
/// (base_delay, base_delay * factor, ...). Rethrows the last error once the
/// attempts are exhausted; permanent errors are rethrown immediately.
CompletionResult complete(CompletionProvider& provider, const CompletionRequest& request,
                          const RetryPolicy& retry = {});

struct CacheEntry {
  std::string request_digest;
  std::string template_id;
  int template_version = 1;
  std::string rendered_text;
  GenParams params;
  std::string completion;
  /// UTC, ISO 8601 with a trailing Z.
  std::string created_at;
};

std::string format_timestamp(std::chrono::system_clock::time_point tp);
/// Throws kpe::Error on malformed input.
std::chrono::system_clock::time_point parse_timestamp(std::string_view text);

/// One JSON file per entry at `<dir>/<first 2 hex>/<digest>.json`, written to
/// a temporary file and renamed into place. Safe for concurrent readers and
/// writers in one or several processes.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path entry_path(std::string_view digest) const;

  /// Returns the verified entry or nullopt. An entry that fails to parse or
  /// whose fields do not hash to its digest is moved to
  /// `<dir>/quarantine/` with a warning and reported as a miss.
  std::optional<CacheEntry> lookup(std::string_view digest);
  void store(const CacheEntry& entry);

  /// Entries quarantined by this instance.
  std::size_t quarantined() const noexcept { return quarantined_.load(); }

  /// Deletes entries whose created_at is older than `max_age` at `now`.
  /// Unreadable entries are left alone. Returns the number removed.
  std::size_t gc(std::chrono::seconds max_age,
                 std::chrono::system_clock::time_point now = std::chrono::system_clock::now());

 private:
  std::filesystem::path dir_;
  std::atomic<std::size_t> quarantined_{0};
  std::atomic<std::size_t> temp_counter_{0};
};

/// Cache hit: stored text, from_cache=true, no provider call. Miss: calls
/// `complete` and stores the result. `cache` may be null.
CompletionResult cached_complete(CompletionProvider& provider, ResponseCache* cache,
                                 const CompletionRequest& request, const RetryPolicy& retry = {});

/// A batch slot: either a result or the error that ended the item.
struct BatchItem {
  std::optional<CompletionResult> result;
  std::exception_ptr error;
  std::string error_message;

  bool ok() const noexcept { return result.has_value(); }
};

/// Runs every request through cached_complete with at most `max_in_flight`
/// outstanding. Requests sharing a digest are executed once. Output order
/// equals input order; failures are recorded per slot. Throws
/// CacheCorruptionError when more than half the items hit corrupted entries.
std::vector<BatchItem> run_batch(CompletionProvider& provider, ResponseCache* cache,
                                 std::span<const CompletionRequest> requests,
                                 std::size_t max_in_flight, const RetryPolicy& retry = {});

}  // namespace kpe::backend
