#include "kpe/backend.hpp"

#include <charconv>
#include <map>
#include <thread>

#include <openssl/evp.h>

#include "kpe/errors.hpp"

namespace kpe::backend {

namespace {

void put_field(std::string& out, std::string_view field) {
  // 8-byte big-endian length, then the bytes.
  const std::uint64_t n = field.size();
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((n >> shift) & 0xFF));
  }
  out.append(field);
}

std::string shortest_double(double v) {
  if (v == 0.0) v = 0.0;  // folds -0.0
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[md[i] >> 4]);
    hex.push_back(kHex[md[i] & 0x0F]);
  }
  return hex;
}

}  // namespace

std::string cache_key(std::string_view model_id, std::string_view template_id,
                      int template_version, std::string_view final_text,
                      const GenParams& params) {
  std::string canonical;
  canonical.reserve(final_text.size() + 256);
  put_field(canonical, "kpe-cache-key/1");
  put_field(canonical, model_id);
  put_field(canonical, template_id);
  put_field(canonical, std::to_string(template_version));
  put_field(canonical, final_text);
  put_field(canonical, shortest_double(params.temperature));
  put_field(canonical, std::to_string(params.max_tokens));
  put_field(canonical, std::to_string(params.stop.size()));
  for (const auto& s : params.stop) put_field(canonical, s);
  return sha256_hex(canonical);
}

std::string cache_key(const prompting::RenderedPrompt& prompt, const GenParams& params) {
  return cache_key(params.model_id, prompt.template_id, prompt.version, prompt.final_text,
                   params);
}

std::string CompletionProvider::call(const CompletionRequest& request) {
  calls_.fetch_add(1);
  return do_call(request);
}

CompletionResult complete(CompletionProvider& provider, const CompletionRequest& request,
                          const RetryPolicy& retry) {
  const auto started = std::chrono::steady_clock::now();
  auto delay = retry.base_delay;
  const int max_attempts = std::max(1, retry.max_attempts);
  for (int attempt = 1;; ++attempt) {
    try {
      CompletionResult result;
      result.text = provider.call(request);
      result.provider_id = provider.id();
      result.request_digest = cache_key(request.prompt, request.params);
      result.attempts = attempt;
      result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - started)
                              .count();
      return result;
    } catch (const Error& e) {
      if (!e.transient() || attempt >= max_attempts) throw;
    }
    if (retry.sleep) {
      retry.sleep(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
    delay = std::chrono::milliseconds(
        static_cast<std::chrono::milliseconds::rep>(static_cast<double>(delay.count()) *
                                                    retry.factor));
  }
}

std::vector<BatchItem> run_batch(CompletionProvider& provider, ResponseCache* cache,
                                 std::span<const CompletionRequest> requests,
                                 std::size_t max_in_flight, const RetryPolicy& retry) {
  if (max_in_flight == 0) throw Error("max_in_flight must be at least 1");

  // Identical requests run once and fan out to every slot that asked.
  std::vector<std::size_t> owner(requests.size());
  std::vector<std::size_t> unique;
  {
    std::map<std::string, std::size_t> first_by_digest;
    for (std::size_t i = 0; i < requests.size(); ++i) {
      auto digest = cache_key(requests[i].prompt, requests[i].params);
      auto [it, inserted] = first_by_digest.emplace(std::move(digest), unique.size());
      if (inserted) unique.push_back(i);
      owner[i] = it->second;
    }
  }

  const std::size_t quarantined_before = cache ? cache->quarantined() : 0;
  std::vector<BatchItem> done(unique.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t u = next.fetch_add(1); u < unique.size(); u = next.fetch_add(1)) {
      auto& slot = done[u];
      try {
        slot.result = cached_complete(provider, cache, requests[unique[u]], retry);
      } catch (const std::exception& e) {
        slot.error = std::current_exception();
        slot.error_message = e.what();
      }
    }
  };
  const std::size_t workers = std::min(max_in_flight, unique.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  if (cache) {
    const std::size_t corrupted = cache->quarantined() - quarantined_before;
    if (!requests.empty() && corrupted * 2 > requests.size()) {
      throw CacheCorruptionError(std::to_string(corrupted) + " of " +
                                 std::to_string(requests.size()) +
                                 " batch items hit corrupted cache entries in " +
                                 cache->dir().string());
    }
  }

  std::vector<BatchItem> out(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) out[i] = done[owner[i]];
  return out;
}

}  // namespace kpe::backend
