#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "kpe/backend.hpp"
#include "kpe/errors.hpp"

namespace kpe::backend {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json to_json(const CacheEntry& e) {
  return json{{"request_digest", e.request_digest},
              {"model_id", e.params.model_id},
              {"template_id", e.template_id},
              {"template_version", e.template_version},
              {"rendered_text", e.rendered_text},
              {"params",
               {{"temperature", e.params.temperature},
                {"max_tokens", e.params.max_tokens},
                {"stop", e.params.stop}}},
              {"completion", e.completion},
              {"created_at", e.created_at}};
}

CacheEntry from_json(const json& j) {
  CacheEntry e;
  e.request_digest = j.at("request_digest").get<std::string>();
  e.params.model_id = j.at("model_id").get<std::string>();
  e.template_id = j.at("template_id").get<std::string>();
  e.template_version = j.at("template_version").get<int>();
  e.rendered_text = j.at("rendered_text").get<std::string>();
  const auto& p = j.at("params");
  e.params.temperature = p.at("temperature").get<double>();
  e.params.max_tokens = p.at("max_tokens").get<int>();
  e.params.stop = p.at("stop").get<std::vector<std::string>>();
  e.completion = j.at("completion").get<std::string>();
  e.created_at = j.at("created_at").get<std::string>();
  return e;
}

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

std::string format_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::chrono::system_clock::time_point parse_timestamp(std::string_view text) {
  std::tm tm{};
  std::istringstream in{std::string(text)};
  in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%S");
  if (in.fail() || in.get() != 'Z') {
    throw Error("bad timestamp '" + std::string(text) + "'");
  }
  return std::chrono::system_clock::from_time_t(timegm(&tm));
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

fs::path ResponseCache::entry_path(std::string_view digest) const {
  const std::string d(digest);
  return dir_ / d.substr(0, 2) / (d + ".json");
}

std::optional<CacheEntry> ResponseCache::lookup(std::string_view digest) {
  const auto path = entry_path(digest);
  auto body = read_file(path);
  if (!body) return std::nullopt;
  std::string problem;
  try {
    auto entry = from_json(json::parse(*body));
    const auto recomputed = cache_key(entry.params.model_id, entry.template_id,
                                      entry.template_version, entry.rendered_text, entry.params);
    if (recomputed == digest && entry.request_digest == digest) return entry;
    problem = "digest mismatch";
  } catch (const std::exception& e) {
    problem = e.what();
  }

  std::error_code ec;
  fs::create_directories(dir_ / "quarantine", ec);
  const auto target = dir_ / "quarantine" /
                      (std::string(digest) + "." + std::to_string(::getpid()) + "." +
                       std::to_string(temp_counter_.fetch_add(1)) + ".json");
  fs::rename(path, target, ec);
  quarantined_.fetch_add(1);
  std::cerr << "warning: corrupted cache entry " << path.string() << " (" << problem
            << "), moved to " << target.string() << "\n";
  return std::nullopt;
}

void ResponseCache::store(const CacheEntry& entry) {
  const auto path = entry_path(entry.request_digest);
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());

  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(tid) + "." +
         std::to_string(temp_counter_.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << to_json(entry).dump() << '\n';
    if (!out.flush()) throw IoError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename cache entry into " + path.string());
  }
}

std::size_t ResponseCache::gc(std::chrono::seconds max_age,
                              std::chrono::system_clock::time_point now) {
  std::size_t removed = 0;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(dir_, ec); it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (ec) throw IoError("cannot scan cache directory " + dir_.string() + ": " + ec.message());
    if (it->is_directory() && it->path().filename() == "quarantine") {
      it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file() || it->path().extension() != ".json") continue;
    auto body = read_file(it->path());
    if (!body) continue;
    std::chrono::system_clock::time_point created;
    try {
      created = parse_timestamp(json::parse(*body).at("created_at").get<std::string>());
    } catch (const std::exception&) {
      continue;
    }
    if (now - created > max_age) {
      std::error_code rm;
      if (fs::remove(it->path(), rm)) ++removed;
      if (rm) throw IoError("cannot remove " + it->path().string() + ": " + rm.message());
    }
  }
  if (ec) throw IoError("cannot scan cache directory " + dir_.string() + ": " + ec.message());
  return removed;
}

CompletionResult cached_complete(CompletionProvider& provider, ResponseCache* cache,
                                 const CompletionRequest& request, const RetryPolicy& retry) {
  const auto digest = cache_key(request.prompt, request.params);
  if (cache) {
    if (auto hit = cache->lookup(digest)) {
      CompletionResult r;
      r.text = std::move(hit->completion);
      r.provider_id = provider.id();
      r.from_cache = true;
      r.request_digest = digest;
      return r;
    }
  }
  auto result = complete(provider, request, retry);
  if (cache) {
    CacheEntry entry{digest,
                     request.prompt.template_id,
                     request.prompt.version,
                     request.prompt.final_text,
                     request.params,
                     result.text,
                     format_timestamp(std::chrono::system_clock::now())};
    cache->store(entry);
  }
  return result;
}

}  // namespace kpe::backend
