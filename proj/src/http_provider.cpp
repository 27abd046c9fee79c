#include "kpe/http_provider.hpp"

#include <algorithm>
#include <charconv>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "kpe/errors.hpp"

namespace kpe::backend {

using json = nlohmann::json;

namespace {

std::unique_ptr<httplib::Client> make_client(const Endpoint& ep, std::chrono::seconds timeout) {
  auto client = std::make_unique<httplib::Client>(ep.origin());
  client->set_connection_timeout(timeout);
  client->set_read_timeout(timeout);
  client->set_write_timeout(timeout);
  return client;
}

std::string error_message(std::string_view body) {
  try {
    const auto j = json::parse(body);
    if (auto it = j.find("error"); it != j.end()) {
      if (it->is_object() && it->contains("message")) return it->at("message").get<std::string>();
      if (it->is_string()) return it->get<std::string>();
    }
  } catch (const json::exception&) {
  }
  return std::string(body.substr(0, 200));
}

}  // namespace

Endpoint Endpoint::parse(std::string_view url) {
  Endpoint ep;
  const auto sep = url.find("://");
  if (sep == std::string_view::npos) {
    throw ConfigError("endpoint_url '" + std::string(url) + "' lacks a scheme");
  }
  ep.scheme = std::string(url.substr(0, sep));
  if (ep.scheme != "http" && ep.scheme != "https") {
    throw ConfigError("endpoint_url scheme must be http or https, got '" + ep.scheme + "'");
  }
  const auto rest = url.substr(sep + 3);
  const auto slash = std::find(rest.begin(), rest.end(), '/');
  auto authority = std::string_view(rest.data(), static_cast<std::size_t>(slash - rest.begin()));
  ep.path = slash == rest.end() ? "/" : std::string(slash, rest.end());
  ep.port = ep.scheme == "https" ? 443 : 80;
  if (auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    auto port_text = authority.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), ep.port);
    if (ec != std::errc() || ptr != port_text.data() + port_text.size() || ep.port <= 0 ||
        ep.port > 65535) {
      throw ConfigError("bad port in endpoint_url '" + std::string(url) + "'");
    }
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) throw ConfigError("endpoint_url '" + std::string(url) + "' has no host");
  ep.host = std::string(authority);
  return ep;
}

std::string Endpoint::origin() const {
  return scheme + "://" + host + ":" + std::to_string(port);
}

std::string build_chat_request(const CompletionRequest& request) {
  json body{{"model", request.params.model_id},
            {"messages", json::array({{{"role", "user"}, {"content", request.prompt.final_text}}})},
            {"temperature", request.params.temperature},
            {"max_tokens", request.params.max_tokens}};
  if (!request.params.stop.empty()) body["stop"] = request.params.stop;
  return body.dump();
}

std::string extract_completion_text(std::string_view response_body) {
  json j;
  try {
    j = json::parse(response_body);
  } catch (const json::parse_error& e) {
    throw ProviderError(200, std::string("response is not JSON: ") + e.what());
  }
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    throw ProviderError(200, "response has no choices");
  }
  const auto& first = choices->front();
  if (auto msg = first.find("message"); msg != first.end() && msg->is_object()) {
    if (auto content = msg->find("content"); content != msg->end() && content->is_string()) {
      return content->get<std::string>();
    }
  }
  if (auto t = first.find("text"); t != first.end() && t->is_string()) return t->get<std::string>();
  throw ProviderError(200, "first choice carries no text");
}

HttpProvider::HttpProvider(std::string endpoint_url, std::string api_key,
                           std::chrono::seconds timeout)
    : endpoint_(Endpoint::parse(endpoint_url)), api_key_(std::move(api_key)), timeout_(timeout) {}

std::string HttpProvider::id() const { return "http:" + endpoint_.host; }

std::string HttpProvider::do_call(const CompletionRequest& request) {
  // httplib::Client is not safe to share between threads; one per call.
  auto client = make_client(endpoint_, timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client->Post(endpoint_.path, headers, build_chat_request(request), "application/json");
  if (!res) {
    throw TransportError("request to " + endpoint_.origin() + endpoint_.path +
                         " failed: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 401 || status == 403) throw AuthError("provider rejected credentials: " + error_message(res->body));
  if (status == 429) throw RateLimitError("rate limited: " + error_message(res->body));
  if (status < 200 || status >= 300) throw ProviderError(status, error_message(res->body));
  return extract_completion_text(res->body);
}

bool endpoint_reachable(std::string_view endpoint_url, std::chrono::seconds timeout) {
  const auto ep = Endpoint::parse(endpoint_url);
  auto client = make_client(ep, timeout);
  auto res = client->Get(ep.path);
  return static_cast<bool>(res);
}

}  // namespace kpe::backend
