#pragma once

// Chat-completions style HTTP provider:
//   POST {model, messages:[{role:"user", content}], temperature, max_tokens[, stop]}
// and the text of the first choice is the completion.

#include <chrono>
#include <string>
#include <string_view>

#include "kpe/backend.hpp"

namespace kpe::backend {

struct Endpoint {
  std::string scheme;  // http or https
  std::string host;
  int port = 0;
  std::string path;

  /// Throws ConfigError for anything but http(s)://host[:port][/path].
  static Endpoint parse(std::string_view url);
  std::string origin() const;
};

std::string build_chat_request(const CompletionRequest& request);
/// choices[0].message.content, falling back to choices[0].text. Throws
/// ProviderError when neither is present.
std::string extract_completion_text(std::string_view response_body);

class HttpProvider : public CompletionProvider {
 public:
  HttpProvider(std::string endpoint_url, std::string api_key,
               std::chrono::seconds timeout = std::chrono::seconds(120));

  std::string id() const override;

 protected:
  std::string do_call(const CompletionRequest& request) override;

 private:
  Endpoint endpoint_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

/// True when a TCP (and TLS, for https) connection to the endpoint succeeds
/// and it answers any HTTP status.
bool endpoint_reachable(std::string_view endpoint_url,
                        std::chrono::seconds timeout = std::chrono::seconds(5));

}  // namespace kpe::backend
