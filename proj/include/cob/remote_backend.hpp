// Copyright 2026 The cob Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// HTTP client for chat-completions style multimodal endpoints.
//
// Request body (POST to the configured endpoint):
//
//   {"model": "<model>", "temperature": 0, "max_tokens": <n>,
//    "messages": [{"role": "user", "content": [
//        {"type": "image_url",
//         "image_url": {"url": "data:image/png;base64,<...>"}},
//        {"type": "text", "text": "<instruction>"}]}]}
//
// Response: `choices[0].message.content` (a string or a list of text parts)
// and, when present, `usage.prompt_tokens` / `usage.completion_tokens`.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>

#include "cob/backend.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cob::backend {

struct RemoteConfig {
  // scheme://host[:port]/path
  std::string endpoint;
  std::string model;
  // Name of the environment variable holding the API key; empty for none.
  std::string api_key_env;
  int timeout_s = 120;
  int max_in_flight = 4;
  int max_attempts = 3;
  int backoff_initial_ms = 500;
  TokenTable tokens;
};

struct ParsedEndpoint {
  std::string scheme_host_port;
  std::string path;
};

inline ParsedEndpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint '" + url + "' must start with http:// or https://");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported endpoint scheme '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedEndpoint p;
  p.scheme_host_port = url.substr(0, path_start);
  p.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (p.scheme_host_port.size() <= scheme_end + 3) {
    throw ConfigError("endpoint '" + url + "' has no host");
  }
  return p;
}

inline nlohmann::json build_chat_body(const ModelRequest& req, const std::string& model) {
  nlohmann::json content = nlohmann::json::array();
  for (const auto& img : req.images) {
    content.push_back(
        {{"type", "image_url"},
         {"image_url",
          {{"url", "data:image/png;base64," + httplib::detail::base64_encode(img.png)}}}});
  }
  content.push_back({{"type", "text"}, {"text", req.instruction}});
  return {{"model", model},
          {"temperature", 0},
          {"max_tokens", req.decode.max_output_tokens},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})}};
}

class RemoteBackend : public Backend {
 public:
  // Hook for tests: called before each sleep between attempts.
  using SleepFn = std::function<void(std::chrono::milliseconds)>;

  explicit RemoteBackend(RemoteConfig config, SleepFn sleep = {})
      : config_(std::move(config)),
        endpoint_(parse_endpoint(config_.endpoint)),
        slots_(std::max(1, config_.max_in_flight)),
        sleep_(sleep ? std::move(sleep) : [](std::chrono::milliseconds d) {
          std::this_thread::sleep_for(d);
        }) {
    if (config_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    if (config_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (config_.timeout_s < 1) throw ConfigError("timeout must be >= 1 s");
    if (!config_.api_key_env.empty()) {
      if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }
  }

  std::string name() const override { return "remote:" + config_.model; }

  // Total attempts made by the most recent invoke on any thread.
  int last_attempts() const { return last_attempts_.load(); }

  ModelResponse invoke(const ModelRequest& request) override {
    request.validate();
    // The body is built once so every retry sends identical bytes.
    const std::string body = build_chat_body(request, config_.model).dump();
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    slots_.acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{slots_};

    std::string last_error;
    int attempt = 0;
    for (attempt = 1; attempt <= config_.max_attempts; ++attempt) {
      last_attempts_ = attempt;
      httplib::Client client(endpoint_.scheme_host_port);
      client.set_connection_timeout(std::chrono::seconds(config_.timeout_s));
      client.set_read_timeout(std::chrono::seconds(config_.timeout_s));
      client.set_write_timeout(std::chrono::seconds(config_.timeout_s));
      auto res = client.Post(endpoint_.path, headers, body, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
      } else if (res->status == 200) {
        return parse_response(request, res->body);
      } else if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
      } else if (refuses_images(res->status, res->body)) {
        throw CapabilityError("endpoint refused the image payload (HTTP " +
                              std::to_string(res->status) + "): " + res->body);
      } else {
        throw BackendError("endpoint returned HTTP " + std::to_string(res->status) +
                           ": " + res->body);
      }
      if (attempt < config_.max_attempts) {
        sleep_(std::chrono::milliseconds(
            static_cast<long long>(config_.backoff_initial_ms) << (attempt - 1)));
      }
    }
    throw BackendUnavailableError(last_error, config_.max_attempts);
  }

 private:
  static bool refuses_images(int status, const std::string& body) {
    if (status == 413 || status == 415) return true;
    if (status == 400 || status == 422) {
      std::string lower = body;
      std::transform(lower.begin(), lower.end(), lower.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      return lower.find("image") != std::string::npos;
    }
    return false;
  }

  ModelResponse parse_response(const ModelRequest& request, const std::string& body) const {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw BackendError(std::string("endpoint returned invalid JSON: ") + e.what());
    }
    ModelResponse r;
    try {
      const auto& content = j.at("choices").at(0).at("message").at("content");
      if (content.is_string()) {
        r.text = content.get<std::string>();
      } else if (content.is_array()) {
        for (const auto& part : content) {
          if (part.value("type", "") == "text") r.text += part.value("text", "");
        }
      } else {
        throw BackendError("response content is neither text nor parts");
      }
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("unexpected response shape: ") + e.what());
    }
    r.image_token_count = estimate_image_tokens(request, config_.tokens);
    r.image_tokens_estimated = true;
    const auto usage = j.find("usage");
    if (usage != j.end() && usage->is_object() && usage->contains("prompt_tokens") &&
        usage->contains("completion_tokens")) {
      // Reported prompt usage includes the images; keep the text share.
      r.prompt_token_count = std::max<std::int64_t>(
          0, (*usage)["prompt_tokens"].get<std::int64_t>() - r.image_token_count);
      r.output_token_count = (*usage)["completion_tokens"].get<std::int64_t>();
      r.tokens_estimated = false;
    } else {
      r.prompt_token_count = estimate_text_tokens(request.instruction);
      r.output_token_count = estimate_text_tokens(r.text);
      r.tokens_estimated = true;
    }
    return r;
  }

  RemoteConfig config_;
  ParsedEndpoint endpoint_;
  std::counting_semaphore<1024> slots_;
  SleepFn sleep_;
  std::string api_key_;
  std::atomic<int> last_attempts_{0};
};

}  // namespace cob::backend
