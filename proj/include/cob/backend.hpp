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

// The multimodal model contract and its in-process implementations.

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/sha.h>

#include "cob/error.hpp"
#include "cob/image.hpp"
#include "cob/render.hpp"
#include "json.hpp"

namespace cob::backend {

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : digest) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 0xF]);
  }
  return out;
}

struct RequestImage {
  std::string png;
  int width = 0;
  int height = 0;
  // Free-form role tag recorded in traces ("original", "s1_overlay", ...).
  std::string label;

  std::string fingerprint() const { return sha256_hex(png); }

  static RequestImage from_prompted(const render::PromptedImage& p) {
    return {p.png, p.width, p.height, render::role_name(p.role)};
  }
  static RequestImage from_raster(const Image& img, std::string label = "original") {
    return {encode_png(img), img.width, img.height, std::move(label)};
  }
};

struct DecodeParams {
  // Sampling is always disabled; anything else is rejected.
  double temperature = 0.0;
  int max_output_tokens = 512;
};

struct ModelRequest {
  std::vector<RequestImage> images;
  std::string instruction;
  DecodeParams decode;

  void validate() const {
    if (images.empty()) throw ParameterError("model request needs at least one image");
    if (instruction.empty()) throw ParameterError("model request instruction is empty");
    if (decode.temperature != 0.0) throw ParameterError("temperature is pinned to 0");
    if (decode.max_output_tokens <= 0) {
      throw ParameterError("max_output_tokens must be positive");
    }
  }
};

struct ModelResponse {
  std::string text;
  std::int64_t prompt_token_count = 0;
  std::int64_t output_token_count = 0;
  std::int64_t image_token_count = 0;
  // True when the text counts were not reported by the endpoint.
  bool tokens_estimated = true;
  // Image tokens are always derived from the tile table.
  bool image_tokens_estimated = true;
  friend bool operator==(const ModelResponse&, const ModelResponse&) = default;
};

// Per-backend image token model: an image costs `base_tokens` plus
// `tokens_per_tile` for each tile_px x tile_px tile needed to cover it.
struct TokenTable {
  int tile_px = 448;
  int tokens_per_tile = 256;
  int base_tokens = 0;

  std::int64_t image_tokens(int width, int height) const {
    const std::int64_t tx = (width + tile_px - 1) / tile_px;
    const std::int64_t ty = (height + tile_px - 1) / tile_px;
    return base_tokens + tx * ty * tokens_per_tile;
  }
};

// Text tokens approximated as one per four UTF-8 bytes, rounded up.
inline std::int64_t estimate_text_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

inline std::int64_t estimate_image_tokens(const ModelRequest& req,
                                          const TokenTable& table) {
  std::int64_t total = 0;
  for (const auto& img : req.images) total += table.image_tokens(img.width, img.height);
  return total;
}

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ModelResponse invoke(const ModelRequest& request) = 0;
  virtual std::string name() const = 0;
};

// --- scripted mock ----------------------------------------------------------

struct ScriptRule {
  // Empty pattern matches every instruction.
  std::string pattern;
  bool is_regex = false;
  // Empty or "*" matches any image; otherwise a hex prefix of the SHA-256
  // of one of the request images.
  std::string image;
  std::string response;

  bool is_catch_all() const {
    return pattern.empty() && (image.empty() || image == "*");
  }
};

// Behaviour file:
//   {"rules": [{"contains": "Which red box", "response": "<box>3</box>"},
//              {"regex": "^How many.*", "image": "3fa2c1", "response": "2"},
//              {"response": "UNKNOWN"}]}
// Rules are tried in order; the first match answers. A catch-all rule (no
// pattern, any image) is mandatory.
class ScriptedBehavior {
 public:
  explicit ScriptedBehavior(std::vector<ScriptRule> rules) : rules_(std::move(rules)) {
    bool has_catch_all = false;
    for (const auto& r : rules_) {
      has_catch_all = has_catch_all || r.is_catch_all();
      compiled_.push_back(r.is_regex ? std::optional<std::regex>(std::regex(r.pattern))
                                     : std::nullopt);
    }
    if (!has_catch_all) throw ConfigError("scripted behavior needs a catch-all rule");
  }

  static ScriptedBehavior from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("rules") || !j["rules"].is_array()) {
      throw ConfigError("behavior file must be an object with a 'rules' array");
    }
    std::vector<ScriptRule> rules;
    for (const auto& r : j["rules"]) {
      ScriptRule rule;
      if (r.contains("contains") && r.contains("regex")) {
        throw ConfigError("rule cannot have both 'contains' and 'regex'");
      }
      if (r.contains("contains")) rule.pattern = r["contains"].get<std::string>();
      if (r.contains("regex")) {
        rule.pattern = r["regex"].get<std::string>();
        rule.is_regex = true;
      }
      rule.image = r.value("image", std::string("*"));
      if (!r.contains("response") || !r["response"].is_string()) {
        throw ConfigError("every rule needs a string 'response'");
      }
      rule.response = r["response"].get<std::string>();
      rules.push_back(std::move(rule));
    }
    try {
      return ScriptedBehavior(std::move(rules));
    } catch (const std::regex_error& e) {
      throw ConfigError(std::string("bad rule regex: ") + e.what());
    }
  }

  static ScriptedBehavior from_file(const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(path + ": " + e.what());
    }
    return from_json(j);
  }

  const std::string& respond(const ModelRequest& req) const {
    std::vector<std::string> prints;
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      const auto& r = rules_[i];
      if (!r.image.empty() && r.image != "*") {
        if (prints.empty()) {
          for (const auto& img : req.images) prints.push_back(img.fingerprint());
        }
        bool hit = false;
        for (const auto& p : prints) hit = hit || p.rfind(r.image, 0) == 0;
        if (!hit) continue;
      }
      if (!r.pattern.empty()) {
        const bool ok = r.is_regex ? std::regex_search(req.instruction, *compiled_[i])
                                   : req.instruction.find(r.pattern) != std::string::npos;
        if (!ok) continue;
      }
      return r.response;
    }
    // Unreachable: the constructor guarantees a catch-all.
    return rules_.back().response;
  }

 private:
  std::vector<ScriptRule> rules_;
  std::vector<std::optional<std::regex>> compiled_;
};

// Deterministic offline backend. Token counts use the estimators, so the
// same request always yields the same response.
class MockBackend : public Backend {
 public:
  explicit MockBackend(ScriptedBehavior behavior, TokenTable table = {})
      : behavior_(std::move(behavior)), table_(table) {}

  ModelResponse invoke(const ModelRequest& request) override {
    request.validate();
    ++calls_;
    ModelResponse r;
    r.text = behavior_.respond(request);
    r.prompt_token_count = estimate_text_tokens(request.instruction);
    r.output_token_count = estimate_text_tokens(r.text);
    r.image_token_count = estimate_image_tokens(request, table_);
    r.tokens_estimated = true;
    r.image_tokens_estimated = true;
    return r;
  }
  std::string name() const override { return "mock"; }
  std::size_t calls() const { return calls_.load(); }

 private:
  ScriptedBehavior behavior_;
  TokenTable table_;
  std::atomic<std::size_t> calls_{0};
};

// Forwards to another backend and reports every completed call, numbered
// from 0 in completion order.
class LoggingBackend : public Backend {
 public:
  using Sink = std::function<void(std::size_t call_index, const ModelRequest&,
                                  const ModelResponse&)>;

  LoggingBackend(Backend& inner, Sink sink) : inner_(inner), sink_(std::move(sink)) {}

  ModelResponse invoke(const ModelRequest& request) override {
    ModelResponse r = inner_.invoke(request);
    std::lock_guard lock(mu_);
    sink_(next_index_++, request, r);
    return r;
  }
  std::string name() const override { return inner_.name(); }

 private:
  Backend& inner_;
  Sink sink_;
  std::mutex mu_;
  std::size_t next_index_ = 0;
};

}  // namespace cob::backend
