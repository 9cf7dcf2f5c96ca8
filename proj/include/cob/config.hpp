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

// Pipeline configuration. See docs/config.md for the file format. Relative
// paths are resolved against the directory holding the config file.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "cob/backend.hpp"
#include "cob/error.hpp"
#include "cob/eval.hpp"
#include "cob/image.hpp"
#include "cob/remote_backend.hpp"
#include "cob/render.hpp"
#include "json.hpp"

namespace cob::config {

namespace fs = std::filesystem;

struct DatasetEntry {
  // QA interchange file for this dataset.
  std::string qa;
  // Split assigned to records generated from it.
  std::string split = "train";
  std::optional<eval::DateOrder> date_order;
  eval::FieldTable fields;
};

struct BackendSettings {
  // "mock" or "remote".
  std::string kind = "mock";
  std::string behavior;
  backend::RemoteConfig remote;
  backend::TokenTable tokens;
};

struct PipelineConfig {
  std::string source;
  fs::path base_dir;
  std::string images_dir;
  std::string layouts_dir;
  std::string datasets_dir;
  std::string outputs_dir;
  std::map<std::string, DatasetEntry> datasets;
  BackendSettings backend;
  // Falls back to `backend` when the file has no "annotator" section.
  BackendSettings annotator;
  render::StyleSpec style;
  int k_max = 8;
  std::string fallback = "vanilla";
  int max_output_tokens = 512;
  int annotator_max_output_tokens = 2048;
  eval::AnlsOptions anls;
  eval::DateOrder date_order = eval::DateOrder::kMonthFirst;
  std::string service_host = "127.0.0.1";
  int service_port = 8080;
  std::string service_token;
  int box_id_cap = 5;
  std::uint64_t seed = 0;
  int workers = 1;

  const DatasetEntry& dataset(const std::string& tag) const {
    const auto it = datasets.find(tag);
    if (it == datasets.end()) throw ConfigError("dataset '" + tag + "' is not in the registry");
    return it->second;
  }

  // First existing `{images_dir}/{id}.{png,jpg,jpeg}`.
  std::string image_path(const std::string& image_id) const {
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
      const fs::path p = fs::path(images_dir) / (image_id + ext);
      if (fs::exists(p)) return p.string();
    }
    throw FormatError(images_dir, 0, "no image file for '" + image_id + "'");
  }

  std::string layout_path(const std::string& image_id) const {
    return (fs::path(layouts_dir) / (image_id + ".jsonl")).string();
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::string& where,
                       std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
T get(const nlohmann::json& obj, const std::string& key, const std::string& where, T fallback) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  try {
    return obj[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

inline std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

inline BackendSettings parse_backend(const nlohmann::json& j, const std::string& where,
                                     const fs::path& base) {
  check_keys(j, where, {"kind", "behavior", "tokens", "remote"});
  BackendSettings b;
  b.kind = get<std::string>(j, "kind", where, "mock");
  if (b.kind != "mock" && b.kind != "remote") {
    throw ConfigError(where + ".kind must be 'mock' or 'remote'");
  }
  b.behavior = resolve(base, get<std::string>(j, "behavior", where, ""));
  if (j.contains("tokens")) {
    const auto& t = j["tokens"];
    check_keys(t, where + ".tokens", {"tile_px", "tokens_per_tile", "base_tokens"});
    b.tokens.tile_px = get<int>(t, "tile_px", where, 448);
    b.tokens.tokens_per_tile = get<int>(t, "tokens_per_tile", where, 256);
    b.tokens.base_tokens = get<int>(t, "base_tokens", where, 0);
    if (b.tokens.tile_px < 1 || b.tokens.tokens_per_tile < 0 || b.tokens.base_tokens < 0) {
      throw ConfigError(where + ".tokens values must be positive");
    }
  }
  if (j.contains("remote")) {
    const auto& r = j["remote"];
    const std::string w = where + ".remote";
    check_keys(r, w, {"endpoint", "model", "api_key_env", "timeout_s", "max_in_flight",
                      "max_attempts", "backoff_initial_ms"});
    b.remote.endpoint = get<std::string>(r, "endpoint", w, "");
    b.remote.model = get<std::string>(r, "model", w, "");
    b.remote.api_key_env = get<std::string>(r, "api_key_env", w, "");
    b.remote.timeout_s = get<int>(r, "timeout_s", w, 120);
    b.remote.max_in_flight = get<int>(r, "max_in_flight", w, 4);
    b.remote.max_attempts = get<int>(r, "max_attempts", w, 3);
    b.remote.backoff_initial_ms = get<int>(r, "backoff_initial_ms", w, 500);
  }
  b.remote.tokens = b.tokens;
  return b;
}

inline nlohmann::json backend_json(const BackendSettings& b) {
  return {{"kind", b.kind},
          {"behavior", b.behavior},
          {"tokens",
           {{"tile_px", b.tokens.tile_px},
            {"tokens_per_tile", b.tokens.tokens_per_tile},
            {"base_tokens", b.tokens.base_tokens}}},
          {"remote",
           {{"endpoint", b.remote.endpoint},
            {"model", b.remote.model},
            {"api_key_env", b.remote.api_key_env},
            {"timeout_s", b.remote.timeout_s},
            {"max_in_flight", b.remote.max_in_flight},
            {"max_attempts", b.remote.max_attempts},
            {"backoff_initial_ms", b.remote.backoff_initial_ms}}}};
}

}  // namespace detail

inline PipelineConfig parse_config(const nlohmann::json& j, const fs::path& base_dir,
                                   std::string source = "<config>") {
  using detail::get;
  detail::check_keys(j, "config",
                     {"paths", "datasets", "backend", "annotator", "render", "orchestrator",
                      "eval", "service", "enabling", "seed", "workers"});
  PipelineConfig c;
  c.source = std::move(source);
  c.base_dir = base_dir;
  const auto paths = j.value("paths", nlohmann::json::object());
  detail::check_keys(paths, "paths", {"images", "layouts", "datasets", "outputs"});
  c.images_dir = detail::resolve(base_dir, get<std::string>(paths, "images", "paths", "images"));
  c.layouts_dir = detail::resolve(base_dir, get<std::string>(paths, "layouts", "paths", "layouts"));
  c.datasets_dir =
      detail::resolve(base_dir, get<std::string>(paths, "datasets", "paths", "datasets"));
  c.outputs_dir = detail::resolve(base_dir, get<std::string>(paths, "outputs", "paths", "out"));

  const auto datasets = j.value("datasets", nlohmann::json::object());
  if (!datasets.is_object()) throw ConfigError("datasets must be an object");
  for (const auto& [tag, d] : datasets.items()) {
    const std::string w = "datasets." + tag;
    detail::check_keys(d, w, {"qa", "split", "date_order", "fields"});
    DatasetEntry e;
    e.qa = detail::resolve(base_dir, get<std::string>(d, "qa", w, ""));
    if (e.qa.empty()) throw ConfigError(w + ".qa is required");
    e.split = get<std::string>(d, "split", w, "train");
    if (d.contains("date_order")) e.date_order = eval::parse_date_order(d["date_order"].get<std::string>());
    if (d.contains("fields")) e.fields = eval::FieldTable::from_json(d["fields"]);
    c.datasets[tag] = std::move(e);
  }

  c.backend = detail::parse_backend(j.value("backend", nlohmann::json::object()), "backend", base_dir);
  c.annotator = j.contains("annotator")
                    ? detail::parse_backend(j["annotator"], "annotator", base_dir)
                    : c.backend;

  const auto r = j.value("render", nlohmann::json::object());
  detail::check_keys(r, "render", {"border_color", "border_thickness", "label_font_px", "blur_sigma"});
  if (r.contains("border_color") && !r["border_color"].is_null()) {
    const auto& col = r["border_color"];
    if (!col.is_array() || col.size() != 3) throw ConfigError("render.border_color must be [r, g, b]");
    Rgb rgb;
    int v[3];
    for (int i = 0; i < 3; ++i) {
      v[i] = col[static_cast<std::size_t>(i)].get<int>();
      if (v[i] < 0 || v[i] > 255) throw ConfigError("render.border_color components must be 0..255");
    }
    rgb = {static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]),
           static_cast<std::uint8_t>(v[2])};
    c.style.border_color = rgb;
  }
  if (r.contains("border_thickness") && !r["border_thickness"].is_null()) {
    c.style.border_thickness = r["border_thickness"].get<int>();
  }
  if (r.contains("label_font_px") && !r["label_font_px"].is_null()) {
    c.style.label_font_px = r["label_font_px"].get<int>();
  }
  if (r.contains("blur_sigma") && !r["blur_sigma"].is_null()) {
    c.style.blur_sigma = r["blur_sigma"].get<double>();
  }
  try {
    render::resolve_style(c.style, 1000, 1000);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("render: ") + e.what());
  }

  const auto o = j.value("orchestrator", nlohmann::json::object());
  detail::check_keys(o, "orchestrator", {"k_max", "fallback", "max_output_tokens",
                                         "annotator_max_output_tokens"});
  c.k_max = get<int>(o, "k_max", "orchestrator", 8);
  c.fallback = get<std::string>(o, "fallback", "orchestrator", "vanilla");
  c.max_output_tokens = get<int>(o, "max_output_tokens", "orchestrator", 512);
  c.annotator_max_output_tokens = get<int>(o, "annotator_max_output_tokens", "orchestrator", 2048);
  if (c.k_max < 1) throw ConfigError("orchestrator.k_max must be >= 1");
  if (c.fallback != "vanilla") throw ConfigError("orchestrator.fallback supports only 'vanilla'");
  if (c.max_output_tokens < 1 || c.annotator_max_output_tokens < 1) {
    throw ConfigError("max_output_tokens must be >= 1");
  }

  const auto ev = j.value("eval", nlohmann::json::object());
  detail::check_keys(ev, "eval", {"tau", "case_insensitive", "date_order"});
  c.anls.tau = get<double>(ev, "tau", "eval", 0.5);
  c.anls.case_insensitive = get<bool>(ev, "case_insensitive", "eval", true);
  if (!(c.anls.tau > 0.0 && c.anls.tau <= 1.0)) throw ConfigError("eval.tau must be in (0, 1]");
  c.date_order = eval::parse_date_order(get<std::string>(ev, "date_order", "eval", "mdy"));

  const auto s = j.value("service", nlohmann::json::object());
  detail::check_keys(s, "service", {"host", "port", "token"});
  c.service_host = get<std::string>(s, "host", "service", "127.0.0.1");
  c.service_port = get<int>(s, "port", "service", 8080);
  c.service_token = get<std::string>(s, "token", "service", "");
  if (c.service_port < 0 || c.service_port > 65535) throw ConfigError("service.port out of range");

  const auto en = j.value("enabling", nlohmann::json::object());
  detail::check_keys(en, "enabling", {"box_id_cap"});
  c.box_id_cap = get<int>(en, "box_id_cap", "enabling", 5);
  if (c.box_id_cap < 1) throw ConfigError("enabling.box_id_cap must be >= 1");

  c.seed = get<std::uint64_t>(j, "seed", "config", 0);
  c.workers = get<int>(j, "workers", "config", 1);
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::string content;
  try {
    content = read_file_bytes(path);
  } catch (const FormatError&) {
    throw ConfigError("cannot read config file " + path);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  const fs::path base = fs::absolute(path).parent_path();
  try {
    return parse_config(j, base, path);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// The resolved configuration, for logging.
inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json ds = nlohmann::json::object();
  for (const auto& [tag, d] : c.datasets) {
    ds[tag] = {{"qa", d.qa}, {"split", d.split}};
    if (d.date_order) ds[tag]["date_order"] = *d.date_order == eval::DateOrder::kMonthFirst ? "mdy" : "dmy";
  }
  auto opt_json = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json color = nullptr;
  if (c.style.border_color) {
    color = {c.style.border_color->r, c.style.border_color->g, c.style.border_color->b};
  }
  return {{"source", c.source},
          {"paths",
           {{"images", c.images_dir},
            {"layouts", c.layouts_dir},
            {"datasets", c.datasets_dir},
            {"outputs", c.outputs_dir}}},
          {"datasets", ds},
          {"backend", detail::backend_json(c.backend)},
          {"annotator", detail::backend_json(c.annotator)},
          {"render",
           {{"border_color", color},
            {"border_thickness", opt_json(c.style.border_thickness)},
            {"label_font_px", opt_json(c.style.label_font_px)},
            {"blur_sigma", opt_json(c.style.blur_sigma)}}},
          {"orchestrator",
           {{"k_max", c.k_max},
            {"fallback", c.fallback},
            {"max_output_tokens", c.max_output_tokens},
            {"annotator_max_output_tokens", c.annotator_max_output_tokens}}},
          {"eval",
           {{"tau", c.anls.tau},
            {"case_insensitive", c.anls.case_insensitive},
            {"date_order", c.date_order == eval::DateOrder::kMonthFirst ? "mdy" : "dmy"}}},
          {"service",
           {{"host", c.service_host},
            {"port", c.service_port},
            {"token", c.service_token.empty() ? "" : "<set>"}}},
          {"enabling", {{"box_id_cap", c.box_id_cap}}},
          {"seed", c.seed},
          {"workers", c.workers}};
}

// Builds the backend described by `b`.
inline std::unique_ptr<backend::Backend> make_backend(const BackendSettings& b) {
  if (b.kind == "mock") {
    if (b.behavior.empty()) throw ConfigError("mock backend needs a behavior file");
    return std::make_unique<backend::MockBackend>(backend::ScriptedBehavior::from_file(b.behavior),
                                                  b.tokens);
  }
  if (b.remote.endpoint.empty() || b.remote.model.empty()) {
    throw ConfigError("remote backend needs endpoint and model");
  }
  return std::make_unique<backend::RemoteBackend>(b.remote);
}

}  // namespace cob::config
