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

// Two-stage chain-of-box inference.
//
//   1. Key box selection: the model sees every layout box outlined and
//      numbered and names the boxes that hold the answer.
//   2. Focused answering: the model sees the page blurred everywhere except
//      the selected boxes and answers the question.
//
// When selection yields nothing usable (or the page has no boxes) the
// question is answered directly from the unmodified image instead.

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cob/backend.hpp"
#include "cob/error.hpp"
#include "cob/image.hpp"
#include "cob/layout.hpp"
#include "cob/render.hpp"
#include "cob/text.hpp"
#include "json.hpp"

namespace cob::orchestrator {

using backend::Backend;
using backend::ModelRequest;
using backend::ModelResponse;
using layout::LayoutSet;

inline constexpr int kDefaultMaxKeyBoxes = 8;
inline constexpr std::string_view kShortAnswerSuffix =
    "Answer the question using a single word or phrase.";

inline std::string build_s1_prompt(std::string_view question) {
  if (question.empty()) throw ParameterError("question must be non-empty");
  std::string out =
      "Which red box in the given image contains the answer to the following "
      "question: ";
  out += question;
  out += "? Use the box ID near the red box to answer the question.";
  return out;
}

inline std::string build_vanilla_prompt(std::string_view question) {
  if (question.empty()) throw ParameterError("question must be non-empty");
  std::string out(question);
  out += ' ';
  out += kShortAnswerSuffix;
  return out;
}

struct KeyBoxSelection {
  std::vector<int> ids;
  std::string raw_text;
  std::vector<std::string> parse_notes;

  bool empty() const { return ids.empty(); }
};

namespace detail {

inline bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_alnum(char c) { return is_alpha(c) || is_digit(c); }

inline bool match_word_ci(std::string_view s, std::size_t pos, std::string_view word) {
  if (pos + word.size() > s.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    char c = s[pos + i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != word[i]) return false;
  }
  return true;
}

inline std::size_t skip_space(std::string_view s, std::size_t pos) {
  while (pos < s.size() && text::is_space(s[pos])) ++pos;
  return pos;
}

// Consumes a digit run at `pos`; returns the end position or npos.
inline std::size_t read_digits(std::string_view s, std::size_t pos, std::string& out) {
  const std::size_t start = pos;
  while (pos < s.size() && is_digit(s[pos])) ++pos;
  if (pos == start) return std::string_view::npos;
  out.assign(s.substr(start, pos - start));
  return pos;
}

// Word `w` at `pos` not followed by a letter.
inline std::size_t read_word(std::string_view s, std::size_t pos, std::string_view w) {
  if (!match_word_ci(s, pos, w)) return std::string_view::npos;
  const std::size_t end = pos + w.size();
  if (end < s.size() && is_alpha(s[end])) return std::string_view::npos;
  return end;
}

// <box>n</box>
inline std::vector<std::string> tagged_ids(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = pos < s.size() ? pos : s.size()) < s.size()) {
    if (!match_word_ci(s, pos, "<box>")) {
      ++pos;
      continue;
    }
    std::size_t p = skip_space(s, pos + 5);
    std::string num;
    const std::size_t end = read_digits(s, p, num);
    if (end != std::string_view::npos) {
      const std::size_t q = skip_space(s, end);
      if (match_word_ci(s, q, "</box>")) {
        out.push_back(num);
        pos = q + 6;
        continue;
      }
    }
    ++pos;
  }
  return out;
}

// "box 3", "Box #3", "box id: 3", "boxes 3, 5 and 6", "boxes 2/4 or 7".
inline std::vector<std::string> phrased_ids(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const bool boundary = pos == 0 || !is_alnum(s[pos - 1]);
    if (!boundary || !match_word_ci(s, pos, "box")) {
      ++pos;
      continue;
    }
    std::size_t p = pos + 3;
    if (match_word_ci(s, p, "es")) {
      p += 2;
    } else if (match_word_ci(s, p, "s")) {
      p += 1;
    }
    if (p < s.size() && is_alpha(s[p])) {
      pos = p;
      continue;
    }
    p = skip_space(s, p);
    if (std::size_t e = read_word(s, p, "ids"); e != std::string_view::npos) {
      p = skip_space(s, e);
    } else if (std::size_t e2 = read_word(s, p, "id"); e2 != std::string_view::npos) {
      p = skip_space(s, e2);
    }
    if (p < s.size() && (s[p] == '#' || s[p] == ':')) ++p;
    p = skip_space(s, p);
    std::string num;
    std::size_t end = read_digits(s, p, num);
    if (end == std::string_view::npos) {
      pos += 3;
      continue;
    }
    out.push_back(num);
    pos = end;
    // List continuation.
    for (;;) {
      std::size_t q = skip_space(s, pos);
      bool sep = false;
      if (q < s.size() && s[q] == ',') {
        q = skip_space(s, q + 1);
        if (std::size_t e = read_word(s, q, "and"); e != std::string_view::npos) {
          q = skip_space(s, e);
        } else if (std::size_t e2 = read_word(s, q, "or"); e2 != std::string_view::npos) {
          q = skip_space(s, e2);
        }
        sep = true;
      } else if (q < s.size() && (s[q] == '&' || s[q] == '/')) {
        q = skip_space(s, q + 1);
        sep = true;
      } else if (std::size_t e = read_word(s, q, "and"); e != std::string_view::npos) {
        q = skip_space(s, e);
        sep = true;
      } else if (std::size_t e2 = read_word(s, q, "or"); e2 != std::string_view::npos) {
        q = skip_space(s, e2);
        sep = true;
      }
      if (!sep) break;
      if (q < s.size() && s[q] == '#') ++q;
      std::string next;
      const std::size_t e = read_digits(s, q, next);
      if (e == std::string_view::npos) break;
      out.push_back(next);
      pos = e;
    }
  }
  return out;
}

inline std::vector<std::string> bare_ids(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::string num;
    const std::size_t e = read_digits(s, pos, num);
    if (e == std::string_view::npos) {
      ++pos;
      continue;
    }
    out.push_back(num);
    pos = e;
  }
  return out;
}

}  // namespace detail

// Extracts selected box ids from a stage-one reply. The first of these
// forms that occurs in the text is used exclusively:
//   1. <box>n</box> markers
//   2. "box n" phrases, including lists such as "boxes 3, 5 and 6"
//   3. any bare integers
// Ids are deduplicated (first occurrence kept), ids outside 1..N are dropped,
// and the result is truncated to `k_max`; each adjustment leaves a note.
inline KeyBoxSelection parse_box_ids(std::string_view raw, std::size_t box_count,
                                     int k_max = kDefaultMaxKeyBoxes) {
  if (k_max < 1) throw ParameterError("k_max must be >= 1");
  KeyBoxSelection sel;
  sel.raw_text = std::string(raw);
  auto tokens = detail::tagged_ids(raw);
  if (tokens.empty()) tokens = detail::phrased_ids(raw);
  if (tokens.empty()) tokens = detail::bare_ids(raw);
  std::set<int> seen;
  for (const auto& t : tokens) {
    const auto first_nonzero = t.find_first_not_of('0');
    const bool too_long =
        first_nonzero != std::string::npos && t.size() - first_nonzero > 9;
    const long v = too_long ? -1 : std::stol(t);
    if (too_long || v < 1 || static_cast<std::size_t>(v) > box_count) {
      sel.parse_notes.push_back("dropped out-of-range id " + t);
      continue;
    }
    const int id = static_cast<int>(v);
    if (!seen.insert(id).second) {
      sel.parse_notes.push_back("dropped duplicate id " + std::to_string(id));
      continue;
    }
    sel.ids.push_back(id);
  }
  if (static_cast<int>(sel.ids.size()) > k_max) {
    sel.parse_notes.push_back("truncated " + std::to_string(sel.ids.size()) +
                              " ids to k_max=" + std::to_string(k_max));
    sel.ids.resize(static_cast<std::size_t>(k_max));
  }
  return sel;
}

inline KeyBoxSelection parse_box_ids(std::string_view raw, const LayoutSet& set,
                                     int k_max = kDefaultMaxKeyBoxes) {
  return parse_box_ids(raw, set.size(), k_max);
}

inline std::string build_s2_prompt(std::string_view question,
                                   const KeyBoxSelection& selection,
                                   const LayoutSet& set) {
  if (selection.empty()) throw ParameterError("selection must be non-empty");
  std::string ids;
  std::string boxes;
  for (std::size_t i = 0; i < selection.ids.size(); ++i) {
    const int id = selection.ids[i];
    if (!set.has_id(id)) throw ParameterError("selected id not in layout");
    const auto& b = set.box(id).bbox;
    if (i) {
      ids += ", ";
      boxes += ", ";
    }
    ids += std::to_string(id);
    boxes += "[" + std::to_string(b.x) + ", " + std::to_string(b.y) + ", " +
             std::to_string(b.w) + ", " + std::to_string(b.h) + "]";
  }
  std::string out(question);
  out += " The key regions are boxes " + ids + " at " + boxes +
         ". Please pay more attention to the red boxes. ";
  out += kShortAnswerSuffix;
  return out;
}

// --- traces -----------------------------------------------------------------

enum class Mode { kDocCob, kVanillaQa };

inline const char* mode_name(Mode m) { return m == Mode::kDocCob ? "doc_cob" : "vanilla_qa"; }

struct ImageRef {
  std::string label;
  std::string fingerprint;
  int width = 0;
  int height = 0;
};

struct CallRecord {
  std::string instruction;
  std::vector<ImageRef> images;
  ModelResponse response;
};

struct InferenceTrace {
  std::string sample_id;
  std::string question;
  Mode mode = Mode::kDocCob;
  std::optional<CallRecord> s1;
  std::optional<KeyBoxSelection> selection;
  std::optional<CallRecord> s2;
  // The direct-answer call, in vanilla mode or after a fallback.
  std::optional<CallRecord> vanilla;
  std::optional<std::string> fallback_reason;
  std::string answer;
  std::int64_t total_prompt_tokens = 0;
  std::int64_t total_image_tokens = 0;
  std::int64_t total_output_tokens = 0;
  std::int64_t wall_time_ms = 0;

  std::vector<const CallRecord*> calls() const {
    std::vector<const CallRecord*> out;
    for (const auto* c : {&s1, &s2, &vanilla}) {
      if (c->has_value()) out.push_back(&**c);
    }
    return out;
  }
};

struct InferenceOptions {
  int k_max = kDefaultMaxKeyBoxes;
  int max_output_tokens = 512;
  // Millisecond clock for wall_time_ms; steady_clock when unset.
  std::function<std::int64_t()> clock_ms;
};

namespace detail {

inline std::int64_t now_ms(const InferenceOptions& opt) {
  if (opt.clock_ms) return opt.clock_ms();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

inline CallRecord call(Backend& backend, backend::RequestImage image,
                       std::string instruction, const InferenceOptions& opt) {
  ModelRequest req;
  req.instruction = std::move(instruction);
  req.decode.max_output_tokens = opt.max_output_tokens;
  req.images.push_back(std::move(image));
  CallRecord rec;
  rec.response = backend.invoke(req);
  rec.instruction = req.instruction;
  for (const auto& img : req.images) {
    rec.images.push_back({img.label, img.fingerprint(), img.width, img.height});
  }
  return rec;
}

inline void finalize(InferenceTrace& t, std::int64_t started, const InferenceOptions& opt) {
  for (const auto* c : t.calls()) {
    t.total_prompt_tokens += c->response.prompt_token_count;
    t.total_image_tokens += c->response.image_token_count;
    t.total_output_tokens += c->response.output_token_count;
  }
  t.wall_time_ms = now_ms(opt) - started;
}

}  // namespace detail

inline InferenceTrace infer_vanilla(const Image& image, std::string_view question,
                                    Backend& backend, const InferenceOptions& opt = {},
                                    std::string sample_id = {}) {
  const auto started = detail::now_ms(opt);
  InferenceTrace t;
  t.sample_id = std::move(sample_id);
  t.question = std::string(question);
  t.mode = Mode::kVanillaQa;
  t.vanilla = detail::call(backend, backend::RequestImage::from_raster(image),
                           build_vanilla_prompt(question), opt);
  t.answer = std::string(text::trim(t.vanilla->response.text));
  detail::finalize(t, started, opt);
  return t;
}

inline InferenceTrace infer_doc_cob(const Image& image, const LayoutSet& set,
                                    std::string_view question, Backend& backend,
                                    const render::RenderStyle& style,
                                    const InferenceOptions& opt = {},
                                    std::string sample_id = {}) {
  render::check_binding(image, set);
  const auto started = detail::now_ms(opt);
  InferenceTrace t;
  t.sample_id = std::move(sample_id);
  t.question = std::string(question);
  t.mode = Mode::kDocCob;

  auto fall_back = [&](std::string reason) {
    t.fallback_reason = std::move(reason);
    t.vanilla = detail::call(backend, backend::RequestImage::from_raster(image),
                             build_vanilla_prompt(question), opt);
    t.answer = std::string(text::trim(t.vanilla->response.text));
    detail::finalize(t, started, opt);
    return t;
  };

  if (set.boxes.empty()) return fall_back("empty-layout");

  const auto overlay = render::render_s1_overlay(image, set, style);
  t.s1 = detail::call(backend, backend::RequestImage::from_prompted(overlay),
                      build_s1_prompt(question), opt);
  t.selection = parse_box_ids(t.s1->response.text, set, opt.k_max);
  if (t.selection->empty()) return fall_back("empty-selection");

  const auto mask = render::render_s2_mask(image, set, t.selection->ids, style);
  t.s2 = detail::call(backend, backend::RequestImage::from_prompted(mask),
                      build_s2_prompt(question, *t.selection, set), opt);
  t.answer = std::string(text::trim(t.s2->response.text));
  detail::finalize(t, started, opt);
  return t;
}

// --- serialization ----------------------------------------------------------

inline nlohmann::json to_json(const ModelResponse& r) {
  return {{"text", r.text},
          {"prompt_tokens", r.prompt_token_count},
          {"output_tokens", r.output_token_count},
          {"image_tokens", r.image_token_count},
          {"tokens_estimated", r.tokens_estimated},
          {"image_tokens_estimated", r.image_tokens_estimated}};
}

inline nlohmann::json to_json(const CallRecord& c) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& i : c.images) {
    images.push_back({{"label", i.label},
                      {"sha256", i.fingerprint},
                      {"width", i.width},
                      {"height", i.height}});
  }
  return {{"instruction", c.instruction}, {"images", images}, {"response", to_json(c.response)}};
}

inline nlohmann::json to_json(const KeyBoxSelection& s) {
  return {{"ids", s.ids}, {"raw_text", s.raw_text}, {"parse_notes", s.parse_notes}};
}

inline nlohmann::json to_json(const InferenceTrace& t) {
  nlohmann::json j;
  j["sample_id"] = t.sample_id;
  j["question"] = t.question;
  j["mode"] = mode_name(t.mode);
  j["s1"] = t.s1 ? to_json(*t.s1) : nlohmann::json(nullptr);
  j["selection"] = t.selection ? to_json(*t.selection) : nlohmann::json(nullptr);
  j["s2"] = t.s2 ? to_json(*t.s2) : nlohmann::json(nullptr);
  j["vanilla"] = t.vanilla ? to_json(*t.vanilla) : nlohmann::json(nullptr);
  j["fallback_reason"] = t.fallback_reason ? nlohmann::json(*t.fallback_reason)
                                           : nlohmann::json(nullptr);
  j["answer"] = t.answer;
  j["total_prompt_tokens"] = t.total_prompt_tokens;
  j["total_image_tokens"] = t.total_image_tokens;
  j["total_output_tokens"] = t.total_output_tokens;
  j["wall_time_ms"] = t.wall_time_ms;
  return j;
}

}  // namespace cob::orchestrator
