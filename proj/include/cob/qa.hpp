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

// Key-box annotations: the annotator prompt, parsing of annotator replies,
// and the rule-based checks that decide whether an annotation is accepted
// automatically or sent to a human.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cob/error.hpp"
#include "cob/layout.hpp"
#include "cob/text.hpp"
#include "json.hpp"

namespace cob::datagen {

using layout::LayoutSet;

struct QASample {
  std::string sample_id;
  std::string image_id;
  std::string question;
  // Every acceptable ground truth; the first is shown to the annotator.
  std::vector<std::string> answers;
  std::string dataset_tag;

  void validate() const {
    if (sample_id.empty()) throw ValidationError("sample_id is empty");
    if (image_id.empty()) throw ValidationError("sample " + sample_id + " has no image_id");
    if (question.empty()) throw ValidationError("sample " + sample_id + " has no question");
    if (answers.empty()) throw ValidationError("sample " + sample_id + " has no answers");
  }
};

struct KeyBoxAnnotation {
  std::string sample_id;
  std::set<int> helpful;
  std::set<int> confusing;
  std::map<int, std::string> rationales;
  std::string annotator_raw;
  // Ids the annotator named that do not exist in the layout.
  std::vector<int> dropped_ids;
  // The reply had no usable block for this question.
  bool unparseable = false;
  std::vector<std::string> notes;

  std::set<int> key_boxes() const {
    std::set<int> out = helpful;
    out.insert(confusing.begin(), confusing.end());
    return out;
  }
};

// Check names, in evaluation order.
inline constexpr std::string_view kCheckFormat = "format";
inline constexpr std::string_view kCheckDisjoint = "disjointness";
inline constexpr std::string_view kCheckIds = "id-validity";
inline constexpr std::string_view kCheckMinBoxes = "min-boxes";
inline constexpr std::string_view kCheckEntailment = "entailment";
// Reported instead of a failure when a helpful box carries no text.
inline constexpr std::string_view kNoOcrText = "no-ocr-text";

enum class VerdictStatus { kPassed, kFailed, kIndeterminate };

inline const char* status_name(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::kPassed: return "passed";
    case VerdictStatus::kFailed: return "failed";
    case VerdictStatus::kIndeterminate: break;
  }
  return "indeterminate";
}

struct QAVerdict {
  VerdictStatus status = VerdictStatus::kPassed;
  // Empty exactly when status is kPassed. An indeterminate verdict lists
  // only "no-ocr-text".
  std::vector<std::string> failed_checks;
  std::optional<std::string> entailment_detail;

  bool passed() const { return status == VerdictStatus::kPassed; }
};

// --- annotator prompt -------------------------------------------------------

inline constexpr std::string_view kAnnotationPromptTemplate =
    R"(You are presented with an image containing multiple pre-labeled boxes, each identified by a unique number. You will receive a series of question–answer (QA) pairs. For each question, determine which labeled boxes in the image contain the information needed to arrive at the given answer, adhering to the following rules:

1. **If the Number of Boxes in the Image Exceeds 3, Output at Least Three Boxes**

For each question, list all boxes that are genuinely helpful to answer the question. If the number of truly helpful boxes is less than three, please output several boxes that are most likely to cause confusion in answering the question to ensure that at least three boxes are output.

2. **If the Number of Boxes in the Image is Less Than 3, Output Only the Boxes Helpful for Answering the Question**

For each question, list all boxes that are genuinely helpful to answer the question. Do not output boxes that might cause confusion.

3. **Output Reason and Content**

After listing the boxes, for each box, output the reasons (from semantic, layout, etc. perspectives) why it helps or doesn't help answer the question.

4. **Other Details**

When referring to any box, use the notation <box>num </box>.

5. **Output Format**

For each QA pair, output only the question ID (Q1, Q2, etc.). Output in this strict format:

Q1:

HELPFUL BOX: [<box>num</box>(s)]

CONFUSING BOX: [<box>num</box>(s)]

Reason for <box>num</box>: **30-50 word explanation**

Q2:

HELPFUL BOX: [<box>num</box>(s)]

CONFUSING BOX: [<box>num</box>(s)]

Reason for <box>num</box>: **30-50 word explanation**

Below is an example of the exact format expected:

Q1:
HELPFUL BOX: [<box>16</box>]

CONFUSING BOX: [<box>15</box>, <box>19</box>]

Reason for <box>16</box>: **30-50 word explanation**

Reason for <box>15</box>: **30-50 word explanation**

Q2:

HELPFUL BOX: [<box>2</box>, <box>3</box>, <box>4</box>]

CONFUSING BOX: []

Reason for <box>2</box>: **30-50 word explanation**

Reason for <box>3</box>: **30-50 word explanation**

Reason for <box>4</box>: **30-50 word explanation**

**Here are the QA pairs:**

{QA_Pairs})";

// One annotator call covers every question asked about an image.
inline std::string build_annotation_prompt(const LayoutSet& set,
                                           const std::vector<QASample>& samples) {
  if (samples.empty()) throw ParameterError("annotation prompt needs at least one sample");
  std::string pairs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    s.validate();
    if (s.image_id != samples.front().image_id) {
      throw ParameterError("samples span multiple images ('" + samples.front().image_id +
                           "' and '" + s.image_id + "')");
    }
    if (!set.image_id.empty() && s.image_id != set.image_id) {
      throw ParameterError("sample " + s.sample_id + " is not for image '" + set.image_id + "'");
    }
    if (i) pairs += '\n';
    pairs += "Q" + std::to_string(i + 1) + ": " + s.question + " | A: " + s.answers.front();
  }
  std::string out(kAnnotationPromptTemplate);
  const auto at = out.find("{QA_Pairs}");
  out.replace(at, 10, pairs);
  return out;
}

// --- annotator reply parsing ------------------------------------------------

class AnnotationParseError : public FormatError {
 public:
  explicit AnnotationParseError(const std::string& what)
      : FormatError("<annotator>", 0, what) {}
};

namespace detail {

inline std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

inline std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto nl = s.find('\n', pos);
    auto line = s.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

inline std::string_view strip_stars(std::string_view s) {
  s = text::trim(s);
  while (!s.empty() && s.front() == '*') s.remove_prefix(1);
  while (!s.empty() && s.back() == '*') s.remove_suffix(1);
  return text::trim(s);
}

// "Q12:" (optionally bolded) at the start of a line; returns 12 or 0.
inline int question_header(std::string_view line) {
  auto s = text::trim(line);
  while (!s.empty() && s.front() == '*') s.remove_prefix(1);
  if (s.empty() || (s.front() != 'Q' && s.front() != 'q')) return 0;
  std::size_t i = 1;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i == 1 || i > 10) return 0;
  std::size_t j = i;
  while (j < s.size() && s[j] == '*') ++j;
  if (j >= s.size() || s[j] != ':') return 0;
  return std::stoi(std::string(s.substr(1, i - 1)));
}

// Integers inside <box>n</box> markers; bare integers when there are none.
inline std::vector<long long> bracket_ids(std::string_view body) {
  std::vector<long long> tagged;
  std::vector<long long> bare;
  const std::string up = upper(body);
  std::size_t pos = 0;
  while (pos < body.size()) {
    if (body[pos] >= '0' && body[pos] <= '9') {
      std::size_t e = pos;
      while (e < body.size() && body[e] >= '0' && body[e] <= '9') ++e;
      const auto digits = body.substr(pos, e - pos);
      const long long v = digits.size() > 9 ? -1 : std::stoll(std::string(digits));
      bare.push_back(v);
      // Tagged when preceded by "<box>" and followed by "</box>".
      std::size_t b = pos;
      while (b > 0 && text::is_space(body[b - 1])) --b;
      std::size_t a = e;
      while (a < body.size() && text::is_space(body[a])) ++a;
      if (b >= 5 && up.compare(b - 5, 5, "<BOX>") == 0 && up.compare(a, 6, "</BOX>") == 0) {
        tagged.push_back(v);
      }
      pos = e;
    } else {
      ++pos;
    }
  }
  return tagged.empty() ? bare : tagged;
}

struct BracketField {
  bool found = false;
  bool well_formed = false;
  std::vector<long long> ids;
};

// Finds "<label>: [ ... ]" in the block; the bracket may span lines.
inline BracketField find_bracket(std::string_view block, std::string_view label) {
  BracketField f;
  const std::string up = upper(block);
  const auto at = up.find(label);
  if (at == std::string::npos) return f;
  f.found = true;
  std::size_t p = at + label.size();
  while (p < block.size() && (block[p] == '*' || text::is_space(block[p]))) ++p;
  if (p < block.size() && block[p] == ':') ++p;
  while (p < block.size() && (block[p] == '*' || text::is_space(block[p]))) ++p;
  if (p >= block.size() || block[p] != '[') return f;
  const auto close = block.find(']', p);
  if (close == std::string_view::npos) return f;
  const auto body = block.substr(p + 1, close - p - 1);
  // A nested '[' means the bracket is garbled.
  if (body.find('[') != std::string_view::npos) return f;
  f.well_formed = true;
  f.ids = bracket_ids(body);
  return f;
}

inline bool is_structural(std::string_view line) {
  const std::string up = upper(strip_stars(line));
  return question_header(line) != 0 || up.rfind("HELPFUL BOX", 0) == 0 ||
         up.rfind("CONFUSING BOX", 0) == 0 || up.rfind("REASON FOR", 0) == 0;
}

}  // namespace detail

// Splits an annotator reply into per-question annotations, one for each of
// Q1..Q`expected_questions`. A question whose block is missing or whose
// HELPFUL/CONFUSING brackets are malformed comes back flagged unparseable.
// Ids outside the layout are dropped and recorded. Throws
// AnnotationParseError when no question could be parsed at all.
inline std::vector<KeyBoxAnnotation> parse_annotation(std::string_view raw, const LayoutSet& set,
                                                      int expected_questions) {
  if (expected_questions < 1) throw ParameterError("expected_questions must be >= 1");
  const auto lines = detail::split_lines(raw);

  // Question index -> [first line, end line).
  std::map<int, std::pair<std::size_t, std::size_t>> blocks;
  std::vector<std::string> global_notes;
  int current = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int q = detail::question_header(lines[i]);
    if (q == 0) continue;
    if (current != 0) blocks[current].second = i;
    current = 0;
    if (q > expected_questions) {
      global_notes.push_back("ignored block for unknown question Q" + std::to_string(q));
    } else if (blocks.count(q)) {
      global_notes.push_back("ignored repeated block for Q" + std::to_string(q));
    } else {
      blocks[q] = {i, lines.size()};
      current = q;
    }
  }

  std::vector<KeyBoxAnnotation> out(static_cast<std::size_t>(expected_questions));
  int parsed = 0;
  for (int q = 1; q <= expected_questions; ++q) {
    auto& ann = out[static_cast<std::size_t>(q - 1)];
    ann.notes = global_notes;
    const auto it = blocks.find(q);
    if (it == blocks.end()) {
      ann.unparseable = true;
      ann.notes.push_back("no block for Q" + std::to_string(q));
      continue;
    }
    std::string block;
    for (std::size_t i = it->second.first; i < it->second.second; ++i) {
      block.append(lines[i]);
      block.push_back('\n');
    }
    // Drop the "Qn:" header so its number is not mistaken for a box id.
    const auto colon = block.find(':');
    ann.annotator_raw = block;
    const std::string_view body = std::string_view(block).substr(colon + 1);

    const auto helpful = detail::find_bracket(body, "HELPFUL BOX");
    const auto confusing = detail::find_bracket(body, "CONFUSING BOX");
    if (!helpful.found || !helpful.well_formed || !confusing.found || !confusing.well_formed) {
      ann.unparseable = true;
      ann.notes.push_back(std::string("malformed ") +
                          (!helpful.found || !helpful.well_formed ? "HELPFUL" : "CONFUSING") +
                          " BOX bracket in Q" + std::to_string(q));
      continue;
    }
    auto take = [&](const std::vector<long long>& ids, std::set<int>& dest) {
      for (long long v : ids) {
        if (v < 1 || static_cast<std::size_t>(v) > set.size()) {
          ann.dropped_ids.push_back(v < 0 ? -1 : static_cast<int>(v));
          ann.notes.push_back("dropped out-of-range id " + (v < 0 ? std::string("(overflow)")
                                                                 : std::to_string(v)));
          continue;
        }
        if (!dest.insert(static_cast<int>(v)).second) {
          ann.notes.push_back("duplicate id " + std::to_string(v));
        }
      }
    };
    take(helpful.ids, ann.helpful);
    take(confusing.ids, ann.confusing);

    // "Reason for <box>n</box>: text", text possibly on the following line.
    const auto block_lines = detail::split_lines(body);
    for (std::size_t i = 0; i < block_lines.size(); ++i) {
      const auto line = detail::strip_stars(block_lines[i]);
      const std::string up = detail::upper(line);
      if (up.rfind("REASON FOR", 0) != 0) continue;
      const auto colon_at = line.find(':');
      if (colon_at == std::string_view::npos) continue;
      const auto ids = detail::bracket_ids(line.substr(10, colon_at - 10));
      if (ids.size() != 1) continue;
      std::string reason(detail::strip_stars(line.substr(colon_at + 1)));
      if (reason.empty()) {
        for (std::size_t k = i + 1; k < block_lines.size(); ++k) {
          if (text::trim(block_lines[k]).empty()) continue;
          if (!detail::is_structural(block_lines[k])) {
            reason = std::string(detail::strip_stars(block_lines[k]));
          }
          break;
        }
      }
      const long long id = ids.front();
      if (reason.empty()) continue;
      if (id < 1 || static_cast<std::size_t>(id) > set.size()) continue;
      if (!ann.helpful.count(static_cast<int>(id)) && !ann.confusing.count(static_cast<int>(id))) {
        ann.notes.push_back("rationale for unlisted box " + std::to_string(id) + " ignored");
        continue;
      }
      ann.rationales.emplace(static_cast<int>(id), std::move(reason));
    }
    if (ann.helpful.empty()) {
      ann.unparseable = true;
      ann.notes.push_back("no valid helpful box in Q" + std::to_string(q));
      continue;
    }
    ++parsed;
  }
  if (parsed == 0) {
    throw AnnotationParseError("annotator reply has no parseable question block");
  }
  return out;
}

// --- checks -----------------------------------------------------------------

namespace detail {

inline bool check_format(const KeyBoxAnnotation& a) {
  if (a.unparseable || a.helpful.empty()) return false;
  for (int id : a.key_boxes()) {
    const auto it = a.rationales.find(id);
    if (it == a.rationales.end() || text::trim(it->second).empty()) return false;
  }
  return true;
}

}  // namespace detail

// Runs every check and reports all that fail:
//   format        parseable, helpful non-empty, a rationale for each key box
//   disjointness  no box is both helpful and confusing
//   id-validity   every named id exists in the layout
//   min-boxes     N > 3: at least three key boxes; N <= 3: no confusing boxes
//   entailment    some normalized answer occurs in the normalized text of
//                 the helpful boxes (joined in id order)
// When entailment cannot be shown and a helpful box has no text, the result
// is indeterminate ("no-ocr-text") rather than a failure.
inline QAVerdict check_annotation(const KeyBoxAnnotation& a, const LayoutSet& set,
                                  const QASample& sample) {
  QAVerdict v;
  if (!detail::check_format(a)) v.failed_checks.emplace_back(kCheckFormat);

  bool disjoint = true;
  for (int id : a.helpful) disjoint = disjoint && !a.confusing.count(id);
  if (!disjoint) v.failed_checks.emplace_back(kCheckDisjoint);

  bool ids_ok = a.dropped_ids.empty();
  for (int id : a.key_boxes()) ids_ok = ids_ok && set.has_id(id);
  if (!ids_ok) v.failed_checks.emplace_back(kCheckIds);

  std::set<int> valid_keys;
  for (int id : a.key_boxes()) {
    if (set.has_id(id)) valid_keys.insert(id);
  }
  const bool min_ok = set.size() > 3 ? valid_keys.size() >= 3 : a.confusing.empty();
  if (!min_ok) v.failed_checks.emplace_back(kCheckMinBoxes);

  std::vector<std::string> texts;
  bool missing_text = false;
  for (int id : a.helpful) {
    if (!set.has_id(id)) continue;
    const auto& t = set.box(id).text;
    if (!t || text::trim(*t).empty()) {
      missing_text = true;
    } else {
      texts.push_back(*t);
    }
  }
  const std::string haystack = text::normalize(text::join(texts, " "));
  std::optional<std::string> hit;
  for (const auto& ans : sample.answers) {
    const std::string needle = text::normalize(ans);
    if (!needle.empty() && haystack.find(needle) != std::string::npos) {
      hit = needle;
      break;
    }
  }
  bool indeterminate = false;
  if (hit) {
    v.entailment_detail = "matched \"" + *hit + "\"";
  } else if (missing_text && !a.helpful.empty()) {
    indeterminate = true;
    v.entailment_detail = "a helpful box has no text";
  } else {
    v.failed_checks.emplace_back(kCheckEntailment);
    v.entailment_detail = "no answer found in \"" + haystack + "\"";
  }

  if (!v.failed_checks.empty()) {
    v.status = VerdictStatus::kFailed;
  } else if (indeterminate) {
    v.status = VerdictStatus::kIndeterminate;
    v.failed_checks.emplace_back(kNoOcrText);
  }
  return v;
}

// True when the only outstanding problem is missing text; used to accept a
// human correction.
inline bool passes_except_indeterminate(const QAVerdict& v) {
  return v.status != VerdictStatus::kFailed;
}

enum class Disposition { kDataset, kReviewQueue };

inline Disposition route(const QAVerdict& v) {
  return v.passed() ? Disposition::kDataset : Disposition::kReviewQueue;
}

// --- serialization ----------------------------------------------------------

inline nlohmann::json to_json(const KeyBoxAnnotation& a) {
  nlohmann::json r = nlohmann::json::object();
  for (const auto& [id, text] : a.rationales) r[std::to_string(id)] = text;
  return {{"helpful", std::vector<int>(a.helpful.begin(), a.helpful.end())},
          {"confusing", std::vector<int>(a.confusing.begin(), a.confusing.end())},
          {"rationales", r}};
}

// Reads {"helpful": [...], "confusing": [...], "rationales": {"id": "..."}}.
inline KeyBoxAnnotation annotation_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("annotation must be an object");
  KeyBoxAnnotation a;
  try {
    for (const auto& id : j.at("helpful")) a.helpful.insert(id.get<int>());
    if (j.contains("confusing")) {
      for (const auto& id : j.at("confusing")) a.confusing.insert(id.get<int>());
    }
    if (j.contains("rationales")) {
      for (const auto& [k, val] : j.at("rationales").items()) {
        a.rationales[std::stoi(k)] = val.get<std::string>();
      }
    }
  } catch (const std::exception& e) {
    throw ValidationError(std::string("malformed annotation: ") + e.what(),
                          {std::string(kCheckFormat)});
  }
  return a;
}

inline nlohmann::json to_json(const QAVerdict& v) {
  nlohmann::json j = {{"status", status_name(v.status)}, {"failed_checks", v.failed_checks}};
  j["entailment_detail"] = v.entailment_detail ? nlohmann::json(*v.entailment_detail)
                                               : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const QASample& s) {
  return {{"sample_id", s.sample_id}, {"image_id", s.image_id}, {"question", s.question},
          {"answers", s.answers}, {"dataset_tag", s.dataset_tag}};
}

// QA interchange line: {"sample_id", "image_id", "question", "answers"|"answer"}.
inline QASample qa_sample_from_json(const nlohmann::json& j, const std::string& dataset_tag) {
  QASample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.image_id = j.at("image_id").get<std::string>();
  s.question = j.at("question").get<std::string>();
  if (j.contains("answers")) {
    s.answers = j.at("answers").get<std::vector<std::string>>();
  } else if (j.contains("answer")) {
    s.answers = {j.at("answer").get<std::string>()};
  }
  s.dataset_tag = j.value("dataset_tag", dataset_tag);
  return s;
}

}  // namespace cob::datagen
