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

// Training-data generation: annotator calls, QA routing into the dataset
// or the review queue, and the auxiliary box-id / box-query tasks.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cob/backend.hpp"
#include "cob/image.hpp"
#include "cob/layout.hpp"
#include "cob/qa.hpp"
#include "cob/render.hpp"
#include "cob/store.hpp"
#include "json.hpp"

namespace cob::datagen {

// --- annotator --------------------------------------------------------------

struct AnnotatorCall {
  std::string image_id;
  std::vector<std::string> sample_ids;
  std::string prompt;
  std::string raw;
  backend::ModelResponse response;
};

inline AnnotatorCall annotate_image(const Image& image, const LayoutSet& set,
                                    const std::vector<QASample>& samples,
                                    backend::Backend& annotator,
                                    const render::RenderStyle& style,
                                    int max_output_tokens = 2048) {
  AnnotatorCall call;
  call.prompt = build_annotation_prompt(set, samples);
  call.image_id = set.image_id;
  for (const auto& s : samples) call.sample_ids.push_back(s.sample_id);
  backend::ModelRequest req;
  req.images.push_back(
      backend::RequestImage::from_prompted(render::render_s1_overlay(image, set, style)));
  req.instruction = call.prompt;
  req.decode.max_output_tokens = max_output_tokens;
  call.response = annotator.invoke(req);
  call.raw = call.response.text;
  return call;
}

inline nlohmann::json to_json(const AnnotatorCall& c) {
  return {{"image_id", c.image_id},
          {"sample_ids", c.sample_ids},
          {"prompt", c.prompt},
          {"raw", c.raw},
          {"prompt_tokens", c.response.prompt_token_count},
          {"image_tokens", c.response.image_token_count},
          {"output_tokens", c.response.output_token_count}};
}

inline AnnotatorCall annotator_call_from_json(const nlohmann::json& j) {
  AnnotatorCall c;
  c.image_id = j.at("image_id").get<std::string>();
  c.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
  c.prompt = j.value("prompt", std::string());
  c.raw = j.at("raw").get<std::string>();
  c.response.text = c.raw;
  return c;
}

// --- QA routing -------------------------------------------------------------

struct RoutingContext {
  std::string image_path;
  std::string layout_path;
  std::string split = "train";
};

struct Routed {
  std::vector<store::DatasetRecord> accepted;
  std::vector<store::ReviewItem> review;
};

// Parses one annotator reply for an image's questions (in prompt order),
// checks each annotation and sorts them into accepted records and review
// items. Every sample lands in exactly one of the two.
inline Routed route_annotations(std::string_view raw, const LayoutSet& set,
                                const std::vector<QASample>& samples,
                                const RoutingContext& ctx) {
  std::vector<KeyBoxAnnotation> anns;
  std::string parse_failure;
  try {
    anns = parse_annotation(raw, set, static_cast<int>(samples.size()));
  } catch (const AnnotationParseError& e) {
    parse_failure = e.what();
    anns.assign(samples.size(), KeyBoxAnnotation{});
    for (auto& a : anns) {
      a.unparseable = true;
      a.notes.push_back(parse_failure);
    }
  }
  Routed out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    auto& ann = anns[i];
    ann.sample_id = s.sample_id;
    if (ann.annotator_raw.empty()) ann.annotator_raw = std::string(raw);
    store::DatasetRecord rec;
    rec.sample_id = s.sample_id;
    rec.image_id = s.image_id;
    rec.image_path = ctx.image_path;
    rec.layout_path = ctx.layout_path;
    rec.question = s.question;
    rec.answers = s.answers;
    rec.annotation = ann;
    rec.provenance = store::Provenance::kAutoPassed;
    rec.dataset_tag = s.dataset_tag;
    rec.split = ctx.split;
    rec.layout_box_count = static_cast<int>(set.size());

    const auto verdict = check_annotation(ann, set, s);
    if (route(verdict) == Disposition::kDataset) {
      out.accepted.push_back(std::move(rec));
    } else {
      store::ReviewItem item;
      item.item_id = s.sample_id;
      item.draft = std::move(rec);
      item.layout = set;
      item.failed_checks = verdict.failed_checks;
      item.detail = verdict.entailment_detail;
      item.notes = ann.notes;
      out.review.push_back(std::move(item));
    }
  }
  return out;
}

// --- enabling tasks ---------------------------------------------------------

struct EnablingSample {
  // "box_id" or "box_query".
  std::string task;
  std::string sample_id;
  std::string image_id;
  // The model input image is always the S1 overlay of `image_id`.
  std::string question;
  std::string target;
  int box_id = 0;
  std::string source_sample_id;
  // "helpful" / "confusing" for box-query samples.
  std::string box_role;
};

inline nlohmann::json to_json(const EnablingSample& s) {
  nlohmann::json j = {{"task", s.task},
                      {"sample_id", s.sample_id},
                      {"image_id", s.image_id},
                      {"input_image", "s1_overlay"},
                      {"question", s.question},
                      {"target", s.target},
                      {"box_id", s.box_id}};
  if (!s.source_sample_id.empty()) j["source_sample_id"] = s.source_sample_id;
  if (!s.box_role.empty()) j["box_role"] = s.box_role;
  return j;
}

// 64-bit FNV-1a; mixes the image id into the per-image sampling seed so the
// result does not depend on std::hash.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Chooses up to `cap` boxes. When the page has more boxes than the cap, a
// partial Fisher-Yates shuffle seeded from (seed, image_id) picks them; the
// output is in ascending id order either way.
inline std::vector<EnablingSample> synthesize_box_id_task(const LayoutSet& set, int cap = 5,
                                                          std::uint64_t seed = 0) {
  if (set.boxes.empty()) throw ParameterError("box-id task needs at least one box");
  if (cap < 1) throw ParameterError("per-image cap must be >= 1");
  std::vector<int> ids;
  for (const auto& b : set.boxes) ids.push_back(b.id);
  if (ids.size() > static_cast<std::size_t>(cap)) {
    std::mt19937_64 rng(seed ^ fnv1a(set.image_id));
    for (std::size_t i = 0; i < static_cast<std::size_t>(cap); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (ids.size() - i));
      std::swap(ids[i], ids[j]);
    }
    ids.resize(static_cast<std::size_t>(cap));
    std::sort(ids.begin(), ids.end());
  }
  std::vector<EnablingSample> out;
  for (int id : ids) {
    const auto& b = set.box(id).bbox;
    EnablingSample s;
    s.task = "box_id";
    s.image_id = set.image_id;
    s.sample_id = set.image_id + ":box_id:" + std::to_string(id);
    s.question = "What is the index of the box at [" + std::to_string(b.x) + ", " +
                 std::to_string(b.y) + ", " + std::to_string(b.w) + ", " +
                 std::to_string(b.h) + "]?";
    s.target = std::to_string(id);
    s.box_id = id;
    out.push_back(std::move(s));
  }
  return out;
}

// One sample per key box in ascending id order. Boxes without a rationale
// are skipped and reported through `warnings`.
inline std::vector<EnablingSample> synthesize_box_query_task(
    const KeyBoxAnnotation& ann, const QASample& sample,
    std::vector<std::string>* warnings = nullptr) {
  std::vector<EnablingSample> out;
  for (int id : ann.key_boxes()) {
    const auto it = ann.rationales.find(id);
    if (it == ann.rationales.end() || text::trim(it->second).empty()) {
      if (warnings) {
        warnings->push_back("sample " + sample.sample_id + ": box " + std::to_string(id) +
                            " has no rationale, skipped");
      }
      continue;
    }
    EnablingSample s;
    s.task = "box_query";
    s.image_id = sample.image_id;
    s.sample_id = sample.sample_id + ":box_query:" + std::to_string(id);
    s.question = "What role does box " + std::to_string(id) + " play in answering \"" +
                 sample.question + "\"?";
    s.target = it->second;
    s.box_id = id;
    s.source_sample_id = sample.sample_id;
    s.box_role = ann.helpful.count(id) ? "helpful" : "confusing";
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cob::datagen
