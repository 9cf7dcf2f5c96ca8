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

#include "cob/datagen.hpp"

#include <gtest/gtest.h>

#include "annotation_fixture.hpp"
#include "cob/error.hpp"
#include "test_util.hpp"

namespace cob::datagen {
namespace {

using layout::LayoutSet;
using testing::AnnotationCase;
using testing::Defect;

LayoutSet Boxes(int n, const std::string& id = "img") {
  LayoutSet s;
  s.image_id = id;
  s.image_width = 400;
  s.image_height = 30 * n + 10;
  for (int i = 1; i <= n; ++i) {
    s.boxes.push_back({i, {10, 30 * (i - 1), 200, 20}, layout::Category::kText,
                       "line " + std::to_string(i)});
  }
  return s;
}

TEST(AnnotateImageTest, SendsOverlayAndPrompt) {
  const auto c = testing::MakeAnnotationCase(5, Defect::kNone);
  const Image page = testing::ProceduralPage(5, c.layout.image_width, c.layout.image_height);
  backend::MockBackend mock(backend::ScriptedBehavior::from_json(
      {{"rules", {{{"contains", "pre-labeled boxes"}, {"response", c.reply}},
                  {{"response", "nothing"}}}}}));
  std::vector<backend::ModelRequest> sent;
  backend::LoggingBackend logged(
      mock, [&](std::size_t, const backend::ModelRequest& r, const backend::ModelResponse&) {
        sent.push_back(r);
      });
  const auto style = render::default_style(page.width, page.height);
  const auto call = annotate_image(page, c.layout, {c.sample}, logged, style);
  EXPECT_EQ(call.raw, c.reply);
  EXPECT_EQ(call.prompt, build_annotation_prompt(c.layout, {c.sample}));
  ASSERT_EQ(sent.size(), 1u);
  const auto& req = sent[0];
  ASSERT_EQ(req.images.size(), 1u);
  EXPECT_EQ(req.images[0].fingerprint(),
            backend::RequestImage::from_prompted(render::render_s1_overlay(page, c.layout, style))
                .fingerprint());
  const auto back = annotator_call_from_json(to_json(call));
  EXPECT_EQ(back.raw, call.raw);
  EXPECT_EQ(back.sample_ids, call.sample_ids);
}

TEST(RouteAnnotationsTest, CleanCaseGoesToDataset) {
  const auto c = testing::MakeAnnotationCase(11, Defect::kNone);
  const auto routed = route_annotations(c.reply, c.layout, {c.sample}, {"i.png", "l.jsonl"});
  ASSERT_EQ(routed.accepted.size(), 1u);
  EXPECT_TRUE(routed.review.empty());
  const auto& r = routed.accepted[0];
  EXPECT_EQ(r.provenance, store::Provenance::kAutoPassed);
  EXPECT_EQ(r.layout_box_count, static_cast<int>(c.layout.size()));
  EXPECT_NO_THROW(store::validate(r));
}

TEST(RouteAnnotationsTest, EveryDefectGoesToReview) {
  for (auto d : {Defect::kOverlap, Defect::kTooFewBoxes, Defect::kAnswerNotInHelpful,
                 Defect::kMissingRationale, Defect::kOutOfRangeId}) {
    for (std::uint32_t seed = 200; seed < 205; ++seed) {
      const auto c = testing::MakeAnnotationCase(seed, d);
      const auto routed = route_annotations(c.reply, c.layout, {c.sample}, {});
      EXPECT_TRUE(routed.accepted.empty()) << testing::defect_name(d) << " seed " << seed;
      ASSERT_EQ(routed.review.size(), 1u);
      EXPECT_FALSE(routed.review[0].failed_checks.empty());
      EXPECT_EQ(routed.review[0].item_id, c.sample.sample_id);
    }
  }
}

TEST(RouteAnnotationsTest, UnparseableReplySendsAllToReview) {
  const auto c = testing::MakeAnnotationCase(3, Defect::kNone);
  auto second = c.sample;
  second.sample_id += "-b";
  const auto routed =
      route_annotations("I cannot help with that.", c.layout, {c.sample, second}, {});
  EXPECT_TRUE(routed.accepted.empty());
  ASSERT_EQ(routed.review.size(), 2u);
  for (const auto& item : routed.review) {
    EXPECT_TRUE(item.draft.annotation.unparseable);
    EXPECT_EQ(item.draft.annotation.annotator_raw, "I cannot help with that.");
  }
}

TEST(RouteAnnotationsTest, RoutingIsTotal) {
  // Every sample lands in exactly one bucket, whatever the reply.
  for (std::uint32_t seed = 0; seed < 60; ++seed) {
    const auto c = testing::MakeAnnotationCase(seed, static_cast<Defect>(seed % 6));
    std::string reply = c.reply;
    if (seed % 7 == 0) reply = reply.substr(0, reply.size() / 2);
    const auto routed = route_annotations(reply, c.layout, {c.sample}, {});
    EXPECT_EQ(routed.accepted.size() + routed.review.size(), 1u) << seed;
  }
}

TEST(BoxIdTaskTest, SmallLayoutUsesEveryBox) {
  const auto out = synthesize_box_id_task(Boxes(3), 5, 0);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].target, "1");
  EXPECT_EQ(out[1].target, "2");
  EXPECT_EQ(out[2].target, "3");
  EXPECT_EQ(to_json(out[0])["input_image"], "s1_overlay");
}

TEST(BoxIdTaskTest, QuestionCarriesCoordinates) {
  LayoutSet s = Boxes(2);
  s.boxes[1].bbox = {10, 20, 30, 40};
  const auto out = synthesize_box_id_task(s, 5, 0);
  EXPECT_NE(out[1].question.find("[10, 20, 30, 40]"), std::string::npos);
  EXPECT_EQ(out[1].target, "2");
}

TEST(BoxIdTaskTest, CapsLargeLayoutsDeterministically) {
  const auto s = Boxes(20);
  const auto a = synthesize_box_id_task(s, 5, 9);
  const auto b = synthesize_box_id_task(s, 5, 9);
  ASSERT_EQ(a.size(), 5u);
  std::set<int> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].box_id, b[i].box_id);
    EXPECT_TRUE(s.has_id(a[i].box_id));
    ids.insert(a[i].box_id);
  }
  EXPECT_EQ(ids.size(), 5u);
  EXPECT_THROW(synthesize_box_id_task(LayoutSet{}, 5, 0), ParameterError);
  EXPECT_THROW(synthesize_box_id_task(s, 0, 0), ParameterError);
}

TEST(BoxQueryTaskTest, OnePerRationalizedKeyBox) {
  const auto c = testing::MakeAnnotationCase(21, Defect::kNone);
  const auto ann = parse_annotation(c.reply, c.layout, 1)[0];
  const auto out = synthesize_box_query_task(ann, c.sample);
  EXPECT_EQ(out.size(), ann.key_boxes().size());
  for (const auto& s : out) {
    EXPECT_NE(s.question.find("\"" + c.sample.question + "\""), std::string::npos);
    EXPECT_EQ(s.target, ann.rationales.at(s.box_id));
    EXPECT_EQ(s.box_role, ann.helpful.count(s.box_id) ? "helpful" : "confusing");
  }
}

TEST(BoxQueryTaskTest, MissingRationaleIsSkippedWithWarning) {
  KeyBoxAnnotation ann;
  ann.helpful = {1};
  ann.confusing = {2};
  ann.rationales[1] = "holds the total";
  QASample q{"s1", "img", "What is the total?", {"9"}, "mini"};
  std::vector<std::string> warnings;
  const auto out = synthesize_box_query_task(ann, q, &warnings);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].box_id, 1);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("box 2"), std::string::npos);
}

}  // namespace
}  // namespace cob::datagen
