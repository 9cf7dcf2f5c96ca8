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

#include <gtest/gtest.h>

#include "cob/error.hpp"
#include "cob/image.hpp"
#include "cob/render.hpp"
#include "test_util.hpp"

namespace cob::render {
namespace {

using layout::LayoutBox;
using testing::ProceduralPage;

LayoutSet OneBox(int w, int h, BBox b) {
  LayoutSet s;
  s.image_id = "img";
  s.image_width = w;
  s.image_height = h;
  s.boxes.push_back(LayoutBox{1, b, layout::Category::kText, std::nullopt});
  return s;
}

TEST(PngTest, RoundTripAndDeterministicBytes) {
  const Image img = ProceduralPage(1, 64, 48);
  const std::string a = encode_png(img);
  EXPECT_TRUE(is_png(a));
  EXPECT_EQ(a, encode_png(img));
  EXPECT_EQ(decode_png(a), img);
  int w = 0, h = 0;
  ASSERT_TRUE(png_dimensions(a, w, h));
  EXPECT_EQ(w, 64);
  EXPECT_EQ(h, 48);
}

TEST(PngTest, RejectsGarbage) {
  EXPECT_THROW(decode_png("not a png"), FormatError);
  std::string truncated = encode_png(ProceduralPage(2, 16, 16)).substr(0, 40);
  EXPECT_THROW(decode_png(truncated), FormatError);
  EXPECT_THROW(decode_image("GIF89a"), FormatError);
}

TEST(StyleTest, ScalesWithShortSide) {
  const auto small = default_style(400, 300);
  EXPECT_EQ(small.border_thickness, 2);
  EXPECT_EQ(small.label_font_px, 12);
  EXPECT_DOUBLE_EQ(small.blur_sigma, 2.4);
  const auto big = default_style(2000, 3000);
  EXPECT_EQ(big.border_thickness, 6);
  EXPECT_EQ(big.label_font_px, 40);
  EXPECT_DOUBLE_EQ(big.blur_sigma, 16.0);
  StyleSpec spec;
  spec.border_thickness = 0;
  EXPECT_THROW(resolve_style(spec, 100, 100), ParameterError);
}

TEST(S1OverlayTest, NoBoxesLeavesImageUnchanged) {
  const Image img = ProceduralPage(3, 80, 60);
  LayoutSet empty;
  empty.image_width = 80;
  empty.image_height = 60;
  const auto p = render_s1_overlay(img, empty, default_style(80, 60));
  EXPECT_EQ(p.png, encode_png(img));
  EXPECT_TRUE(p.boxes_rendered.empty());
}

TEST(S1OverlayTest, SingleBoxTouchesOnlyOutlineAndTag) {
  const Image img(200, 200);
  const auto set = OneBox(200, 200, {10, 10, 50, 50});
  const auto style = default_style(200, 200);
  const Image out = draw_s1_overlay(img, set, style);
  EXPECT_EQ(out.at(100, 100), img.at(100, 100));
  EXPECT_EQ(out.at(10, 10), (Rgb{255, 0, 0}));
  EXPECT_EQ(out.at(59, 59), (Rgb{255, 0, 0}));
  EXPECT_EQ(out.at(35, 35), img.at(35, 35));
  const BBox tag = label_tag_rect(set.boxes[0], style, 200, 200);
  for (int y = 0; y < 200; ++y) {
    for (int x = 0; x < 200; ++x) {
      if (out.at(x, y) == img.at(x, y)) continue;
      const bool on_stroke = set.boxes[0].bbox.contains_point(x, y) &&
                             !BBox{12, 12, 46, 46}.contains_point(x, y);
      EXPECT_TRUE(on_stroke || tag.contains_point(x, y)) << x << "," << y;
    }
  }
}

TEST(S1OverlayTest, TagStaysInsideImage) {
  const auto style = default_style(100, 100);
  LayoutBox corner{1, {90, 0, 10, 10}, layout::Category::kText, std::nullopt};
  const BBox tag = label_tag_rect(corner, style, 100, 100);
  EXPECT_GE(tag.x, 0);
  EXPECT_GE(tag.y, 0);
  EXPECT_LE(tag.right(), 100);
  EXPECT_LE(tag.bottom(), 100);
}

TEST(S1OverlayTest, BindingMismatch) {
  const Image img(100, 80);
  EXPECT_THROW(render_s1_overlay(img, OneBox(100, 100, {0, 0, 5, 5}), default_style(100, 80)),
               BindingError);
}

TEST(S1OverlayTest, RendersEveryId) {
  const Image img = ProceduralPage(4, 300, 240);
  const auto set = testing::GridLayout(4, 300, 240, 4, 5);
  const auto p = render_s1_overlay(img, set, default_style(300, 240));
  ASSERT_EQ(p.boxes_rendered.size(), 20u);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(p.boxes_rendered[static_cast<std::size_t>(i)], i + 1);
  EXPECT_EQ(p.role, Role::kS1Overlay);
  EXPECT_STREQ(role_name(p.role), "s1_overlay");
}

TEST(S2MaskTest, WholeImageKeyEqualsOriginalExceptBorder) {
  const Image img = ProceduralPage(5, 120, 90);
  const auto set = OneBox(120, 90, {0, 0, 120, 90});
  const auto style = default_style(120, 90);
  const Image out = draw_s2_mask(img, set, {1}, style);
  const int t = style.border_thickness;
  for (int y = t; y < 90 - t; ++y)
    for (int x = t; x < 120 - t; ++x) ASSERT_EQ(out.at(x, y), img.at(x, y));
  EXPECT_EQ(out.at(0, 0), (Rgb{255, 0, 0}));
}

TEST(S2MaskTest, SharpInsideBlurredOutside) {
  const Image img = ProceduralPage(6, 300, 300);
  std::vector<LayoutBox> boxes = {
      {0, {10, 10, 80, 40}, layout::Category::kText, std::nullopt},
      {0, {150, 10, 100, 40}, layout::Category::kText, std::nullopt},
      {0, {10, 200, 120, 60}, layout::Category::kText, std::nullopt}};
  LayoutSet set;
  set.image_width = set.image_height = 300;
  set.boxes = layout::assign_reading_order(boxes);
  const auto style = default_style(300, 300);
  const Image out = draw_s2_mask(img, set, {3}, style);
  const BBox k = set.box(3).bbox;
  const int t = style.border_thickness;
  for (int y = k.y + t; y < k.bottom() - t; ++y)
    for (int x = k.x + t; x < k.right() - t; ++x) ASSERT_EQ(out.at(x, y), img.at(x, y));
  // Patch far from the key box.
  EXPECT_LT(testing::PatchVariance(out, 200, 120, 50, 50),
            testing::PatchVariance(img, 200, 120, 50, 50));
}

TEST(S2MaskTest, OverlappingKeysCompositeIdempotently) {
  const Image img = ProceduralPage(7, 100, 100);
  LayoutSet set;
  set.image_width = set.image_height = 100;
  set.boxes = {{1, {10, 10, 40, 40}, layout::Category::kText, std::nullopt},
               {2, {30, 30, 40, 40}, layout::Category::kText, std::nullopt}};
  const auto style = default_style(100, 100);
  EXPECT_EQ(draw_s2_mask(img, set, {1, 2}, style), draw_s2_mask(img, set, {2, 1, 2}, style));
  const auto p = render_s2_mask(img, set, {2, 1, 2}, style);
  EXPECT_EQ(p.boxes_rendered, (std::vector<int>{1, 2}));
}

TEST(S2MaskTest, EmptyOrUnknownKeysAreParameterErrors) {
  const Image img(50, 50);
  const auto set = OneBox(50, 50, {0, 0, 10, 10});
  EXPECT_THROW(render_s2_mask(img, set, {}, default_style(50, 50)), ParameterError);
  EXPECT_THROW(render_s2_mask(img, set, {2}, default_style(50, 50)), ParameterError);
}

TEST(BlurTest, ConstantImageStaysConstant) {
  const Image img(40, 30, {17, 99, 201});
  EXPECT_EQ(gaussian_blur(img, 3.0), img);
  EXPECT_THROW(gaussian_blur(img, 0.0), ParameterError);
}

TEST(RenderTest, DeterministicAcrossRuns) {
  const Image img = ProceduralPage(8, 200, 160);
  const auto set = testing::GridLayout(8, 200, 160, 3, 3);
  const auto style = default_style(200, 160);
  EXPECT_EQ(render_s1_overlay(img, set, style).png, render_s1_overlay(img, set, style).png);
  EXPECT_EQ(render_s2_mask(img, set, {2, 5}, style).png,
            render_s2_mask(img, set, {2, 5}, style).png);
}

TEST(GoldenTest, MiniCorpusRendersMatchFrozenFiles) {
  const auto golden_dir = testing::DataPath("golden");
  const Image img = read_image(testing::DataPath("mini_corpus/images/doc1.png"));
  const auto set = layout::load_layout(testing::DataPath("mini_corpus/layouts/doc1.jsonl"), "doc1",
                                       img.width, img.height);
  const auto style = default_style(img.width, img.height);
  EXPECT_EQ(render_s1_overlay(img, set, style).png,
            testing::ReadAll(golden_dir + "/doc1.s1.png"));
  EXPECT_EQ(render_s2_mask(img, set, {4}, style).png,
            testing::ReadAll(golden_dir + "/doc1.s2.k4.png"));
}

}  // namespace
}  // namespace cob::render
