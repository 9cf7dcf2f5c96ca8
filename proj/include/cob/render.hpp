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

// Visual prompts for the two inference stages.
//
//  * The S1 overlay outlines every layout box and tags it with its index.
//  * The S2 mask blurs the page, pastes the key boxes back sharp and outlines
//    them, without tags.
//
// Both are pure functions of their inputs and encode through the fixed PNG
// settings in image.hpp, so identical inputs give identical bytes.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cob/error.hpp"
#include "cob/image.hpp"
#include "cob/layout.hpp"

namespace cob::render {

using layout::BBox;
using layout::LayoutSet;

struct RenderStyle {
  Rgb border_color{255, 0, 0};
  int border_thickness = 2;
  int label_font_px = 12;
  double blur_sigma = 2.0;

  void validate() const {
    if (border_thickness < 1) throw ParameterError("border thickness must be >= 1");
    if (!(blur_sigma > 0)) throw ParameterError("blur sigma must be > 0");
    if (label_font_px < 8) throw ParameterError("label font must be >= 8 px");
  }
};

// Partial style from configuration; unset fields scale with the image.
struct StyleSpec {
  std::optional<Rgb> border_color;
  std::optional<int> border_thickness;
  std::optional<int> label_font_px;
  std::optional<double> blur_sigma;
};

inline RenderStyle resolve_style(const StyleSpec& spec, int width, int height) {
  const double m = std::min(width, height);
  RenderStyle s;
  s.border_color = spec.border_color.value_or(Rgb{255, 0, 0});
  s.border_thickness = spec.border_thickness.value_or(
      std::max(2, static_cast<int>(std::lround(0.003 * m))));
  s.label_font_px = spec.label_font_px.value_or(
      std::max(12, static_cast<int>(std::lround(0.02 * m))));
  s.blur_sigma = spec.blur_sigma.value_or(std::max(2.0, 0.008 * m));
  s.validate();
  return s;
}

inline RenderStyle default_style(int width, int height) {
  return resolve_style({}, width, height);
}

enum class Role { kS1Overlay, kS2Mask };

inline const char* role_name(Role r) {
  return r == Role::kS1Overlay ? "s1_overlay" : "s2_mask";
}

struct PromptedImage {
  Role role = Role::kS1Overlay;
  std::string png;
  std::string source_image_id;
  std::vector<int> boxes_rendered;
  int width = 0;
  int height = 0;
};

// --- glyphs -----------------------------------------------------------------

// 5x7 digits, one 5-bit row mask per line, MSB on the left.
inline constexpr std::array<std::array<std::uint8_t, 7>, 10> kDigitGlyphs = {{
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
}};
inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;

// Integer scale of the glyph cell for a requested label size. A tag is
// (glyph height + 2) cells tall: one cell of padding above and below.
inline int glyph_scale(const RenderStyle& style) {
  return std::max(1, style.label_font_px / (kGlyphHeight + 2));
}

inline Rgb label_text_color(Rgb fill) {
  const int luma = 299 * fill.r + 587 * fill.g + 114 * fill.b;
  return luma > 128000 ? Rgb{0, 0, 0} : Rgb{255, 255, 255};
}

// Tag rectangle for `box`: above the box's top-left corner when there is
// room, otherwise just inside it, then shifted to stay inside the image.
inline BBox label_tag_rect(const layout::LayoutBox& box, const RenderStyle& style,
                           int image_width, int image_height) {
  const int s = glyph_scale(style);
  const int digits = static_cast<int>(std::to_string(box.id).size());
  const int tw = 2 * s + digits * kGlyphWidth * s + (digits - 1) * s;
  const int th = (kGlyphHeight + 2) * s;
  int tx = box.bbox.x;
  int ty = box.bbox.y - th;
  if (ty < 0) ty = box.bbox.y;
  tx = std::max(0, std::min(tx, image_width - tw));
  ty = std::max(0, std::min(ty, image_height - th));
  return {tx, ty, std::min(tw, image_width), std::min(th, image_height)};
}

// --- drawing primitives -----------------------------------------------------

// Outline drawn inward from the box edge so it never leaves the box.
inline void draw_outline(Image& img, const BBox& b, int thickness, Rgb color) {
  const int t = std::min({thickness, (b.w + 1) / 2, (b.h + 1) / 2});
  for (int y = b.y; y < b.bottom(); ++y) {
    const bool edge_row = y < b.y + t || y >= b.bottom() - t;
    if (edge_row) {
      for (int x = b.x; x < b.right(); ++x) img.set(x, y, color);
    } else {
      for (int x = b.x; x < b.x + t; ++x) img.set(x, y, color);
      for (int x = b.right() - t; x < b.right(); ++x) img.set(x, y, color);
    }
  }
}

inline void fill_rect(Image& img, const BBox& r, Rgb color) {
  const int x1 = std::min(r.right(), img.width);
  const int y1 = std::min(r.bottom(), img.height);
  for (int y = std::max(0, r.y); y < y1; ++y)
    for (int x = std::max(0, r.x); x < x1; ++x) img.set(x, y, color);
}

inline void draw_label(Image& img, const BBox& tag, int id, int scale, Rgb fill,
                       Rgb ink) {
  fill_rect(img, tag, fill);
  const std::string digits = std::to_string(id);
  int pen_x = tag.x + scale;
  const int pen_y = tag.y + scale;
  for (char ch : digits) {
    const auto& glyph = kDigitGlyphs[static_cast<std::size_t>(ch - '0')];
    for (int gy = 0; gy < kGlyphHeight; ++gy) {
      for (int gx = 0; gx < kGlyphWidth; ++gx) {
        if (!((glyph[static_cast<std::size_t>(gy)] >> (kGlyphWidth - 1 - gx)) & 1)) continue;
        const BBox cell{pen_x + gx * scale, pen_y + gy * scale, scale, scale};
        // Clip to the tag so a squeezed tag never spills.
        const int x0 = std::max(cell.x, tag.x);
        const int y0 = std::max(cell.y, tag.y);
        const int x1 = std::min(cell.right(), tag.right());
        const int y1 = std::min(cell.bottom(), tag.bottom());
        if (x1 > x0 && y1 > y0) fill_rect(img, {x0, y0, x1 - x0, y1 - y0}, ink);
      }
    }
    pen_x += (kGlyphWidth + 1) * scale;
  }
}

// Separable Gaussian blur, kernel radius ceil(3 sigma), edge pixels
// replicated. Computed in double and rounded half up.
inline Image gaussian_blur(const Image& src, double sigma) {
  if (!(sigma > 0)) throw ParameterError("blur sigma must be > 0");
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : kernel) v /= sum;

  const int w = src.width;
  const int h = src.height;
  std::vector<double> tmp(src.data.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      for (int k = -radius; k <= radius; ++k) {
        const int sx = std::clamp(x + k, 0, w - 1);
        const auto o = src.offset(sx, y);
        const double kw = kernel[static_cast<std::size_t>(k + radius)];
        acc[0] += kw * src.data[o];
        acc[1] += kw * src.data[o + 1];
        acc[2] += kw * src.data[o + 2];
      }
      const auto o = src.offset(x, y);
      tmp[o] = acc[0];
      tmp[o + 1] = acc[1];
      tmp[o + 2] = acc[2];
    }
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      for (int k = -radius; k <= radius; ++k) {
        const int sy = std::clamp(y + k, 0, h - 1);
        const auto o = src.offset(x, sy);
        const double kw = kernel[static_cast<std::size_t>(k + radius)];
        acc[0] += kw * tmp[o];
        acc[1] += kw * tmp[o + 1];
        acc[2] += kw * tmp[o + 2];
      }
      const auto o = out.offset(x, y);
      for (int c = 0; c < 3; ++c) {
        out.data[o + static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(
            std::clamp(std::floor(acc[c] + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

inline void check_binding(const Image& image, const LayoutSet& set) {
  if (image.width != set.image_width || image.height != set.image_height) {
    throw BindingError("layout '" + set.image_id + "' is bound to " +
                       std::to_string(set.image_width) + "x" +
                       std::to_string(set.image_height) + " but the image is " +
                       std::to_string(image.width) + "x" +
                       std::to_string(image.height));
  }
}

// --- stage images -----------------------------------------------------------

inline Image draw_s1_overlay(const Image& image, const LayoutSet& set,
                             const RenderStyle& style) {
  style.validate();
  check_binding(image, set);
  Image out = image;
  for (const auto& box : set.boxes) {
    draw_outline(out, box.bbox, style.border_thickness, style.border_color);
  }
  // Tags go on top of every outline.
  const Rgb ink = label_text_color(style.border_color);
  const int scale = glyph_scale(style);
  for (const auto& box : set.boxes) {
    draw_label(out, label_tag_rect(box, style, image.width, image.height),
               box.id, scale, style.border_color, ink);
  }
  return out;
}

inline PromptedImage render_s1_overlay(const Image& image, const LayoutSet& set,
                                       const RenderStyle& style) {
  PromptedImage p;
  p.role = Role::kS1Overlay;
  p.png = encode_png(draw_s1_overlay(image, set, style));
  p.source_image_id = set.image_id;
  p.width = image.width;
  p.height = image.height;
  for (const auto& b : set.boxes) p.boxes_rendered.push_back(b.id);
  return p;
}

// Key ids deduplicated and sorted; throws ParameterError when empty or when
// an id is outside the layout.
inline std::vector<int> checked_key_ids(const LayoutSet& set,
                                        const std::vector<int>& key_ids) {
  if (key_ids.empty()) throw ParameterError("key box set is empty");
  std::set<int> uniq(key_ids.begin(), key_ids.end());
  for (int id : uniq) {
    if (!set.has_id(id)) {
      throw ParameterError("key box id " + std::to_string(id) +
                           " is not in layout 1.." + std::to_string(set.size()));
    }
  }
  return {uniq.begin(), uniq.end()};
}

inline Image draw_s2_mask(const Image& image, const LayoutSet& set,
                          const std::vector<int>& key_ids,
                          const RenderStyle& style) {
  style.validate();
  check_binding(image, set);
  const auto keys = checked_key_ids(set, key_ids);
  Image out = gaussian_blur(image, style.blur_sigma);
  for (int id : keys) {
    const BBox& b = set.box(id).bbox;
    for (int y = b.y; y < b.bottom(); ++y) {
      const auto o = image.offset(b.x, y);
      std::copy_n(image.data.begin() + static_cast<std::ptrdiff_t>(o),
                  static_cast<std::size_t>(b.w) * 3,
                  out.data.begin() + static_cast<std::ptrdiff_t>(o));
    }
  }
  for (int id : keys) {
    draw_outline(out, set.box(id).bbox, style.border_thickness, style.border_color);
  }
  return out;
}

inline PromptedImage render_s2_mask(const Image& image, const LayoutSet& set,
                                    const std::vector<int>& key_ids,
                                    const RenderStyle& style) {
  PromptedImage p;
  p.role = Role::kS2Mask;
  p.png = encode_png(draw_s2_mask(image, set, key_ids, style));
  p.source_image_id = set.image_id;
  p.width = image.width;
  p.height = image.height;
  p.boxes_rendered = checked_key_ids(set, key_ids);
  return p;
}

}  // namespace cob::render
