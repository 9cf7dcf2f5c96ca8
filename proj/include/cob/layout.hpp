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

// Layout boxes: geometry, reading-order indexing, the interchange file
// adapter for external layout analyzers, and the built-in OCR + k-means
// analyzer.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "cob/error.hpp"
#include "json.hpp"

namespace cob::layout {

struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const { return x + w; }
  int bottom() const { return y + h; }
  std::int64_t area() const {
    return static_cast<std::int64_t>(w) * static_cast<std::int64_t>(h);
  }
  bool contains(const BBox& o) const {
    return o.x >= x && o.y >= y && o.right() <= right() &&
           o.bottom() <= bottom();
  }
  bool contains_point(int px, int py) const {
    return px >= x && px < right() && py >= y && py < bottom();
  }
  auto tie() const { return std::tie(x, y, w, h); }
  friend bool operator==(const BBox&, const BBox&) = default;
};

inline BBox bbox_union(const BBox& a, const BBox& b) {
  const int x0 = std::min(a.x, b.x);
  const int y0 = std::min(a.y, b.y);
  const int x1 = std::max(a.right(), b.right());
  const int y1 = std::max(a.bottom(), b.bottom());
  return {x0, y0, x1 - x0, y1 - y0};
}

// Intersection over union; 0 when either box is empty or they are disjoint.
inline double iou(const BBox& a, const BBox& b) {
  const std::int64_t ix =
      std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const std::int64_t iy =
      std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const std::int64_t inter = ix * iy;
  const std::int64_t uni = std::max<std::int64_t>(0, a.area()) +
                           std::max<std::int64_t>(0, b.area()) - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

enum class Category { kText, kTitle, kTable, kFigure, kList, kOther };

inline std::string_view category_name(Category c) {
  switch (c) {
    case Category::kText: return "text";
    case Category::kTitle: return "title";
    case Category::kTable: return "table";
    case Category::kFigure: return "figure";
    case Category::kList: return "list";
    case Category::kOther: break;
  }
  return "other";
}

// Accepts our own names plus the labels common analyzers emit.
inline Category parse_category(std::string_view s) {
  std::string v(s);
  for (auto& c : v) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c == ' ' || c == '-') c = '_';
  }
  if (v == "text" || v == "plain_text" || v == "paragraph" || v == "abandon")
    return Category::kText;
  if (v == "title" || v == "header" || v == "heading" || v == "section_header")
    return Category::kTitle;
  if (v == "table" || v == "table_body") return Category::kTable;
  if (v == "figure" || v == "image" || v == "picture" || v == "image_body")
    return Category::kFigure;
  if (v == "list" || v == "list_item") return Category::kList;
  return Category::kOther;
}

struct LayoutBox {
  int id = 0;
  BBox bbox;
  Category category = Category::kOther;
  std::optional<std::string> text;
  friend bool operator==(const LayoutBox&, const LayoutBox&) = default;
};

struct LayoutSet {
  std::string image_id;
  int image_width = 0;
  int image_height = 0;
  std::vector<LayoutBox> boxes;

  std::size_t size() const { return boxes.size(); }
  bool has_id(int id) const {
    return id >= 1 && static_cast<std::size_t>(id) <= boxes.size();
  }
  // Valid only for ids in 1..N, which is an invariant of the set.
  const LayoutBox& box(int id) const {
    return boxes.at(static_cast<std::size_t>(id - 1));
  }
  friend bool operator==(const LayoutSet&, const LayoutSet&) = default;
};

struct OcrToken {
  BBox bbox;
  std::string text;
  double confidence = 1.0;
};

// Row-band reading order. Two boxes share a band when their vertical overlap
// exceeds half the height of the shorter one; bands are the connected
// components of that relation. Bands run top to bottom by their top edge,
// boxes within a band left to right, with (y, x, w, h) and then category and
// text breaking ties so the result does not depend on input order.
inline std::vector<std::size_t> reading_order_permutation(
    std::span<const BBox> boxes,
    std::span<const std::string> tiebreak = {}) {
  const std::size_t n = boxes.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const BBox& a = boxes[i];
      const BBox& b = boxes[j];
      const std::int64_t overlap =
          std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
      const std::int64_t shorter = std::min(a.h, b.h);
      // overlap > shorter / 2, kept in integers.
      if (overlap > 0 && 2 * overlap > shorter) {
        parent[find(i)] = find(j);
      }
    }
  }
  std::vector<int> band_top(n, std::numeric_limits<int>::max());
  for (std::size_t i = 0; i < n; ++i) {
    auto& t = band_top[find(i)];
    t = std::min(t, boxes[i].y);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key_text = [&](std::size_t i) -> std::string_view {
    return i < tiebreak.size() ? std::string_view(tiebreak[i])
                               : std::string_view();
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    const int ta = band_top[find(a)];
    const int tb = band_top[find(b)];
    if (ta != tb) return ta < tb;
    const BBox& ba = boxes[a];
    const BBox& bb = boxes[b];
    if (ba.x != bb.x) return ba.x < bb.x;
    if (ba.tie() != bb.tie()) {
      return std::tie(ba.y, ba.x, ba.w, ba.h) < std::tie(bb.y, bb.x, bb.w, bb.h);
    }
    return key_text(a) < key_text(b);
  });
  return order;
}

// Sorts boxes into reading order and relabels them 1..N.
inline std::vector<LayoutBox> assign_reading_order(std::vector<LayoutBox> boxes) {
  std::vector<BBox> geom;
  std::vector<std::string> tiebreak;
  geom.reserve(boxes.size());
  tiebreak.reserve(boxes.size());
  for (const auto& b : boxes) {
    geom.push_back(b.bbox);
    std::string key(category_name(b.category));
    key.push_back('\x1f');
    key += b.text.value_or("");
    // Present-but-empty text must sort apart from absent text.
    key.push_back(b.text ? '\x01' : '\x00');
    tiebreak.push_back(std::move(key));
  }
  const auto order = reading_order_permutation(geom, tiebreak);
  std::vector<LayoutBox> out;
  out.reserve(boxes.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    LayoutBox b = std::move(boxes[order[rank]]);
    b.id = static_cast<int>(rank) + 1;
    out.push_back(std::move(b));
  }
  return out;
}

// Throws ValidationError if `set` breaks a LayoutSet invariant.
inline void validate(const LayoutSet& set) {
  if (set.image_width <= 0 || set.image_height <= 0) {
    throw ValidationError("layout '" + set.image_id +
                          "' has non-positive image dimensions");
  }
  for (std::size_t i = 0; i < set.boxes.size(); ++i) {
    const auto& b = set.boxes[i];
    if (b.id != static_cast<int>(i) + 1) {
      throw ValidationError("layout ids are not the contiguous range 1..N");
    }
    if (b.bbox.w <= 0 || b.bbox.h <= 0 || b.bbox.x < 0 || b.bbox.y < 0 ||
        b.bbox.right() > set.image_width ||
        b.bbox.bottom() > set.image_height) {
      throw ValidationError("box " + std::to_string(b.id) +
                            " lies outside the image bounds");
    }
  }
}

// --- interchange format ----------------------------------------------------
//
// One JSON object per line: {"bbox": [x, y, w, h], "category": "...",
// "text": "..."}. `category` and `text` are optional; an `id` field, when
// present, is ignored because boxes are always re-indexed. Blank lines are
// skipped.

inline nlohmann::json to_json(const LayoutBox& b) {
  nlohmann::json j;
  j["id"] = b.id;
  j["bbox"] = {b.bbox.x, b.bbox.y, b.bbox.w, b.bbox.h};
  j["category"] = std::string(category_name(b.category));
  if (b.text) j["text"] = *b.text;
  return j;
}

inline std::string to_jsonl(const LayoutSet& set) {
  std::string out;
  for (const auto& b : set.boxes) {
    out += to_json(b).dump();
    out.push_back('\n');
  }
  return out;
}

// Parses interchange records and binds them to an image of the given size.
// Boxes overhanging the image are clipped; boxes that clip to nothing are
// rejected.
inline LayoutSet load_layout_text(std::string_view content,
                                  std::string image_id, int width, int height,
                                  const std::string& source = "<layout>") {
  if (width <= 0 || height <= 0) {
    throw ParameterError("image dimensions must be positive");
  }
  std::vector<LayoutBox> boxes;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    const std::size_t nl = content.find('\n', pos);
    const std::string_view line = content.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) {
      throw FormatError(source, line_no, "record is not an object");
    }
    const auto it = rec.find("bbox");
    if (it == rec.end() || !it->is_array() || it->size() != 4) {
      throw FormatError(source, line_no, "record needs bbox [x, y, w, h]");
    }
    int v[4];
    for (int k = 0; k < 4; ++k) {
      const auto& e = (*it)[static_cast<std::size_t>(k)];
      if (!e.is_number_integer()) {
        throw FormatError(source, line_no, "bbox entries must be integers");
      }
      v[k] = e.get<int>();
    }
    LayoutBox box;
    if (auto c = rec.find("category"); c != rec.end() && !c->is_null()) {
      if (!c->is_string()) {
        throw FormatError(source, line_no, "category must be a string");
      }
      box.category = parse_category(c->get<std::string>());
    }
    if (auto t = rec.find("text"); t != rec.end() && !t->is_null()) {
      if (!t->is_string()) {
        throw FormatError(source, line_no, "text must be a string");
      }
      box.text = t->get<std::string>();
    }
    if (v[2] <= 0 || v[3] <= 0) {
      throw RecordError(source, line_no, "box has non-positive width or height");
    }
    const std::int64_t x0 = std::max<std::int64_t>(0, v[0]);
    const std::int64_t y0 = std::max<std::int64_t>(0, v[1]);
    const std::int64_t x1 = std::min<std::int64_t>(
        width, static_cast<std::int64_t>(v[0]) + v[2]);
    const std::int64_t y1 = std::min<std::int64_t>(
        height, static_cast<std::int64_t>(v[1]) + v[3]);
    if (x1 <= x0 || y1 <= y0) {
      throw RecordError(source, line_no, "box has no area inside the image");
    }
    box.bbox = {static_cast<int>(x0), static_cast<int>(y0),
                static_cast<int>(x1 - x0), static_cast<int>(y1 - y0)};
    boxes.push_back(std::move(box));
  }
  LayoutSet set;
  set.image_id = std::move(image_id);
  set.image_width = width;
  set.image_height = height;
  set.boxes = assign_reading_order(std::move(boxes));
  return set;
}

inline LayoutSet load_layout(const std::string& path, std::string image_id,
                             int width, int height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, 0, "cannot open layout file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_layout_text(ss.str(), std::move(image_id), width, height, path);
}

// --- OCR + k-means analyzer -------------------------------------------------

struct Point2 {
  double x = 0;
  double y = 0;
};

struct KMeansResult {
  std::vector<int> labels;
  std::vector<Point2> centroids;
  // Sum over points of the squared distance to the assigned centroid.
  double inertia = 0;
};

namespace detail {

inline double sq_dist(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Uniform [0, 1) from the top 53 bits; independent of the standard
// library's distribution implementations.
inline double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::vector<Point2> seed_plus_plus(std::span<const Point2> pts, int k,
                                          std::mt19937_64& rng) {
  const std::size_t n = pts.size();
  std::vector<Point2> centers;
  centers.reserve(static_cast<std::size_t>(k));
  auto first = static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(n));
  centers.push_back(pts[std::min(first, n - 1)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(pts[i], centers[0]);
  while (static_cast<int>(centers.size()) < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n - 1;
    if (total > 0) {
      const double r = unit_draw(rng) * total;
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(n));
      pick = std::min(pick, n - 1);
    }
    centers.push_back(pts[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(pts[i], centers.back()));
    }
  }
  return centers;
}

inline KMeansResult lloyd(std::span<const Point2> pts,
                          std::vector<Point2> centers, int max_iter) {
  const std::size_t n = pts.size();
  const std::size_t k = centers.size();
  std::vector<int> labels(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(pts[i], centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_dist(pts[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    // Refill empty clusters with the point farthest from its centroid.
    std::vector<std::size_t> counts(k, 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(labels[i])] <= 1) continue;
        const double d =
            sq_dist(pts[i], centers[static_cast<std::size_t>(labels[i])]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) break;
      --counts[static_cast<std::size_t>(labels[far])];
      labels[far] = static_cast<int>(c);
      counts[c] = 1;
      changed = true;
    }
    std::vector<Point2> sums(k);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[static_cast<std::size_t>(labels[i])];
      s.x += pts[i].x;
      s.y += pts[i].y;
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      centers[c] = {sums[c].x / static_cast<double>(counts[c]),
                    sums[c].y / static_cast<double>(counts[c])};
    }
    if (!changed) break;
  }
  KMeansResult r;
  r.labels = std::move(labels);
  r.centroids = std::move(centers);
  for (std::size_t i = 0; i < n; ++i) {
    r.inertia +=
        sq_dist(pts[i], r.centroids[static_cast<std::size_t>(r.labels[i])]);
  }
  return r;
}

}  // namespace detail

// Seeded k-means: `restarts` k-means++ initialisations drawn from one
// mt19937_64 stream, each refined by Lloyd iterations; the lowest inertia
// wins (earliest on ties).
inline KMeansResult kmeans(std::span<const Point2> pts, int k,
                           std::uint64_t seed, int restarts = 10,
                           int max_iter = 300) {
  if (pts.empty()) throw ParameterError("k-means needs at least one point");
  if (k < 1 || static_cast<std::size_t>(k) > pts.size()) {
    throw ParameterError("k must be in 1..number of points");
  }
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    auto result = detail::lloyd(pts, detail::seed_plus_plus(pts, k, rng), max_iter);
    if (result.inertia < best.inertia) best = std::move(result);
  }
  return best;
}

inline int default_cluster_count(std::size_t tokens) {
  const auto k = static_cast<long>(std::lround(static_cast<double>(tokens) / 10.0));
  return static_cast<int>(std::clamp(k, 1L, 30L));
}

// Groups OCR tokens into layout boxes by k-means over token centres scaled to
// the unit square. Each non-empty cluster becomes a `text` box covering its
// members, with their texts joined in reading order.
inline LayoutSet cluster_ocr_tokens(std::span<const OcrToken> tokens,
                                    std::string image_id, int width, int height,
                                    std::optional<int> k, std::uint64_t seed) {
  if (tokens.empty()) throw ParameterError("at least one OCR token is required");
  if (width <= 0 || height <= 0) {
    throw ParameterError("image dimensions must be positive");
  }
  const int clusters = k.value_or(default_cluster_count(tokens.size()));
  if (clusters < 1) throw ParameterError("k must be positive");
  if (static_cast<std::size_t>(clusters) > tokens.size()) {
    throw ParameterError("k=" + std::to_string(clusters) + " exceeds " +
                         std::to_string(tokens.size()) + " tokens");
  }
  std::vector<Point2> centres;
  centres.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t.text.empty()) throw ParameterError("OCR token text must be non-empty");
    if (t.bbox.w <= 0 || t.bbox.h <= 0) {
      throw ParameterError("OCR token bbox must have positive size");
    }
    centres.push_back({(t.bbox.x + t.bbox.w / 2.0) / width,
                       (t.bbox.y + t.bbox.h / 2.0) / height});
  }
  const auto km = kmeans(centres, clusters, seed);

  std::vector<LayoutBox> boxes;
  for (int c = 0; c < clusters; ++c) {
    std::vector<BBox> member_boxes;
    std::vector<std::string> member_text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (km.labels[i] != c) continue;
      member_boxes.push_back(tokens[i].bbox);
      member_text.push_back(tokens[i].text);
    }
    if (member_boxes.empty()) continue;
    BBox u = member_boxes.front();
    for (const auto& b : member_boxes) u = bbox_union(u, b);
    std::string joined;
    for (auto idx : reading_order_permutation(member_boxes, member_text)) {
      if (!joined.empty()) joined.push_back(' ');
      joined += member_text[idx];
    }
    // Tokens may overhang the page; clip like analyzer output.
    const int x0 = std::max(0, u.x);
    const int y0 = std::max(0, u.y);
    const int x1 = std::min(width, u.right());
    const int y1 = std::min(height, u.bottom());
    if (x1 <= x0 || y1 <= y0) continue;
    boxes.push_back(LayoutBox{0, {x0, y0, x1 - x0, y1 - y0}, Category::kText,
                              std::move(joined)});
  }
  LayoutSet set;
  set.image_id = std::move(image_id);
  set.image_width = width;
  set.image_height = height;
  set.boxes = assign_reading_order(std::move(boxes));
  return set;
}

// OCR token files use the same one-object-per-line shape:
// {"bbox": [x, y, w, h], "text": "...", "confidence": 0.9}.
inline std::vector<OcrToken> load_ocr_tokens_text(
    std::string_view content, const std::string& source = "<tokens>") {
  std::vector<OcrToken> out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    try {
      const auto& b = rec.at("bbox");
      if (!b.is_array() || b.size() != 4) throw FormatError(source, line_no, "bbox");
      OcrToken t;
      t.bbox = {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
      t.text = rec.at("text").get<std::string>();
      t.confidence = rec.value("confidence", 1.0);
      if (t.text.empty()) throw FormatError(source, line_no, "empty token text");
      if (t.confidence < 0 || t.confidence > 1) {
        throw FormatError(source, line_no, "confidence outside [0, 1]");
      }
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(source, line_no, std::string("bad token record: ") + e.what());
    }
  }
  return out;
}

}  // namespace cob::layout
