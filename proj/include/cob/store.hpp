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

// Dataset persistence. For a dataset tag T in directory D:
//
//   D/T.records.jsonl   accepted records, one per line, append-only
//   D/T.manifest.json   counts recomputed from the records
//   D/T.review.jsonl    review queue event log (enqueue and verdict events)

#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cob/error.hpp"
#include "cob/jsonl.hpp"
#include "cob/layout.hpp"
#include "cob/qa.hpp"
#include "json.hpp"

namespace cob::store {

using datagen::KeyBoxAnnotation;
using datagen::QASample;

enum class Provenance { kAutoPassed, kHumanAccepted, kHumanCorrected };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kAutoPassed: return "auto_passed";
    case Provenance::kHumanAccepted: return "human_accepted";
    case Provenance::kHumanCorrected: break;
  }
  return "human_corrected";
}

inline Provenance parse_provenance(const std::string& s) {
  if (s == "auto_passed") return Provenance::kAutoPassed;
  if (s == "human_accepted") return Provenance::kHumanAccepted;
  if (s == "human_corrected") return Provenance::kHumanCorrected;
  throw ValidationError("unknown provenance '" + s + "'");
}

struct DatasetRecord {
  std::string sample_id;
  std::string image_id;
  std::string image_path;
  std::string layout_path;
  std::string question;
  std::vector<std::string> answers;
  KeyBoxAnnotation annotation;
  Provenance provenance = Provenance::kAutoPassed;
  std::string dataset_tag;
  std::string split = "train";
  // N of the layout the annotation refers to.
  int layout_box_count = 0;

  QASample sample() const { return {sample_id, image_id, question, answers, dataset_tag}; }
};

// Structural annotation invariants that can be checked without box text.
inline std::vector<std::string> structural_failures(const KeyBoxAnnotation& a, int n) {
  std::vector<std::string> failed;
  bool format = !a.helpful.empty();
  for (int id : a.key_boxes()) {
    const auto it = a.rationales.find(id);
    format = format && it != a.rationales.end() && !text::trim(it->second).empty();
  }
  if (!format) failed.emplace_back(datagen::kCheckFormat);
  for (int id : a.helpful) {
    if (a.confusing.count(id)) {
      failed.emplace_back(datagen::kCheckDisjoint);
      break;
    }
  }
  for (int id : a.key_boxes()) {
    if (id < 1 || id > n) {
      failed.emplace_back(datagen::kCheckIds);
      break;
    }
  }
  const bool min_ok = n > 3 ? a.key_boxes().size() >= 3 : a.confusing.empty();
  if (!min_ok) failed.emplace_back(datagen::kCheckMinBoxes);
  return failed;
}

inline void validate(const DatasetRecord& r) {
  if (r.sample_id.empty()) throw ValidationError("record has no sample_id");
  if (r.image_id.empty()) throw ValidationError("record " + r.sample_id + " has no image_id");
  if (r.question.empty()) throw ValidationError("record " + r.sample_id + " has no question");
  if (r.answers.empty()) throw ValidationError("record " + r.sample_id + " has no answers");
  if (r.dataset_tag.empty()) throw ValidationError("record " + r.sample_id + " has no dataset_tag");
  if (r.layout_box_count < 1) {
    throw ValidationError("record " + r.sample_id + " has no layout boxes");
  }
  auto failed = structural_failures(r.annotation, r.layout_box_count);
  if (!failed.empty()) {
    throw ValidationError("record " + r.sample_id + " breaks annotation invariants: " +
                              text::join(failed, ", "),
                          failed);
  }
}

inline nlohmann::json to_json(const DatasetRecord& r) {
  return {{"sample_id", r.sample_id},
          {"image_id", r.image_id},
          {"image_path", r.image_path},
          {"layout_path", r.layout_path},
          {"question", r.question},
          {"answers", r.answers},
          {"annotation", datagen::to_json(r.annotation)},
          {"provenance", provenance_name(r.provenance)},
          {"dataset_tag", r.dataset_tag},
          {"split", r.split},
          {"layout_box_count", r.layout_box_count}};
}

inline DatasetRecord record_from_json(const nlohmann::json& j) {
  DatasetRecord r;
  try {
    r.sample_id = j.at("sample_id").get<std::string>();
    r.image_id = j.at("image_id").get<std::string>();
    r.image_path = j.value("image_path", std::string());
    r.layout_path = j.value("layout_path", std::string());
    r.question = j.at("question").get<std::string>();
    r.answers = j.at("answers").get<std::vector<std::string>>();
    r.annotation = datagen::annotation_from_json(j.at("annotation"));
    r.annotation.sample_id = r.sample_id;
    r.provenance = parse_provenance(j.at("provenance").get<std::string>());
    r.dataset_tag = j.at("dataset_tag").get<std::string>();
    r.split = j.value("split", std::string("train"));
    r.layout_box_count = j.at("layout_box_count").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed record: ") + e.what());
  }
  return r;
}

struct DatasetPaths {
  std::filesystem::path dir;
  std::string tag;

  std::string records() const { return (dir / (tag + ".records.jsonl")).string(); }
  std::string manifest() const { return (dir / (tag + ".manifest.json")).string(); }
  std::string review() const { return (dir / (tag + ".review.jsonl")).string(); }
};

// Reads every record, validating each; a bad line raises CorruptRecordError
// naming the line.
inline std::vector<DatasetRecord> load_records_file(const std::string& path) {
  std::vector<DatasetRecord> out;
  if (!std::filesystem::exists(path)) return out;
  std::set<std::string> seen;
  for_each_jsonl_file(path, [&](const nlohmann::json& j, std::size_t line) {
    try {
      auto r = record_from_json(j);
      validate(r);
      if (!seen.insert(r.sample_id).second) {
        throw ValidationError("duplicate sample_id " + r.sample_id);
      }
      out.push_back(std::move(r));
    } catch (const ValidationError& e) {
      throw CorruptRecordError(path, line, e.what());
    }
  });
  return out;
}

// Append-only record file for one dataset tag. append() is serialized and
// refuses invalid records and repeated sample ids.
class RecordStore {
 public:
  explicit RecordStore(DatasetPaths paths) : paths_(std::move(paths)) {
    for (const auto& r : load_records_file(paths_.records())) ids_.insert(r.sample_id);
    writer_ = std::make_unique<JsonlWriter>(paths_.records());
  }

  void append(const DatasetRecord& r) {
    validate(r);
    if (r.dataset_tag != paths_.tag) {
      throw ValidationError("record " + r.sample_id + " belongs to dataset '" + r.dataset_tag +
                            "', not '" + paths_.tag + "'");
    }
    std::lock_guard lock(mu_);
    if (ids_.count(r.sample_id)) {
      throw ValidationError("sample_id " + r.sample_id + " is already in the dataset");
    }
    writer_->append(to_json(r));
    ids_.insert(r.sample_id);
  }

  bool contains(const std::string& sample_id) const {
    std::lock_guard lock(mu_);
    return ids_.count(sample_id) > 0;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return ids_.size();
  }
  std::vector<DatasetRecord> load() const { return load_records_file(paths_.records()); }
  const DatasetPaths& paths() const { return paths_; }

 private:
  DatasetPaths paths_;
  std::set<std::string> ids_;
  std::unique_ptr<JsonlWriter> writer_;
  mutable std::mutex mu_;
};

inline std::vector<DatasetRecord> load_records(const DatasetPaths& paths) {
  return load_records_file(paths.records());
}

// --- manifest ---------------------------------------------------------------

struct Manifest {
  std::string dataset_tag;
  std::size_t image_count = 0;
  std::size_t question_count = 0;
  std::map<std::string, std::size_t> split_counts;
  std::size_t key_box_total = 0;
  // Rounded to two decimals; 0 for an empty dataset.
  double mean_key_boxes = 0.0;
  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline Manifest compute_manifest(const std::string& tag, const std::vector<DatasetRecord>& records) {
  Manifest m;
  m.dataset_tag = tag;
  std::set<std::string> images;
  for (const auto& r : records) {
    images.insert(r.image_id);
    ++m.split_counts[r.split];
    m.key_box_total += r.annotation.key_boxes().size();
  }
  m.image_count = images.size();
  m.question_count = records.size();
  if (!records.empty()) {
    m.mean_key_boxes =
        round2(static_cast<double>(m.key_box_total) / static_cast<double>(records.size()));
  }
  return m;
}

inline std::string format_mean(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline nlohmann::json to_json(const Manifest& m) {
  return {{"dataset_tag", m.dataset_tag},
          {"image_count", m.image_count},
          {"question_count", m.question_count},
          {"split_counts", m.split_counts},
          {"key_box_total", m.key_box_total},
          {"mean_key_boxes", format_mean(m.mean_key_boxes)}};
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  m.dataset_tag = j.at("dataset_tag").get<std::string>();
  m.image_count = j.at("image_count").get<std::size_t>();
  m.question_count = j.at("question_count").get<std::size_t>();
  m.split_counts = j.at("split_counts").get<std::map<std::string, std::size_t>>();
  m.key_box_total = j.at("key_box_total").get<std::size_t>();
  m.mean_key_boxes = std::stod(j.at("mean_key_boxes").get<std::string>());
  return m;
}

inline Manifest write_manifest(const DatasetPaths& paths) {
  const auto m = compute_manifest(paths.tag, load_records(paths));
  std::filesystem::create_directories(paths.dir);
  write_file_bytes(paths.manifest(), to_json(m).dump(2) + "\n");
  return m;
}

// Loads the manifest and checks it against a recount of the records.
inline Manifest load_manifest(const DatasetPaths& paths) {
  Manifest stored;
  try {
    stored = manifest_from_json(nlohmann::json::parse(read_file_bytes(paths.manifest())));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptRecordError(paths.manifest(), 0, e.what());
  }
  const auto fresh = compute_manifest(paths.tag, load_records(paths));
  if (!(stored == fresh)) {
    throw CorruptRecordError(paths.manifest(), 0, "manifest disagrees with the record file");
  }
  return stored;
}

// --- review queue -----------------------------------------------------------

enum class ReviewStatus { kPending, kAccepted, kCorrected, kRejected };

inline const char* review_status_name(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::kPending: return "pending";
    case ReviewStatus::kAccepted: return "accepted";
    case ReviewStatus::kCorrected: return "corrected";
    case ReviewStatus::kRejected: break;
  }
  return "rejected";
}

inline ReviewStatus parse_review_status(const std::string& s) {
  if (s == "pending") return ReviewStatus::kPending;
  if (s == "accepted") return ReviewStatus::kAccepted;
  if (s == "corrected") return ReviewStatus::kCorrected;
  if (s == "rejected") return ReviewStatus::kRejected;
  throw ValidationError("unknown review status '" + s + "'");
}

struct Verdict {
  ReviewStatus status = ReviewStatus::kAccepted;
  std::string reviewer;
  std::string timestamp;
  std::optional<KeyBoxAnnotation> corrected;

  // Same decision, ignoring when it was made.
  bool same_decision(const Verdict& o) const {
    if (status != o.status || reviewer != o.reviewer) return false;
    if (corrected.has_value() != o.corrected.has_value()) return false;
    if (!corrected) return true;
    return corrected->helpful == o.corrected->helpful &&
           corrected->confusing == o.corrected->confusing &&
           corrected->rationales == o.corrected->rationales;
  }
};

struct ReviewItem {
  std::string item_id;
  // Draft record; its provenance is set when a verdict converts it.
  DatasetRecord draft;
  // Layout the draft refers to, kept so corrections can be re-checked.
  layout::LayoutSet layout;
  std::vector<std::string> failed_checks;
  std::optional<std::string> detail;
  std::vector<std::string> notes;
  ReviewStatus status = ReviewStatus::kPending;
  std::optional<Verdict> verdict;
};

inline nlohmann::json layout_to_json(const layout::LayoutSet& s) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : s.boxes) boxes.push_back(layout::to_json(b));
  return {{"image_id", s.image_id},
          {"width", s.image_width},
          {"height", s.image_height},
          {"boxes", boxes}};
}

inline layout::LayoutSet layout_from_json(const nlohmann::json& j) {
  layout::LayoutSet s;
  s.image_id = j.at("image_id").get<std::string>();
  s.image_width = j.at("width").get<int>();
  s.image_height = j.at("height").get<int>();
  for (const auto& b : j.at("boxes")) {
    layout::LayoutBox box;
    box.id = b.at("id").get<int>();
    const auto& bb = b.at("bbox");
    box.bbox = {bb.at(0).get<int>(), bb.at(1).get<int>(), bb.at(2).get<int>(),
                bb.at(3).get<int>()};
    box.category = layout::parse_category(b.value("category", std::string("other")));
    if (b.contains("text") && b["text"].is_string()) box.text = b["text"].get<std::string>();
    s.boxes.push_back(std::move(box));
  }
  layout::validate(s);
  return s;
}

inline nlohmann::json to_json(const Verdict& v) {
  nlohmann::json j = {{"status", review_status_name(v.status)},
                      {"reviewer", v.reviewer},
                      {"timestamp", v.timestamp}};
  j["corrected"] = v.corrected ? datagen::to_json(*v.corrected) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const ReviewItem& item) {
  nlohmann::json j = {{"item_id", item.item_id},
                      {"draft", to_json(item.draft)},
                      {"layout", layout_to_json(item.layout)},
                      {"failed_checks", item.failed_checks},
                      {"notes", item.notes},
                      {"status", review_status_name(item.status)}};
  j["detail"] = item.detail ? nlohmann::json(*item.detail) : nlohmann::json(nullptr);
  j["verdict"] = item.verdict ? to_json(*item.verdict) : nlohmann::json(nullptr);
  return j;
}

// Drafts may break annotation invariants, so they are parsed without
// validation.
inline ReviewItem review_item_from_json(const nlohmann::json& j) {
  ReviewItem item;
  item.item_id = j.at("item_id").get<std::string>();
  item.draft = record_from_json(j.at("draft"));
  item.layout = layout_from_json(j.at("layout"));
  item.failed_checks = j.at("failed_checks").get<std::vector<std::string>>();
  item.notes = j.value("notes", std::vector<std::string>{});
  if (j.contains("detail") && j["detail"].is_string()) item.detail = j["detail"].get<std::string>();
  return item;
}

inline Verdict verdict_from_json(const nlohmann::json& j) {
  Verdict v;
  v.status = parse_review_status(j.at("status").get<std::string>());
  v.reviewer = j.value("reviewer", std::string());
  v.timestamp = j.value("timestamp", std::string());
  if (j.contains("corrected") && !j["corrected"].is_null()) {
    v.corrected = datagen::annotation_from_json(j["corrected"]);
  }
  return v;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct QueueCounts {
  std::size_t enqueued = 0;
  std::size_t pending = 0;
  std::size_t accepted = 0;
  std::size_t corrected = 0;
  std::size_t rejected = 0;
};

// Human review state machine, persisted as an append-only event log and
// replayed on open. Every item moves at most once, from pending to
// accepted, corrected or rejected. Accepted and corrected items become
// dataset records.
class ReviewQueue {
 public:
  using Clock = std::function<std::string()>;

  ReviewQueue(std::string log_path, RecordStore& dataset, Clock clock = utc_timestamp)
      : dataset_(dataset), clock_(std::move(clock)) {
    if (std::filesystem::exists(log_path)) replay(log_path);
    log_ = std::make_unique<JsonlWriter>(log_path);
    // A verdict logged just before a crash may lack its record.
    for (const auto& id : order_) {
      const auto& item = items_.at(id);
      if ((item.status == ReviewStatus::kAccepted || item.status == ReviewStatus::kCorrected) &&
          !dataset_.contains(item.draft.sample_id)) {
        dataset_.append(converted(item));
      }
    }
  }

  // Adds a pending item. The item id defaults to the draft's sample id.
  const ReviewItem& enqueue(ReviewItem item) {
    std::lock_guard lock(mu_);
    if (item.item_id.empty()) item.item_id = item.draft.sample_id;
    if (item.item_id.empty()) throw ValidationError("review item has no id");
    if (items_.count(item.item_id)) {
      throw StateError("review item " + item.item_id + " already exists");
    }
    item.status = ReviewStatus::kPending;
    item.verdict.reset();
    nlohmann::json ev = {{"event", "enqueue"}, {"item", to_json(item)}};
    log_->append(ev);
    order_.push_back(item.item_id);
    return items_[item.item_id] = std::move(item);
  }

  std::optional<ReviewItem> next_pending() const {
    std::lock_guard lock(mu_);
    for (const auto& id : order_) {
      const auto& item = items_.at(id);
      if (item.status == ReviewStatus::kPending) return item;
    }
    return std::nullopt;
  }

  std::optional<ReviewItem> get(const std::string& item_id) const {
    std::lock_guard lock(mu_);
    const auto it = items_.find(item_id);
    if (it == items_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const std::string& item_id) const {
    std::lock_guard lock(mu_);
    return items_.count(item_id) > 0;
  }

  std::vector<ReviewItem> items() const {
    std::lock_guard lock(mu_);
    std::vector<ReviewItem> out;
    for (const auto& id : order_) out.push_back(items_.at(id));
    return out;
  }

  // Applies a verdict to a pending item. Repeating the verdict already
  // recorded is a no-op; a different verdict raises ConflictError. A
  // correction must pass every check apart from missing box text.
  ReviewItem submit_verdict(const std::string& item_id, Verdict verdict) {
    std::lock_guard lock(mu_);
    const auto it = items_.find(item_id);
    if (it == items_.end()) throw NotFoundError("review item " + item_id);
    ReviewItem& item = it->second;
    if (text::trim(verdict.reviewer).empty()) {
      throw ValidationError("verdict needs a reviewer tag");
    }
    if (verdict.status == ReviewStatus::kPending) {
      throw ValidationError("verdict status must be accepted, corrected or rejected");
    }
    if (item.status != ReviewStatus::kPending) {
      if (item.verdict && item.verdict->same_decision(verdict)) return item;
      throw ConflictError("review item " + item_id + " is already " +
                          review_status_name(item.status));
    }
    if (verdict.status == ReviewStatus::kCorrected) {
      if (!verdict.corrected) throw ValidationError("corrected verdict needs an annotation");
      verdict.corrected->sample_id = item.draft.sample_id;
      const auto v = datagen::check_annotation(*verdict.corrected, item.layout, item.draft.sample());
      if (!datagen::passes_except_indeterminate(v)) {
        throw ValidationError("corrected annotation fails QA checks: " +
                                  text::join(v.failed_checks, ", "),
                              v.failed_checks);
      }
    } else if (verdict.corrected) {
      throw ValidationError("only a corrected verdict may carry an annotation");
    }
    if (verdict.timestamp.empty()) verdict.timestamp = clock_();

    ReviewItem next = item;
    next.status = verdict.status;
    next.verdict = verdict;
    std::optional<DatasetRecord> record;
    if (next.status != ReviewStatus::kRejected) {
      record = converted(next);
      validate(*record);
    }
    nlohmann::json ev = {{"event", "verdict"}, {"item_id", item_id}, {"verdict", to_json(verdict)}};
    log_->append(ev);
    item = std::move(next);
    if (record) dataset_.append(*record);
    return item;
  }

  QueueCounts counts() const {
    std::lock_guard lock(mu_);
    QueueCounts c;
    c.enqueued = order_.size();
    for (const auto& [id, item] : items_) {
      switch (item.status) {
        case ReviewStatus::kPending: ++c.pending; break;
        case ReviewStatus::kAccepted: ++c.accepted; break;
        case ReviewStatus::kCorrected: ++c.corrected; break;
        case ReviewStatus::kRejected: ++c.rejected; break;
      }
    }
    return c;
  }

 private:
  static DatasetRecord converted(const ReviewItem& item) {
    DatasetRecord r = item.draft;
    if (item.status == ReviewStatus::kCorrected) {
      r.annotation.helpful = item.verdict->corrected->helpful;
      r.annotation.confusing = item.verdict->corrected->confusing;
      r.annotation.rationales = item.verdict->corrected->rationales;
      r.provenance = Provenance::kHumanCorrected;
    } else {
      r.provenance = Provenance::kHumanAccepted;
    }
    return r;
  }

  void replay(const std::string& path) {
    for_each_jsonl_file(path, [&](const nlohmann::json& ev, std::size_t line) {
      try {
        const auto kind = ev.at("event").get<std::string>();
        if (kind == "enqueue") {
          auto item = review_item_from_json(ev.at("item"));
          if (items_.count(item.item_id)) throw ValidationError("repeated enqueue");
          order_.push_back(item.item_id);
          items_[item.item_id] = std::move(item);
        } else if (kind == "verdict") {
          const auto id = ev.at("item_id").get<std::string>();
          auto& item = items_.at(id);
          if (item.status != ReviewStatus::kPending) {
            throw ValidationError("second verdict for " + id);
          }
          item.verdict = verdict_from_json(ev.at("verdict"));
          item.status = item.verdict->status;
        } else {
          throw ValidationError("unknown event '" + kind + "'");
        }
      } catch (const std::exception& e) {
        throw CorruptRecordError(path, line, e.what());
      }
    });
  }

  RecordStore& dataset_;
  Clock clock_;
  std::unique_ptr<JsonlWriter> log_;
  std::vector<std::string> order_;
  std::map<std::string, ReviewItem> items_;
  mutable std::mutex mu_;
};

}  // namespace cob::store
