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

// File-level pipeline steps behind the `cob` subcommands.

#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "cob/backend.hpp"
#include "cob/config.hpp"
#include "cob/datagen.hpp"
#include "cob/eval.hpp"
#include "cob/image.hpp"
#include "cob/jsonl.hpp"
#include "cob/layout.hpp"
#include "cob/orchestrator.hpp"
#include "cob/qa.hpp"
#include "cob/render.hpp"
#include "cob/store.hpp"
#include "json.hpp"

namespace cob::pipeline {

namespace fs = std::filesystem;
using config::PipelineConfig;
using datagen::QASample;

struct Page {
  std::string image_path;
  std::string layout_path;
  Image image;
  layout::LayoutSet layout;
};

inline Page load_page(const std::string& image_id, const std::string& image_path,
                      const std::string& layout_path) {
  Page p;
  p.image_path = image_path;
  p.layout_path = layout_path;
  p.image = read_image(image_path);
  p.layout = layout::load_layout(layout_path, image_id, p.image.width, p.image.height);
  return p;
}

inline Page load_page(const PipelineConfig& cfg, const std::string& image_id) {
  return load_page(image_id, cfg.image_path(image_id), cfg.layout_path(image_id));
}

// Reads a QA interchange file; sample ids must be unique.
inline std::vector<QASample> load_qa(const std::string& path, const std::string& tag) {
  std::vector<QASample> out;
  std::set<std::string> seen;
  for_each_jsonl_file(path, [&](const nlohmann::json& j, std::size_t line) {
    QASample s;
    try {
      s = datagen::qa_sample_from_json(j, tag);
      s.validate();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path, line, e.what());
    } catch (const ValidationError& e) {
      throw FormatError(path, line, e.what());
    }
    if (!seen.insert(s.sample_id).second) {
      throw FormatError(path, line, "duplicate sample_id " + s.sample_id);
    }
    out.push_back(std::move(s));
  });
  return out;
}

// --- layout -----------------------------------------------------------------

inline void image_size(const std::string& image_path, int& w, int& h) {
  const auto bytes = read_file_bytes(image_path);
  if (png_dimensions(bytes, w, h)) return;
  const Image img = decode_image(bytes, image_path);
  w = img.width;
  h = img.height;
}

// Normalizes an analyzer's output: clip, validate and re-index.
inline layout::LayoutSet layout_ingest(const std::string& input, const std::string& image_path,
                                       const std::string& image_id, const std::string& out) {
  int w = 0;
  int h = 0;
  image_size(image_path, w, h);
  auto set = layout::load_layout(input, image_id, w, h);
  write_file_bytes(out, layout::to_jsonl(set));
  return set;
}

inline layout::LayoutSet layout_cluster(const std::string& tokens_path,
                                        const std::string& image_path,
                                        const std::string& image_id, std::optional<int> k,
                                        std::uint64_t seed, const std::string& out) {
  int w = 0;
  int h = 0;
  image_size(image_path, w, h);
  const auto tokens = layout::load_ocr_tokens_text(read_file_bytes(tokens_path), tokens_path);
  auto set = layout::cluster_ocr_tokens(tokens, image_id, w, h, k, seed);
  write_file_bytes(out, layout::to_jsonl(set));
  return set;
}

// --- render -----------------------------------------------------------------

inline render::PromptedImage render_stage(const Page& page, const render::StyleSpec& spec,
                                          const std::optional<std::vector<int>>& keys) {
  const auto style = render::resolve_style(spec, page.image.width, page.image.height);
  if (keys) return render::render_s2_mask(page.image, page.layout, *keys, style);
  return render::render_s1_overlay(page.image, page.layout, style);
}

// "3,5,6" -> {3, 5, 6}
inline std::vector<int> parse_id_list(const std::string& s) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const std::string tok(text::trim(std::string_view(s).substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos)));
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos ||
        tok.size() > 9) {
      throw ParameterError("bad box id list '" + s + "'");
    }
    out.push_back(std::stoi(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// --- inference --------------------------------------------------------------

inline orchestrator::Mode parse_mode(const std::string& s) {
  if (s == "doc-cob") return orchestrator::Mode::kDocCob;
  if (s == "vanilla") return orchestrator::Mode::kVanillaQa;
  throw ConfigError("unknown mode '" + s + "' (expected doc-cob or vanilla)");
}

struct InferSummary {
  std::size_t samples = 0;
  std::size_t fallbacks = 0;
  std::size_t calls = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t image_tokens = 0;
  std::int64_t output_tokens = 0;
};

// Writes traces.jsonl, predictions.jsonl and calls.jsonl into `out_dir`.
// Output order follows the QA file regardless of `cfg.workers`; calls.jsonl
// is in completion order.
inline InferSummary run_infer(const PipelineConfig& cfg, const std::string& tag,
                              orchestrator::Mode mode, backend::Backend& model,
                              const std::string& out_dir) {
  const auto samples = load_qa(cfg.dataset(tag).qa, tag);
  if (samples.empty()) throw ValidationError("dataset '" + tag + "' has no questions");
  std::map<std::string, Page> pages;
  for (const auto& s : samples) {
    if (!pages.count(s.image_id)) {
      if (mode == orchestrator::Mode::kDocCob) {
        pages.emplace(s.image_id, load_page(cfg, s.image_id));
      } else {
        Page p;
        p.image_path = cfg.image_path(s.image_id);
        p.image = read_image(p.image_path);
        pages.emplace(s.image_id, std::move(p));
      }
    }
  }
  fs::create_directories(out_dir);
  JsonlWriter calls((fs::path(out_dir) / "calls.jsonl").string(), true);
  backend::LoggingBackend logged(model, [&](std::size_t idx, const backend::ModelRequest& req,
                                            const backend::ModelResponse& r) {
    nlohmann::json images = nlohmann::json::array();
    for (const auto& img : req.images) {
      images.push_back({{"label", img.label}, {"sha256", img.fingerprint()}});
    }
    calls.append({{"call_index", idx},
                  {"instruction", req.instruction},
                  {"images", images},
                  {"response", orchestrator::to_json(r)}});
  });

  orchestrator::InferenceOptions opt;
  opt.k_max = cfg.k_max;
  opt.max_output_tokens = cfg.max_output_tokens;
  std::vector<orchestrator::InferenceTrace> traces(samples.size());
  auto work = [&](std::size_t i) {
    const auto& s = samples[i];
    const auto& page = pages.at(s.image_id);
    if (mode == orchestrator::Mode::kDocCob) {
      const auto style = render::resolve_style(cfg.style, page.image.width, page.image.height);
      traces[i] = orchestrator::infer_doc_cob(page.image, page.layout, s.question, logged, style,
                                              opt, s.sample_id);
    } else {
      traces[i] = orchestrator::infer_vanilla(page.image, s.question, logged, opt, s.sample_id);
    }
  };
  if (cfg.workers <= 1) {
    for (std::size_t i = 0; i < samples.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < cfg.workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < samples.size();) {
          try {
            work(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
            next = samples.size();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  JsonlWriter trace_out((fs::path(out_dir) / "traces.jsonl").string(), true);
  JsonlWriter pred_out((fs::path(out_dir) / "predictions.jsonl").string(), true);
  InferSummary sum;
  for (const auto& t : traces) {
    trace_out.append(orchestrator::to_json(t));
    nlohmann::json p = {{"sample_id", t.sample_id},
                        {"answer", t.answer},
                        {"mode", orchestrator::mode_name(t.mode)}};
    p["selected_ids"] = t.selection ? nlohmann::json(t.selection->ids) : nlohmann::json(nullptr);
    p["fallback_reason"] =
        t.fallback_reason ? nlohmann::json(*t.fallback_reason) : nlohmann::json(nullptr);
    pred_out.append(p);
    ++sum.samples;
    if (t.fallback_reason) ++sum.fallbacks;
    sum.calls += t.calls().size();
    sum.prompt_tokens += t.total_prompt_tokens;
    sum.image_tokens += t.total_image_tokens;
    sum.output_tokens += t.total_output_tokens;
  }
  return sum;
}

// --- data generation --------------------------------------------------------

// Samples grouped per image, images in order of first appearance.
inline std::vector<std::vector<QASample>> group_by_image(const std::vector<QASample>& samples) {
  std::vector<std::vector<QASample>> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& s : samples) {
    const auto [it, inserted] = index.emplace(s.image_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(s);
  }
  return groups;
}

// One annotator call per image; writes annotator_calls.jsonl.
inline std::size_t run_annotate(const PipelineConfig& cfg, const std::string& tag,
                                backend::Backend& annotator, const std::string& out_path) {
  const auto samples = load_qa(cfg.dataset(tag).qa, tag);
  JsonlWriter out(out_path, true);
  std::size_t n = 0;
  for (const auto& group : group_by_image(samples)) {
    const auto page = load_page(cfg, group.front().image_id);
    const auto style = render::resolve_style(cfg.style, page.image.width, page.image.height);
    const auto call = datagen::annotate_image(page.image, page.layout, group, annotator, style,
                                              cfg.annotator_max_output_tokens);
    out.append(datagen::to_json(call));
    ++n;
  }
  return n;
}

struct QaSummary {
  std::size_t accepted = 0;
  std::size_t queued = 0;
  std::size_t skipped = 0;
  std::map<std::string, std::size_t> failed_checks;
  store::Manifest manifest;
};

inline store::DatasetPaths dataset_paths(const PipelineConfig& cfg, const std::string& tag) {
  return {cfg.datasets_dir, tag};
}

// Checks annotator replies and routes each sample into the dataset or the
// review queue. Samples already present in either are skipped, so the step
// can be re-run after adding annotations.
inline QaSummary run_qa(const PipelineConfig& cfg, const std::string& tag,
                        const std::string& calls_path) {
  const auto& entry = cfg.dataset(tag);
  const auto samples = load_qa(entry.qa, tag);
  std::map<std::string, const QASample*> by_id;
  for (const auto& s : samples) by_id[s.sample_id] = &s;

  const auto paths = dataset_paths(cfg, tag);
  fs::create_directories(paths.dir);
  store::RecordStore records(paths);
  store::ReviewQueue queue(paths.review(), records);
  QaSummary sum;
  for_each_jsonl_file(calls_path, [&](const nlohmann::json& j, std::size_t line) {
    datagen::AnnotatorCall call;
    try {
      call = datagen::annotator_call_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(calls_path, line, e.what());
    }
    std::vector<QASample> group;
    for (const auto& id : call.sample_ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw FormatError(calls_path, line, "unknown sample_id " + id);
      group.push_back(*it->second);
    }
    const auto page = load_page(cfg, call.image_id);
    datagen::RoutingContext ctx{page.image_path, page.layout_path, entry.split};
    auto routed = datagen::route_annotations(call.raw, page.layout, group, ctx);
    for (auto& rec : routed.accepted) {
      if (records.contains(rec.sample_id) || queue.contains(rec.sample_id)) {
        ++sum.skipped;
        continue;
      }
      records.append(rec);
      ++sum.accepted;
    }
    for (auto& item : routed.review) {
      if (records.contains(item.draft.sample_id) || queue.contains(item.item_id)) {
        ++sum.skipped;
        continue;
      }
      for (const auto& c : item.failed_checks) ++sum.failed_checks[c];
      queue.enqueue(std::move(item));
      ++sum.queued;
    }
  });
  sum.manifest = store::write_manifest(paths);
  return sum;
}

struct EnablingSummary {
  std::size_t box_id = 0;
  std::size_t box_query = 0;
  std::vector<std::string> warnings;
};

// Box-id samples for every image in the dataset and box-query samples for
// every accepted record, written to `out_path` in record order.
inline EnablingSummary run_enabling(const PipelineConfig& cfg, const std::string& tag,
                                    const std::string& out_path, std::uint64_t seed, int cap) {
  const auto records = store::load_records(dataset_paths(cfg, tag));
  JsonlWriter out(out_path, true);
  EnablingSummary sum;
  std::set<std::string> images_done;
  std::vector<nlohmann::json> box_id_lines;
  std::vector<nlohmann::json> box_query_lines;
  for (const auto& r : records) {
    if (images_done.insert(r.image_id).second) {
      int w = 0;
      int h = 0;
      image_size(r.image_path, w, h);
      const auto set = layout::load_layout(r.layout_path, r.image_id, w, h);
      for (const auto& s : datagen::synthesize_box_id_task(set, cap, seed)) {
        box_id_lines.push_back(datagen::to_json(s));
      }
    }
    for (const auto& s : datagen::synthesize_box_query_task(r.annotation, r.sample(), &sum.warnings)) {
      box_query_lines.push_back(datagen::to_json(s));
    }
  }
  for (const auto& j : box_id_lines) out.append(j);
  for (const auto& j : box_query_lines) out.append(j);
  sum.box_id = box_id_lines.size();
  sum.box_query = box_query_lines.size();
  return sum;
}

// --- evaluation -------------------------------------------------------------

inline eval::EvalOptions eval_options(const PipelineConfig& cfg, const std::string& tag) {
  eval::EvalOptions opt;
  opt.anls = cfg.anls;
  opt.match.date_order = cfg.date_order;
  opt.dataset_tag = tag;
  if (!tag.empty()) {
    const auto& d = cfg.dataset(tag);
    if (d.date_order) opt.match.date_order = *d.date_order;
    opt.fields = d.fields;
  }
  return opt;
}

// Writes {metric}.tsv and {metric}.summary.json into `out_dir`.
inline eval::EvalReport run_eval(const eval::EvalOptions& opt, eval::Metric metric,
                                 const std::string& predictions, const std::string& gold,
                                 const std::string& out_dir) {
  auto rep = eval::evaluate_run(predictions, gold, metric, opt);
  fs::create_directories(out_dir);
  const std::string stem = eval::metric_name(metric);
  write_file_bytes((fs::path(out_dir) / (stem + ".tsv")).string(), eval::report_tsv(rep));
  write_file_bytes((fs::path(out_dir) / (stem + ".summary.json")).string(),
                   eval::report_summary(rep).dump(2) + "\n");
  return rep;
}

}  // namespace cob::pipeline
