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

// `cob`: command-line front end for the chain-of-box pipeline.
//
// Exit codes: 0 success, 1 internal error, 2 configuration or usage error,
// 3 malformed input file, 4 backend failure, 5 validation error, 6 service
// error.

#include <csignal>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "cob/config.hpp"
#include "cob/pipeline.hpp"
#include "cob/service.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

struct GlobalOptions {
  std::string config_path = "cob.json";
  std::optional<std::uint64_t> seed;
};

cob::config::PipelineConfig load(const GlobalOptions& g) {
  auto cfg = cob::config::load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

void log_config(const cob::config::PipelineConfig& cfg) {
  std::cerr << "resolved config: " << cob::config::to_json(cfg).dump() << "\n";
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chain-of-box document question answering pipeline"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Pipeline config file")->capture_default_str();
  app.add_option("--seed", g.seed, "Override the config seed");

  // layout
  auto* layout_cmd = app.add_subcommand("layout", "Build layout files");
  layout_cmd->require_subcommand(1);
  std::string l_input, l_image, l_image_id, l_out, l_tokens;
  std::optional<int> l_k;
  auto* ingest = layout_cmd->add_subcommand("ingest", "Normalize analyzer output");
  ingest->add_option("--input", l_input, "Analyzer JSONL")->required();
  ingest->add_option("--image", l_image, "Page image")->required();
  ingest->add_option("--image-id", l_image_id, "Image id")->required();
  ingest->add_option("--out", l_out, "Output layout file")->required();
  auto* cluster = layout_cmd->add_subcommand("cluster", "Cluster OCR tokens into boxes");
  cluster->add_option("--tokens", l_tokens, "OCR token JSONL")->required();
  cluster->add_option("--image", l_image, "Page image")->required();
  cluster->add_option("--image-id", l_image_id, "Image id")->required();
  cluster->add_option("--k", l_k, "Cluster count (default: derived from token count)");
  cluster->add_option("--out", l_out, "Output layout file")->required();

  // render
  auto* render_cmd = app.add_subcommand("render", "Render stage images");
  render_cmd->require_subcommand(1);
  std::string r_image_id, r_image, r_layout, r_out, r_keys;
  auto add_render_opts = [&](CLI::App* c) {
    c->add_option("--image-id", r_image_id, "Image id")->required();
    c->add_option("--image", r_image, "Image path (default: from config)");
    c->add_option("--layout", r_layout, "Layout path (default: from config)");
    c->add_option("--out", r_out, "Output PNG")->required();
  };
  auto* s1 = render_cmd->add_subcommand("s1", "All boxes outlined and numbered");
  add_render_opts(s1);
  auto* s2 = render_cmd->add_subcommand("s2", "Key boxes sharp, rest blurred");
  add_render_opts(s2);
  s2->add_option("--keys", r_keys, "Comma-separated key box ids")->required();

  // infer
  auto* infer = app.add_subcommand("infer", "Answer a dataset's questions");
  std::string i_dataset, i_mode = "doc-cob", i_backend, i_behavior, i_out;
  infer->add_option("--dataset", i_dataset, "Dataset tag")->required();
  infer->add_option("--mode", i_mode, "doc-cob or vanilla")->capture_default_str();
  infer->add_option("--backend", i_backend, "mock or remote (default: from config)");
  infer->add_option("--behavior", i_behavior, "Mock behavior file override");
  infer->add_option("--out", i_out, "Output directory (default: outputs/<dataset>)");

  // generate
  auto* gen = app.add_subcommand("generate", "Training data generation");
  gen->require_subcommand(1);
  std::string g_dataset, g_out, g_calls, g_behavior;
  std::optional<int> g_cap;
  auto* annotate = gen->add_subcommand("annotate", "Call the annotator for every image");
  annotate->add_option("--dataset", g_dataset, "Dataset tag")->required();
  annotate->add_option("--behavior", g_behavior, "Mock behavior file override");
  annotate->add_option("--out", g_out, "Annotator call log (JSONL)");
  auto* qa = gen->add_subcommand("qa", "Check annotations and route them");
  qa->add_option("--dataset", g_dataset, "Dataset tag")->required();
  qa->add_option("--calls", g_calls, "Annotator call log (JSONL)");
  auto* enabling = gen->add_subcommand("enabling-tasks", "Synthesize box-id and box-query samples");
  enabling->add_option("--dataset", g_dataset, "Dataset tag")->required();
  enabling->add_option("--out", g_out, "Output JSONL");
  enabling->add_option("--cap", g_cap, "Box-id samples per image (default: from config)");

  // eval
  auto* ev = app.add_subcommand("eval", "Score predictions");
  std::string e_metric, e_pred, e_gold, e_out, e_dataset;
  ev->add_option("--metric", e_metric, "anls, keybox-f1, typed-micro-f1 or field-f1")->required();
  ev->add_option("--predictions", e_pred, "Predictions JSONL")->required();
  ev->add_option("--gold", e_gold, "Gold JSONL")->required();
  ev->add_option("--out", e_out, "Report directory")->required();
  ev->add_option("--dataset", e_dataset, "Dataset tag (field types, date order)");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the review service");
  std::string s_dataset, s_host;
  std::optional<int> s_port;
  serve->add_option("--dataset", s_dataset, "Dataset tag")->required();
  serve->add_option("--host", s_host, "Listen address (default: from config)");
  serve->add_option("--port", s_port, "Listen port, 0 for any (default: from config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  namespace pl = cob::pipeline;
  try {
    if (*ingest) {
      const auto set = pl::layout_ingest(l_input, l_image, l_image_id, l_out);
      print({{"image_id", set.image_id}, {"boxes", set.size()}, {"out", l_out}});
    } else if (*cluster) {
      const std::uint64_t seed = g.seed.value_or(0);
      const auto set = pl::layout_cluster(l_tokens, l_image, l_image_id, l_k, seed, l_out);
      print({{"image_id", set.image_id}, {"boxes", set.size()}, {"out", l_out}});
    } else if (*s1 || *s2) {
      cob::render::StyleSpec style;
      std::string image = r_image;
      std::string layout = r_layout;
      if (image.empty() || layout.empty()) {
        const auto cfg = load(g);
        log_config(cfg);
        style = cfg.style;
        if (image.empty()) image = cfg.image_path(r_image_id);
        if (layout.empty()) layout = cfg.layout_path(r_image_id);
      }
      const auto page = pl::load_page(r_image_id, image, layout);
      std::optional<std::vector<int>> keys;
      if (*s2) keys = pl::parse_id_list(r_keys);
      const auto out = pl::render_stage(page, style, keys);
      cob::write_file_bytes(r_out, out.png);
      print({{"role", cob::render::role_name(out.role)},
             {"boxes", out.boxes_rendered},
             {"sha256", cob::backend::sha256_hex(out.png)},
             {"out", r_out}});
    } else if (*infer) {
      auto cfg = load(g);
      if (!i_backend.empty()) {
        if (i_backend != "mock" && i_backend != "remote") {
          throw cob::ConfigError("--backend must be mock or remote");
        }
        cfg.backend.kind = i_backend;
      }
      if (!i_behavior.empty()) cfg.backend.behavior = i_behavior;
      log_config(cfg);
      const auto mode = pl::parse_mode(i_mode);
      auto model = cob::config::make_backend(cfg.backend);
      const std::string out =
          i_out.empty() ? (std::filesystem::path(cfg.outputs_dir) / i_dataset).string() : i_out;
      const auto sum = pl::run_infer(cfg, i_dataset, mode, *model, out);
      print({{"samples", sum.samples},
             {"fallbacks", sum.fallbacks},
             {"calls", sum.calls},
             {"prompt_tokens", sum.prompt_tokens},
             {"image_tokens", sum.image_tokens},
             {"output_tokens", sum.output_tokens},
             {"out", out}});
    } else if (*annotate) {
      auto cfg = load(g);
      if (!g_behavior.empty()) cfg.annotator.behavior = g_behavior;
      log_config(cfg);
      auto model = cob::config::make_backend(cfg.annotator);
      const std::string out =
          g_out.empty()
              ? (std::filesystem::path(cfg.outputs_dir) / (g_dataset + ".annotator_calls.jsonl")).string()
              : g_out;
      const auto n = pl::run_annotate(cfg, g_dataset, *model, out);
      print({{"images", n}, {"out", out}});
    } else if (*qa) {
      const auto cfg = load(g);
      log_config(cfg);
      const std::string calls =
          g_calls.empty()
              ? (std::filesystem::path(cfg.outputs_dir) / (g_dataset + ".annotator_calls.jsonl")).string()
              : g_calls;
      const auto sum = pl::run_qa(cfg, g_dataset, calls);
      print({{"accepted", sum.accepted},
             {"queued_for_review", sum.queued},
             {"skipped", sum.skipped},
             {"failed_checks", sum.failed_checks},
             {"manifest", cob::store::to_json(sum.manifest)}});
    } else if (*enabling) {
      const auto cfg = load(g);
      log_config(cfg);
      const std::string out =
          g_out.empty()
              ? (std::filesystem::path(cfg.outputs_dir) / (g_dataset + ".enabling.jsonl")).string()
              : g_out;
      const auto sum = pl::run_enabling(cfg, g_dataset, out, cfg.seed, g_cap.value_or(cfg.box_id_cap));
      for (const auto& w : sum.warnings) std::cerr << "warning: " << w << "\n";
      print({{"box_id", sum.box_id}, {"box_query", sum.box_query}, {"out", out}});
    } else if (*ev) {
      const auto metric = cob::eval::parse_metric(e_metric);
      cob::eval::EvalOptions opt;
      if (std::filesystem::exists(g.config_path)) {
        const auto cfg = load(g);
        log_config(cfg);
        opt = pl::eval_options(cfg, e_dataset);
      } else if (!e_dataset.empty()) {
        throw cob::ConfigError("--dataset needs a config file");
      }
      const auto rep = pl::run_eval(opt, metric, e_pred, e_gold, e_out);
      print(cob::eval::report_summary(rep));
    } else if (*serve) {
      auto cfg = load(g);
      if (!s_host.empty()) cfg.service_host = s_host;
      if (s_port) cfg.service_port = *s_port;
      log_config(cfg);
      cfg.dataset(s_dataset);
      const auto paths = pl::dataset_paths(cfg, s_dataset);
      std::filesystem::create_directories(paths.dir);
      cob::store::RecordStore records(paths);
      cob::store::ReviewQueue queue(paths.review(), records);
      cob::service::ServiceConfig sc{cfg.service_host, cfg.service_port, cfg.service_token,
                                     cfg.style};
      cob::service::ReviewService svc(queue, sc);
      const int port = svc.bind();
      std::signal(SIGTERM, on_signal);
      std::signal(SIGINT, on_signal);
      std::cerr << "listening on " << cfg.service_host << ":" << port << std::endl;
      std::thread watcher([&] {
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        svc.stop();
      });
      svc.run();
      g_stop = 1;
      watcher.join();
      const auto m = cob::store::write_manifest(paths);
      const auto c = queue.counts();
      std::cerr << "shutdown: pending " << c.pending << ", records " << m.question_count << std::endl;
    }
  } catch (const cob::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cob::exit_code_for(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
