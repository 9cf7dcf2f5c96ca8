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

// Answers one question about one page with the two-stage flow and writes
// the two prompted images next to the trace.
//
//   cob_demo IMAGE LAYOUT BEHAVIOR QUESTION [OUT_DIR]
//
// Example against the test corpus:
//   cob_demo tests/data/mini_corpus/images/doc1.png \
//            tests/data/mini_corpus/layouts/doc1.jsonl \
//            tests/data/mini_corpus/mock/clean.json "What is the invoice number?"

#include <filesystem>
#include <iostream>

#include "cob/backend.hpp"
#include "cob/error.hpp"
#include "cob/image.hpp"
#include "cob/layout.hpp"
#include "cob/orchestrator.hpp"
#include "cob/render.hpp"

int main(int argc, char** argv) {
  if (argc < 5) {
    std::cerr << "usage: " << argv[0] << " IMAGE LAYOUT BEHAVIOR QUESTION [OUT_DIR]\n";
    return 2;
  }
  namespace fs = std::filesystem;
  const fs::path out_dir = argc > 5 ? argv[5] : ".";
  try {
    const cob::Image page = cob::read_image(argv[1]);
    const std::string image_id = fs::path(argv[1]).stem().string();
    const auto set = cob::layout::load_layout(argv[2], image_id, page.width, page.height);
    cob::backend::MockBackend model(cob::backend::ScriptedBehavior::from_file(argv[3]));
    const auto style = cob::render::default_style(page.width, page.height);

    const auto trace = cob::orchestrator::infer_doc_cob(page, set, argv[4], model, style);
    fs::create_directories(out_dir);
    cob::write_file_bytes((out_dir / (image_id + ".s1.png")).string(),
                          cob::render::render_s1_overlay(page, set, style).png);
    if (trace.selection && !trace.selection->empty()) {
      cob::write_file_bytes(
          (out_dir / (image_id + ".s2.png")).string(),
          cob::render::render_s2_mask(page, set, trace.selection->ids, style).png);
    }
    std::cout << cob::orchestrator::to_json(trace).dump(2) << "\n";
    std::cout << "answer: " << trace.answer << "\n";
  } catch (const cob::Error& e) {
    std::cerr << e.what() << "\n";
    return cob::exit_code_for(e.error_class());
  }
  return 0;
}
