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

// Line-delimited JSON reading and serialized appending.

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>

#include "cob/error.hpp"
#include "cob/image.hpp"
#include "json.hpp"

namespace cob {

// Calls `fn(json, line_no)` for every non-blank line. Parse failures raise
// FormatError with the 1-based line number.
inline void for_each_jsonl(std::string_view content, const std::string& source,
                           const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    const auto line = content.substr(pos, nl == std::string_view::npos ? std::string_view::npos
                                                                       : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? content.size() : nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    fn(j, line_no);
  }
}

inline void for_each_jsonl_file(const std::string& path,
                                const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  for_each_jsonl(read_file_bytes(path), path, fn);
}

// Appends one compact JSON document per line. Writes from several threads
// are serialized; each line is flushed before append() returns.
class JsonlWriter {
 public:
  explicit JsonlWriter(std::string path, bool truncate = false) : path_(std::move(path)) {
    const auto parent = std::filesystem::path(path_).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    out_.open(path_, std::ios::binary | (truncate ? std::ios::trunc : std::ios::app));
    if (!out_) throw Error(ErrorClass::kInternal, "cannot open " + path_ + " for writing");
  }

  void append(const nlohmann::json& j) { append_line(j.dump()); }

  void append_line(const std::string& line) {
    std::lock_guard lock(mu_);
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw Error(ErrorClass::kInternal, "write to " + path_ + " failed");
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::mutex mu_;
};

}  // namespace cob
