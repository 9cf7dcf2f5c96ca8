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

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cob {

// Every error raised by the library derives from Error and carries a class
// that the command-line tool maps onto its exit code.
enum class ErrorClass {
  kInternal,
  kConfig,
  kInputFormat,
  kBackend,
  kValidation,
  kService,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorClass::kConfig, "config error: " + what) {}
};

// Malformed input file. `line` is 1-based, 0 when not line-oriented.
class FormatError : public Error {
 public:
  FormatError(const std::string& source, std::size_t line,
              const std::string& what)
      : Error(ErrorClass::kInputFormat, Compose(source, line, what)),
        source_(source),
        line_(line) {}
  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string Compose(const std::string& source, std::size_t line,
                             const std::string& what) {
    std::string out = "format error";
    if (!source.empty()) out += " in " + source;
    if (line > 0) out += " at line " + std::to_string(line);
    return out + ": " + what;
  }
  std::string source_;
  std::size_t line_;
};

// A syntactically valid record whose content is unusable (e.g. a box that
// clips to nothing).
class RecordError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Stored record fails its invariants on load.
class CorruptRecordError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what)
      : Error(ErrorClass::kValidation, "parameter error: " + what) {}
};

class BindingError : public Error {
 public:
  explicit BindingError(const std::string& what)
      : Error(ErrorClass::kValidation, "binding error: " + what) {}
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> failed = {})
      : Error(ErrorClass::kValidation, "validation error: " + what),
        failed_checks_(std::move(failed)) {}
  const std::vector<std::string>& failed_checks() const noexcept {
    return failed_checks_;
  }

 private:
  std::vector<std::string> failed_checks_;
};

class JoinError : public Error {
 public:
  explicit JoinError(std::vector<std::string> missing)
      : Error(ErrorClass::kValidation, Compose(missing)),
        missing_(std::move(missing)) {}
  const std::vector<std::string>& missing_ids() const noexcept {
    return missing_;
  }

 private:
  static std::string Compose(const std::vector<std::string>& missing) {
    std::string out = "join error: unresolved sample ids:";
    for (const auto& id : missing) out += " " + id;
    return out;
  }
  std::vector<std::string> missing_;
};

class FieldTableError : public Error {
 public:
  explicit FieldTableError(const std::string& field)
      : Error(ErrorClass::kValidation,
              "field-table error: unknown field '" + field + "'") {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& what)
      : Error(ErrorClass::kValidation, "state error: " + what) {}
};

// A verdict that disagrees with the one already recorded.
class ConflictError : public StateError {
 public:
  using StateError::StateError;
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& what)
      : Error(ErrorClass::kValidation, "not found: " + what) {}
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what)
      : Error(ErrorClass::kBackend, what) {}
};

class BackendUnavailableError : public BackendError {
 public:
  BackendUnavailableError(const std::string& what, int attempts)
      : BackendError("backend unavailable after " + std::to_string(attempts) +
                     " attempt(s): " + what),
        attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class CapabilityError : public BackendError {
 public:
  explicit CapabilityError(const std::string& what)
      : BackendError("capability error: " + what) {}
};

class ServiceError : public Error {
 public:
  explicit ServiceError(const std::string& what)
      : Error(ErrorClass::kService, "service error: " + what) {}
};

inline int exit_code_for(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::kConfig: return 2;
    case ErrorClass::kInputFormat: return 3;
    case ErrorClass::kBackend: return 4;
    case ErrorClass::kValidation: return 5;
    case ErrorClass::kService: return 6;
    case ErrorClass::kInternal: break;
  }
  return 1;
}

}  // namespace cob
