// Copyright 2026 The Pushplan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PUSHPLAN_ERRORS_HPP_
#define PUSHPLAN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace pushplan {

// Process exit codes used by the command-line tool.
enum class ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

// Bad flags, malformed or unknown config keys.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ExitCode::kUsage, what) {}
};

// Missing/corrupt dataset or checkpoint, I/O failure.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::kData, what) {}
};

// A dataset record that fails validation. `record` is the offending index.
class RecordError : public DataError {
 public:
  RecordError(long record, const std::string& what)
      : DataError("record " + std::to_string(record) + ": " + what),
        record_(record) {}
  long record() const { return record_; }

 private:
  long record_;
};

// NaN/Inf during training, failed gradient check, shape mismatch.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ExitCode::kNumerical, what) {}
};

class ShapeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Rejection sampling could not place the objects.
class PlacementError : public Error {
 public:
  explicit PlacementError(const std::string& what)
      : Error(ExitCode::kData, what) {}
};

}  // namespace pushplan

#endif  // PUSHPLAN_ERRORS_HPP_
