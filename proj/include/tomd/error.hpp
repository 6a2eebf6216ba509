// Copyright 2026 The tomd Authors
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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tomd {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidRotation,
  kDimensionMismatch,
  kShapeMismatch,
  kEmptyDepth,
  kDepthOutOfRange,
  kMissingModality,
  kKernelTooLarge,
  kEmptyDataset,
  kEmptyEvaluation,
  kMissingLux,
  kEmptyMaster,
  kParseError,
  kTooManySegments,
  kUnknownSegmentId,
  kPortInUse,
  kIoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidRotation: return "InvalidRotation";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyDepth: return "EmptyDepth";
    case ErrorCode::kDepthOutOfRange: return "DepthOutOfRange";
    case ErrorCode::kMissingModality: return "MissingModality";
    case ErrorCode::kKernelTooLarge: return "KernelTooLarge";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kEmptyEvaluation: return "EmptyEvaluation";
    case ErrorCode::kMissingLux: return "MissingLux";
    case ErrorCode::kEmptyMaster: return "EmptyMaster";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kTooManySegments: return "TooManySegments";
    case ErrorCode::kUnknownSegmentId: return "UnknownSegmentId";
    case ErrorCode::kPortInUse: return "PortInUse";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : Error(ErrorCode::kParseError,
              "line " + std::to_string(line) + ", field '" + field + "': " +
                  what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace tomd
