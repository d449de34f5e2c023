// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ovl {

enum class ErrorCode {
  kInvalidShape,
  kBlockMisalignment,
  kInvalidCrop,
  kSingularPivot,
  kShape,
  kAliasing,
  kEmptyFeatureBuffer,
  kConfiguration,
  kParse,
  kInvocation,
  kRule,
  kCyclicDependence,
  kUnsafeSchedule,
  kTaskFailed,
  kIo,
};

const char* to_string(ErrorCode code);

/// Base of every error the library raises. The code is stable and is what
/// tests and the CLI branch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class SingularPivotError : public Error {
 public:
  SingularPivotError(std::size_t pivot, const std::string& what)
      : Error(ErrorCode::kSingularPivot, what), pivot_(pivot) {}

  /// Pivot index relative to the factored block.
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class CyclicDependenceError : public Error {
 public:
  CyclicDependenceError(std::vector<std::uint32_t> cycle, const std::string& what)
      : Error(ErrorCode::kCyclicDependence, what), cycle_(std::move(cycle)) {}

  /// Task ids along one cycle; the last id has an edge back to the first.
  const std::vector<std::uint32_t>& cycle() const noexcept { return cycle_; }

 private:
  std::vector<std::uint32_t> cycle_;
};

class TaskFailedError : public Error {
 public:
  TaskFailedError(std::uint32_t task, ErrorCode cause, const std::string& what)
      : Error(ErrorCode::kTaskFailed, what), task_(task), cause_(cause) {}

  std::uint32_t task() const noexcept { return task_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  std::uint32_t task_;
  ErrorCode cause_;
};

}  // namespace ovl
