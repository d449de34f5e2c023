// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ovl/overlay.hpp"
#include "ovl/task_graph.hpp"

namespace ovl {

struct TraceRecord {
  TaskId id = 0;
  std::string kind;
  std::int64_t iteration = 0;
  std::uint32_t queue = 0;
  std::uint64_t vstart = 0;
  std::uint64_t vend = 0;
  std::uint32_t worker = 0;
  /// Feature-map shape the task produced (CNN kernels). In-memory only.
  Shape output_shape;
};

struct ExecutionTrace {
  std::vector<TraceRecord> records;  // ordered by (vstart, id)
  std::vector<std::pair<TaskId, TaskId>> edges;
};

struct RunOptions {
  std::size_t workers = 1;
  /// Run even when the dependence-sufficiency check reports conflicts.
  bool unsafe = false;
};

/// Virtual duration of a task: max(1, flops / 10^6).
std::uint64_t virtual_duration(std::uint64_t flops);

/// Executes every queued task of `overlay` exactly once. A task is
/// dispatched when all its graph predecessors have finished and it is at
/// the head of its queue; each queue runs serially and at most
/// `options.workers` tasks are in flight.
///
/// Dispatch order and the reported virtual times follow a deterministic
/// list schedule over estimated task durations; kernel bodies run on a pool
/// of `options.workers` threads. A kernel error stops further dispatch and
/// surfaces as TaskFailedError naming the task. Without `unsafe`, a
/// non-empty conflict report aborts with kUnsafeSchedule before anything
/// runs.
template <class T>
ExecutionTrace run(Overlay<T>& overlay, const TaskGraph& graph, const RunOptions& options);

/// Newline-delimited JSON: one record per task, then one edges line. An
/// empty trace writes nothing.
void emit_trace(const ExecutionTrace& trace, std::ostream& out);
void emit_trace(const ExecutionTrace& trace, const std::string& path);

/// Inverse of emit_trace. Throws kParse on malformed input.
ExecutionTrace parse_trace(std::istream& in);
ExecutionTrace parse_trace_file(const std::string& path);

struct TraceSummary {
  std::size_t tasks = 0;
  std::uint64_t span = 0;
  std::uint64_t critical_path = 0;
  std::size_t max_concurrency = 0;
  std::map<std::uint32_t, double> queue_utilization;  // busy / span
  std::map<std::uint32_t, std::size_t> queue_tasks;
  /// Busy time over span * max_concurrency.
  double worker_utilization = 0.0;
  /// Human-readable violations; empty when the trace is a valid schedule.
  std::vector<std::string> violations;

  bool valid() const { return violations.empty(); }
};

/// Checks the trace is a valid schedule of its own edge list (linear
/// extension, non-overlapping FIFO queues, well-formed intervals) and
/// computes utilization figures.
TraceSummary summarize_trace(const ExecutionTrace& trace);

}  // namespace ovl
