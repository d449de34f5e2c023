// SPDX-License-Identifier: Apache-2.0
#include "ovl/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <thread>

namespace ovl {

std::uint64_t virtual_duration(std::uint64_t flops) { return std::max<std::uint64_t>(1, flops / 1'000'000); }

namespace {

class WorkerPool {
 public:
  explicit WorkerPool(std::size_t threads) {
    for (std::size_t i = 0; i < threads; ++i) {
      threads_.emplace_back([this] { loop(); });
    }
  }

  ~WorkerPool() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
  }

  std::future<void> submit(std::function<void()> job) {
    std::packaged_task<void()> task(std::move(job));
    auto fut = task.get_future();
    {
      std::lock_guard lock(mu_);
      jobs_.push_back(std::move(task));
    }
    cv_.notify_one();
    return fut;
  }

 private:
  void loop() {
    while (true) {
      std::packaged_task<void()> job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
        if (jobs_.empty()) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
      }
      job();
    }
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::packaged_task<void()>> jobs_;
  bool stopping_ = false;
  std::vector<std::jthread> threads_;  // last: joined before the queue dies
};

struct Active {
  TaskId id;
  std::uint64_t vend;
};

}  // namespace

template <class T>
ExecutionTrace run(Overlay<T>& overlay, const TaskGraph& graph, const RunOptions& options) {
  const std::size_t n = graph.size();
  std::size_t pending = 0;
  for (std::uint32_t q = 0; q < overlay.queue_count(); ++q) pending += overlay.queue(q).size();
  if (pending != n) {
    throw Error(ErrorCode::kInvocation, "graph has " + std::to_string(n) + " tasks but overlay queues hold " +
                                            std::to_string(pending));
  }
  if (options.workers == 0) throw Error(ErrorCode::kInvocation, "worker count must be >= 1");
  if (!options.unsafe) {
    const ConflictReport report = check_dependence_sufficiency(graph);
    if (!report.empty()) {
      throw Error(ErrorCode::kUnsafeSchedule, std::to_string(report.conflicts.size()) +
                                                  " unordered conflicting accesses, first: " +
                                                  describe(report.conflicts.front(), graph));
    }
  }

  ExecutionTrace trace;
  trace.edges = graph.edge_pairs();
  if (n == 0) return trace;

  std::vector<std::size_t> unfinished_preds(n);
  for (TaskId i = 0; i < n; ++i) unfinished_preds[i] = graph.predecessors(i).size();
  std::vector<std::future<void>> done(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<Shape> shapes(n);
  std::vector<TraceRecord> records(n);
  std::atomic<bool> failed{false};
  std::vector<bool> queue_busy(overlay.queue_count(), false);
  std::vector<Active> active;
  std::uint64_t now = 0;
  std::size_t retired = 0;
  std::optional<TaskId> failed_task;

  WorkerPool pool(options.workers);

  auto wait_for = [&](TaskId id) {
    done[id].wait();
    if (errors[id] && !failed_task) failed_task = id;
    return !errors[id];
  };

  while (retired < n && !failed_task) {
    // Dispatch ready queue heads, lowest queue number first.
    for (std::uint32_t q = 0; q < overlay.queue_count() && active.size() < options.workers; ++q) {
      if (queue_busy[q] || overlay.queue(q).empty()) continue;
      const TaskId id = overlay.queue(q).front();
      if (unfinished_preds[id] != 0) continue;
      bool preds_ok = true;
      for (TaskId p : graph.predecessors(id)) preds_ok = wait_for(p) && preds_ok;
      if (!preds_ok || failed.load()) break;
      overlay.pop(q);
      const std::uint64_t duration = virtual_duration(overlay.estimate_flops(id));
      const TaskMeta& meta = graph.nodes()[id];
      records[id] = TraceRecord{id, meta.kind, meta.iteration, q, now, now + duration, q, {}};
      done[id] = pool.submit([&, id] {
        try {
          shapes[id] = overlay.execute(id);
        } catch (...) {
          errors[id] = std::current_exception();
          failed.store(true);
        }
      });
      queue_busy[q] = true;
      active.push_back({id, now + duration});
    }
    if (failed_task || failed.load()) break;
    if (active.empty()) {
      throw Error(ErrorCode::kInvocation, "scheduler stalled: no dispatchable task (graph disagrees with queues)");
    }

    // Advance virtual time to the earliest completion and retire.
    now = std::min_element(active.begin(), active.end(), [](const Active& a, const Active& b) {
            return a.vend < b.vend;
          })->vend;
    std::vector<TaskId> finishing;
    std::erase_if(active, [&](const Active& a) {
      if (a.vend != now) return false;
      finishing.push_back(a.id);
      return true;
    });
    std::sort(finishing.begin(), finishing.end());
    for (TaskId id : finishing) {
      queue_busy[records[id].queue] = false;
      for (TaskId s : graph.successors(id)) --unfinished_preds[s];
      ++retired;
    }
  }

  // Drain everything in flight; unstarted tasks stay cancelled.
  for (TaskId id = 0; id < n; ++id) {
    if (done[id].valid()) wait_for(id);
  }
  if (failed_task) {
    try {
      std::rethrow_exception(errors[*failed_task]);
    } catch (const Error& e) {
      throw TaskFailedError(*failed_task, e.code(),
                            "task " + std::to_string(*failed_task) + " (" + graph.nodes()[*failed_task].kind +
                                ") failed: " + e.what());
    } catch (const std::exception& e) {
      throw TaskFailedError(*failed_task, ErrorCode::kTaskFailed,
                            "task " + std::to_string(*failed_task) + " failed: " + e.what());
    }
  }

  for (TaskId id = 0; id < n; ++id) records[id].output_shape = std::move(shapes[id]);
  std::sort(records.begin(), records.end(), [](const TraceRecord& a, const TraceRecord& b) {
    return a.vstart != b.vstart ? a.vstart < b.vstart : a.id < b.id;
  });
  trace.records = std::move(records);
  return trace;
}

template ExecutionTrace run<float>(Overlay<float>&, const TaskGraph&, const RunOptions&);
template ExecutionTrace run<double>(Overlay<double>&, const TaskGraph&, const RunOptions&);

}  // namespace ovl
