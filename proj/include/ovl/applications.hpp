// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "ovl/overlay.hpp"
#include "ovl/runtime.hpp"
#include "ovl/task_graph.hpp"
#include "ovl/vgg_model.hpp"

namespace ovl {

/// Tasks a driver enqueued together with the dependence rules over their
/// kinds.
struct GeneratedTasks {
  std::vector<TaskHandle> tasks;
  RuleSet rules;
};

// ---------------------------------------------------------------------------
// Blocked LU

template <class T>
struct LuProblem {
  BufferPtr<T> a;     // (n*m) x (n*m), overwritten with packed L\U
  std::size_t n = 0;  // blocks along the diagonal
  std::size_t m = 0;  // block size
};

/// A = uniform(-1, 1) + (n*m) I, strictly diagonally dominant.
template <class T>
LuProblem<T> make_lu_problem(std::size_t n, std::size_t m, std::uint64_t seed);

/// Enqueues, for i = 0..n-1:
///   Task0(i) on queue 0 with A_II
///   Task1(i) on queue 1 with ROW_PANEL           (i < n-1 only)
///   Task2(i) on queue 2 with COLUMN_PANEL        (i < n-1 only)
///   Task3(i) on queue 3 with TRAILING, COLUMN_PANEL1, ROW_PANEL1, 1, -1, 1
///                                                (i < n-1 only)
/// At i = n-1 the panel and trailing crops would be empty, so those tasks
/// are not generated. Rules: Task0 <- Task3 (d=1, i>0); Task1 <- Task0;
/// Task2 <- Task0; Task3 <- Task1, Task2 (all d=0).
template <class T>
GeneratedTasks lu_generate_tasks(const LuProblem<T>& problem, Overlay<T>& overlay);

/// Factors problem.a in place on an LU overlay. Returns the execution trace.
template <class T>
ExecutionTrace lu_decompose(const LuProblem<T>& problem, Overlay<T>& overlay, const RunOptions& options);
template <class T>
ExecutionTrace lu_decompose(const LuProblem<T>& problem, std::size_t workers);

// ---------------------------------------------------------------------------
// VGG pipeline

/// Input X is H x W x C x batch; Y is output_rows() x batch. Each map i gets
/// the 21-task sequence conv0 conv1 pool0 conv2 conv3 pool1 conv4-6 pool2
/// conv7-9 pool3 conv10-12 pool4 fc0 fc1 fc2, with conv0 reading X, pool4
/// writing column i of Y, FC layers working in place on column i of Y, and
/// everything in between passing through the feature buffer.
template <class T>
GeneratedTasks vgg_generate_tasks(const VggConfig& config, const BufferPtr<T>& x, const BufferPtr<T>& y,
                                  const VggWeights<T>& weights, Overlay<T>& overlay);

template <class T>
struct VggResult {
  BufferPtr<T> output;  // fc.back() x batch, no softmax
  ExecutionTrace trace;
};

template <class T>
VggResult<T> vgg_forward(const VggConfig& config, const BufferPtr<T>& x, const VggWeights<T>& weights,
                         Overlay<T>& overlay, const RunOptions& options);
template <class T>
VggResult<T> vgg_forward(const VggConfig& config, const BufferPtr<T>& x, const VggWeights<T>& weights,
                         std::size_t workers);

}  // namespace ovl
