// SPDX-License-Identifier: Apache-2.0
#include "ovl/applications.hpp"

namespace ovl {

namespace {

void require_ips(const OverlayManifest& manifest, std::initializer_list<const char*> names) {
  bool ok = manifest.interfaces.size() == names.size();
  std::size_t q = 0;
  for (const char* name : names) {
    if (!ok) break;
    ok = manifest.interfaces[q++].ip.name == name;
  }
  if (!ok) throw Error(ErrorCode::kConfiguration, "overlay `" + manifest.name + "` does not provide the required IPs");
}

}  // namespace

template <class T>
LuProblem<T> make_lu_problem(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (n == 0 || m == 0) throw Error(ErrorCode::kConfiguration, "LU needs n >= 1 and m >= 1");
  const std::size_t dim = n * m;
  auto a = new_buffer<T>({dim, dim}, SeededRandom{-1.0, 1.0, seed});
  for (std::size_t i = 0; i < dim; ++i) a->at({i, i}) += static_cast<T>(dim);
  return {a, n, m};
}

template <class T>
GeneratedTasks lu_generate_tasks(const LuProblem<T>& problem, Overlay<T>& overlay) {
  require_ips(overlay.manifest(), {"LU", "TransformRowPanel", "TransformColumnPanel", "GEMM"});
  const std::size_t n = problem.n, m = problem.m;
  if (n < 1 || m < 1) throw Error(ErrorCode::kConfiguration, "LU needs n >= 1 and m >= 1");
  if (!problem.a || problem.a->shape() != Shape{n * m, n * m}) {
    throw Error(ErrorCode::kConfiguration, "LU matrix must be " + std::to_string(n * m) + " x " + std::to_string(n * m));
  }
  const BufferPtr<T>& a = problem.a;

  GeneratedTasks out;
  for (const char* kind : {"Task0", "Task1", "Task2", "Task3"}) out.rules.declare_kind(kind);

  for (std::size_t i = 0; i < n; ++i) {
    const auto it = static_cast<std::int64_t>(i);
    out.tasks.push_back(overlay.enqueue(0, {bcropped(a, m, i, i, i, i)}, "Task0", it));
    if (i + 1 == n) break;
    const BlockView<T> row_panel = bcropped(a, m, i, i, i, n - 1);
    const BlockView<T> column_panel = bcropped(a, m, i, n - 1, i, i);
    const BlockView<T> column_panel1 = bcropped(a, m, i + 1, n - 1, i, i);
    const BlockView<T> row_panel1 = bcropped(a, m, i, i, i + 1, n - 1);
    const BlockView<T> trailing = bcropped(a, m, i + 1, n - 1, i + 1, n - 1);
    out.tasks.push_back(overlay.enqueue(1, {row_panel}, "Task1", it));
    out.tasks.push_back(overlay.enqueue(2, {column_panel}, "Task2", it));
    out.tasks.push_back(
        overlay.enqueue(3, {trailing, column_panel1, row_panel1, 1.0, -1.0, 1.0}, "Task3", it));
  }

  out.rules.depend("Task0", "Task3", 1, Condition::greater(0));
  out.rules.depend("Task1", "Task0", 0);
  out.rules.depend("Task2", "Task0", 0);
  out.rules.depend("Task3", "Task1", 0).depend("Task3", "Task2", 0);
  return out;
}

template <class T>
ExecutionTrace lu_decompose(const LuProblem<T>& problem, Overlay<T>& overlay, const RunOptions& options) {
  GeneratedTasks gen = lu_generate_tasks(problem, overlay);
  const TaskGraph graph = build_task_graph(overlay.task_metas(), gen.rules);
  ExecutionTrace trace = run(overlay, graph, options);
  overlay.reset_tasks();
  return trace;
}

template <class T>
ExecutionTrace lu_decompose(const LuProblem<T>& problem, std::size_t workers) {
  Overlay<T> overlay(lu_overlay_manifest());
  return lu_decompose(problem, overlay, RunOptions{workers, false});
}

template <class T>
GeneratedTasks vgg_generate_tasks(const VggConfig& config, const BufferPtr<T>& x, const BufferPtr<T>& y,
                                  const VggWeights<T>& weights, Overlay<T>& overlay) {
  require_ips(overlay.manifest(), {"Convolution", "Maxpool"});
  config.validate();
  auto shape_error = [](const std::string& what) { throw Error(ErrorCode::kConfiguration, what); };
  if (!x || x->shape() != Shape{config.height, config.width, config.channels, config.batch}) {
    shape_error("VGG input must be H x W x C x batch");
  }
  if (!y || y->shape() != Shape{config.output_rows(), config.batch}) shape_error("VGG output buffer has wrong shape");
  for (std::size_t s = 0; s < kStages; ++s) {
    if (!weights.conv[s] || weights.conv[s]->shape() != config.conv_group_shape(s)) {
      shape_error("conv weight group " + std::to_string(s) + " has wrong shape");
    }
  }
  for (std::size_t f = 0; f < kFcLayers; ++f) {
    if (!weights.fc[f] || weights.fc[f]->shape() != config.fc_shape(f)) {
      shape_error("FC weight " + std::to_string(f) + " has wrong shape");
    }
  }

  GeneratedTasks out;
  for (std::size_t l = 0; l < kConvLayers; ++l) out.rules.declare_kind(conv_kind(l));
  for (std::size_t p = 0; p < kStages; ++p) out.rules.declare_kind(pool_kind(p));
  for (std::size_t f = 0; f < kFcLayers; ++f) out.rules.declare_kind(fc_kind(f));

  const BlockView<T> dummy_in(x);
  const BlockView<T> dummy_out(y);
  auto weight = [&](std::size_t layer) {
    const auto [stage, index] = VggConfig::conv_position(layer);
    return cropped(cropped(weights.conv[stage], 4, index, 1), 2, 0, config.conv_in_channels(layer));
  };

  for (std::size_t i = 0; i < config.batch; ++i) {
    const auto it = static_cast<std::int64_t>(i);
    const BlockView<T> input = cropped(x, 3, i, 1);
    const BlockView<T> output = cropped(y, 1, i, 1);
    std::size_t layer = 0;
    for (std::size_t stage = 0; stage < kStages; ++stage) {
      for (std::size_t k = 0; k < kConvsPerStage[stage]; ++k, ++layer) {
        const bool first = layer == 0;
        out.tasks.push_back(overlay.enqueue(
            0, {first ? input : dummy_in, dummy_out, weight(layer), !first, true, true, false}, conv_kind(layer), it));
      }
      const bool last = stage + 1 == kStages;
      out.tasks.push_back(overlay.enqueue(1, {last ? output : dummy_out, !last}, pool_kind(stage), it));
    }
    for (std::size_t f = 0; f < kFcLayers; ++f) {
      out.tasks.push_back(
          overlay.enqueue(0, {output, output, BlockView<T>(weights.fc[f]), false, false, true, true}, fc_kind(f), it));
    }
  }

  // Cross-queue hand-offs through the feature buffer, then into DDR.
  std::size_t last_conv = 0;
  for (std::size_t stage = 0; stage < kStages; ++stage) {
    last_conv += kConvsPerStage[stage];
    out.rules.depend(pool_kind(stage), conv_kind(last_conv - 1), 0);
    if (stage + 1 < kStages) out.rules.depend(conv_kind(last_conv), pool_kind(stage), 0);
  }
  out.rules.depend(fc_kind(0), pool_kind(kStages - 1), 0);
  return out;
}

template <class T>
VggResult<T> vgg_forward(const VggConfig& config, const BufferPtr<T>& x, const VggWeights<T>& weights,
                         Overlay<T>& overlay, const RunOptions& options) {
  config.validate();
  auto y = new_buffer<T>({config.output_rows(), config.batch});
  GeneratedTasks gen = vgg_generate_tasks(config, x, y, weights, overlay);
  const TaskGraph graph = build_task_graph(overlay.task_metas(), gen.rules);
  VggResult<T> result;
  result.trace = run(overlay, graph, options);
  overlay.reset_tasks();

  const std::size_t classes = config.fc.back();
  result.output = new_buffer<T>({classes, config.batch});
  for (std::size_t r = 0; r < classes; ++r) {
    for (std::size_t i = 0; i < config.batch; ++i) result.output->at({r, i}) = y->at({r, i});
  }
  return result;
}

template <class T>
VggResult<T> vgg_forward(const VggConfig& config, const BufferPtr<T>& x, const VggWeights<T>& weights,
                         std::size_t workers) {
  Overlay<T> overlay(vgg_overlay_manifest());
  return vgg_forward(config, x, weights, overlay, RunOptions{workers, false});
}

#define OVL_INSTANTIATE(T)                                                                                 \
  template LuProblem<T> make_lu_problem<T>(std::size_t, std::size_t, std::uint64_t);                       \
  template GeneratedTasks lu_generate_tasks<T>(const LuProblem<T>&, Overlay<T>&);                          \
  template ExecutionTrace lu_decompose<T>(const LuProblem<T>&, Overlay<T>&, const RunOptions&);            \
  template ExecutionTrace lu_decompose<T>(const LuProblem<T>&, std::size_t);                               \
  template GeneratedTasks vgg_generate_tasks<T>(const VggConfig&, const BufferPtr<T>&, const BufferPtr<T>&, \
                                                const VggWeights<T>&, Overlay<T>&);                        \
  template VggResult<T> vgg_forward<T>(const VggConfig&, const BufferPtr<T>&, const VggWeights<T>&,        \
                                       Overlay<T>&, const RunOptions&);                                    \
  template VggResult<T> vgg_forward<T>(const VggConfig&, const BufferPtr<T>&, const VggWeights<T>&, std::size_t);

OVL_INSTANTIATE(float)
OVL_INSTANTIATE(double)

#undef OVL_INSTANTIATE

}  // namespace ovl
