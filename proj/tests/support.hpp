// SPDX-License-Identifier: Apache-2.0
#pragma once

// Helpers shared by the test binaries. The race checker here works on
// individual matrix elements derived from block geometry, not on the
// access sets the library computes, so it can catch mistakes in those.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ovl/applications.hpp"
#include "ovl/runtime.hpp"
#include "ovl/task_graph.hpp"

namespace ovl::testing {

/// Element footprint of one LU task: (row, col) -> writes?
using Footprint = std::map<std::pair<std::size_t, std::size_t>, bool>;

inline void touch_blocks(Footprint& fp, std::size_t m, std::size_t r0, std::size_t r1, std::size_t c0,
                         std::size_t c1, bool write) {
  for (std::size_t r = r0 * m; r < (r1 + 1) * m; ++r) {
    for (std::size_t c = c0 * m; c < (c1 + 1) * m; ++c) {
      bool& w = fp[{r, c}];
      w = w || write;
    }
  }
}

/// Which elements each kind of LU task reads and writes at step i, straight
/// from the block equations.
inline Footprint lu_footprint(const std::string& kind, std::size_t i, std::size_t n, std::size_t m) {
  Footprint fp;
  if (kind == "Task0") {
    touch_blocks(fp, m, i, i, i, i, true);
  } else if (kind == "Task1") {
    touch_blocks(fp, m, i, i, i, i, false);
    touch_blocks(fp, m, i, i, i + 1, n - 1, true);
  } else if (kind == "Task2") {
    touch_blocks(fp, m, i, i, i, i, false);
    touch_blocks(fp, m, i + 1, n - 1, i, i, true);
  } else if (kind == "Task3") {
    touch_blocks(fp, m, i + 1, n - 1, i, i, false);
    touch_blocks(fp, m, i, i, i + 1, n - 1, false);
    touch_blocks(fp, m, i + 1, n - 1, i + 1, n - 1, true);
  }
  return fp;
}

/// Plain DFS reachability over an edge list.
inline bool path_exists(const std::vector<std::pair<TaskId, TaskId>>& edges, TaskId from, TaskId to) {
  std::vector<TaskId> stack{from};
  std::set<TaskId> seen{from};
  while (!stack.empty()) {
    const TaskId u = stack.back();
    stack.pop_back();
    if (u == to) return true;
    for (const auto& [a, b] : edges) {
      if (a == u && seen.insert(b).second) stack.push_back(b);
    }
  }
  return false;
}

/// Unordered task pairs that touch a common element, at least one writing,
/// with no path between them.
inline std::set<std::pair<TaskId, TaskId>> lu_element_races(const TaskGraph& graph, std::size_t n, std::size_t m) {
  const auto& nodes = graph.nodes();
  std::vector<Footprint> fps;
  for (const TaskMeta& t : nodes) fps.push_back(lu_footprint(t.kind, static_cast<std::size_t>(t.iteration), n, m));
  const auto edges = graph.edge_pairs();
  std::set<std::pair<TaskId, TaskId>> races;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (std::size_t b = a + 1; b < nodes.size(); ++b) {
      bool clash = false;
      for (const auto& [elem, wa] : fps[a]) {
        const auto it = fps[b].find(elem);
        if (it != fps[b].end() && (wa || it->second)) {
          clash = true;
          break;
        }
      }
      if (!clash) continue;
      const TaskId ia = nodes[a].id, ib = nodes[b].id;
      if (!path_exists(edges, ia, ib) && !path_exists(edges, ib, ia)) races.insert({std::min(ia, ib), std::max(ia, ib)});
    }
  }
  return races;
}

inline std::set<std::pair<TaskId, TaskId>> as_set(const std::vector<std::pair<TaskId, TaskId>>& v) {
  std::set<std::pair<TaskId, TaskId>> s;
  for (const auto& [a, b] : v) s.insert({std::min(a, b), std::max(a, b)});
  return s;
}

/// Schedule properties checked directly against a graph: every task exactly
/// once, edges respected in virtual time, each queue serial and FIFO.
inline std::vector<std::string> schedule_violations(const ExecutionTrace& trace, const TaskGraph& graph) {
  std::vector<std::string> bad;
  std::map<TaskId, const TraceRecord*> by_id;
  for (const TraceRecord& r : trace.records) {
    if (!by_id.emplace(r.id, &r).second) bad.push_back("task " + std::to_string(r.id) + " ran twice");
    if (r.vend < r.vstart) bad.push_back("task " + std::to_string(r.id) + " ends before it starts");
  }
  if (by_id.size() != graph.size()) bad.push_back("trace has " + std::to_string(by_id.size()) + " of " +
                                                  std::to_string(graph.size()) + " tasks");
  for (const Edge& e : graph.edges()) {
    const auto p = by_id.find(e.pre), d = by_id.find(e.dep);
    if (p == by_id.end() || d == by_id.end()) continue;
    if (p->second->vend > d->second->vstart) {
      bad.push_back("edge " + std::to_string(e.pre) + "->" + std::to_string(e.dep) + " violated");
    }
  }
  std::map<std::uint32_t, std::vector<const TraceRecord*>> per_queue;
  for (const TraceRecord& r : trace.records) per_queue[r.queue].push_back(&r);
  for (auto& [q, recs] : per_queue) {
    std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->vstart < b->vstart; });
    for (std::size_t k = 1; k < recs.size(); ++k) {
      if (recs[k - 1]->vend > recs[k]->vstart) bad.push_back("queue " + std::to_string(q) + " overlaps");
      if (recs[k - 1]->id > recs[k]->id) bad.push_back("queue " + std::to_string(q) + " out of FIFO order");
    }
  }
  return bad;
}

/// A random DAG of LU-overlay tasks, each on private buffers so any order
/// is race free. Every task gets its own kind; rule edges only point from
/// lower to higher enqueue index.
struct RandomGraphCase {
  std::vector<BufferPtr<double>> buffers;
  GeneratedTasks gen;
};

inline RandomGraphCase random_lu_overlay_tasks(Overlay<double>& overlay, std::mt19937_64& rng, std::size_t tasks,
                                               double edge_probability) {
  RandomGraphCase out;
  const std::size_t m = 2 + rng() % 3;
  auto dominant = [&](Shape shape) {
    auto b = new_buffer<double>(shape, SeededRandom{-1.0, 1.0, rng()});
    for (std::size_t d = 0; d < std::min(shape[0], shape[1]); ++d) b->at({d, d}) += 4.0 * static_cast<double>(m);
    out.buffers.push_back(b);
    return b;
  };
  for (std::size_t j = 0; j < tasks; ++j) {
    const std::string kind = "t" + std::to_string(j);
    out.gen.rules.declare_kind(kind);
    const auto q = static_cast<std::uint32_t>(rng() % 4);
    switch (q) {
      case 0:
        out.gen.tasks.push_back(overlay.enqueue(0, {BlockView<double>(dominant({m, m}))}, kind, 0));
        break;
      case 1:
        out.gen.tasks.push_back(overlay.enqueue(1, {bcropped(dominant({m, 2 * m}), m, 0, 0, 0, 1)}, kind, 0));
        break;
      case 2:
        out.gen.tasks.push_back(overlay.enqueue(2, {bcropped(dominant({2 * m, m}), m, 0, 1, 0, 0)}, kind, 0));
        break;
      default:
        out.gen.tasks.push_back(overlay.enqueue(3,
                                                {BlockView<double>(dominant({m, m})), BlockView<double>(dominant({m, m})),
                                                 BlockView<double>(dominant({m, m})), 1.0, -1.0, 1.0},
                                                kind, 0));
    }
  }
  std::bernoulli_distribution coin(edge_probability);
  for (std::size_t b = 1; b < tasks; ++b) {
    for (std::size_t a = 0; a < b; ++a) {
      if (coin(rng)) out.gen.rules.depend("t" + std::to_string(b), "t" + std::to_string(a), 0);
    }
  }
  return out;
}

}  // namespace ovl::testing
