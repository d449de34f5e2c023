// SPDX-License-Identifier: Apache-2.0
#include "ovl/task_graph.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace ovl {

bool Condition::holds(std::int64_t i) const {
  switch (op) {
    case Op::kAlways: return true;
    case Op::kGreater: return i > value;
    case Op::kEqual: return i == value;
  }
  return false;
}

std::string Condition::to_string() const {
  switch (op) {
    case Op::kAlways: return "true";
    case Op::kGreater: return "i > " + std::to_string(value);
    case Op::kEqual: return "i == " + std::to_string(value);
  }
  return "?";
}

RuleSet& RuleSet::declare_kind(const std::string& kind) {
  if (!has_kind(kind)) kinds_.push_back(kind);
  return *this;
}

bool RuleSet::has_kind(const std::string& kind) const {
  return std::find(kinds_.begin(), kinds_.end(), kind) != kinds_.end();
}

RuleSet& RuleSet::depend(const std::string& dependent, const std::string& prerequisite,
                         std::int64_t distance, Condition condition) {
  if (!has_kind(dependent)) throw Error(ErrorCode::kRule, "undeclared task kind `" + dependent + "`");
  if (!has_kind(prerequisite)) throw Error(ErrorCode::kRule, "undeclared task kind `" + prerequisite + "`");
  if (distance < 0) {
    throw Error(ErrorCode::kRule, "negative dependence distance " + std::to_string(distance));
  }
  rules_.push_back({dependent, prerequisite, distance, condition});
  return *this;
}

std::size_t RuleSet::remove(const std::string& dependent, const std::string& prerequisite,
                            std::int64_t distance) {
  const auto before = rules_.size();
  std::erase_if(rules_, [&](const DependenceRule& r) {
    return r.dependent_kind == dependent && r.prerequisite_kind == prerequisite && r.distance == distance;
  });
  return before - rules_.size();
}

// ---------------------------------------------------------------------------

namespace {

// Depth-first search for a back edge; returns the cycle it closes.
std::vector<TaskId> find_cycle(const std::vector<std::vector<TaskId>>& succs) {
  const std::size_t n = succs.size();
  std::vector<int> color(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<TaskId> parent(n, 0);
  for (TaskId root = 0; root < n; ++root) {
    if (color[root]) continue;
    std::vector<std::pair<TaskId, std::size_t>> stack{{root, 0}};
    color[root] = 1;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next < succs[u].size()) {
        const TaskId v = succs[u][next++];
        if (color[v] == 1) {
          std::vector<TaskId> cycle{v};
          for (auto it = stack.rbegin(); it != stack.rend() && it->first != v; ++it) cycle.push_back(it->first);
          std::reverse(cycle.begin() + 1, cycle.end());
          return cycle;
        }
        if (color[v] == 0) {
          color[v] = 1;
          stack.push_back({v, 0});
        }
      } else {
        color[u] = 2;
        stack.pop_back();
      }
    }
  }
  return {};
}

}  // namespace

TaskGraph::TaskGraph(std::vector<TaskMeta> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  const std::size_t n = nodes_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes_[i].id != i) throw Error(ErrorCode::kInvocation, "task ids must be dense and in order");
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  preds_.assign(n, {});
  succs_.assign(n, {});
  for (const Edge& e : edges_) {
    if (e.pre >= n || e.dep >= n) throw Error(ErrorCode::kInvocation, "edge references unknown task");
    if (std::find(succs_[e.pre].begin(), succs_[e.pre].end(), e.dep) == succs_[e.pre].end()) {
      succs_[e.pre].push_back(e.dep);
      preds_[e.dep].push_back(e.pre);
    }
  }

  // Kahn's algorithm, smallest ready id first.
  std::vector<std::size_t> indegree(n);
  for (std::size_t i = 0; i < n; ++i) indegree[i] = preds_[i].size();
  std::set<TaskId> ready;
  for (TaskId i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  while (!ready.empty()) {
    const TaskId u = *ready.begin();
    ready.erase(ready.begin());
    topo_.push_back(u);
    for (TaskId v : succs_[u]) {
      if (--indegree[v] == 0) ready.insert(v);
    }
  }
  if (topo_.size() != n) {
    std::vector<TaskId> cycle = find_cycle(succs_);
    std::string text;
    for (TaskId id : cycle) text += nodes_[id].kind + "(" + std::to_string(nodes_[id].iteration) + ") -> ";
    if (!cycle.empty()) text += nodes_[cycle.front()].kind + "(" + std::to_string(nodes_[cycle.front()].iteration) + ")";
    throw CyclicDependenceError(std::move(cycle), "cyclic dependence: " + text);
  }

  const std::size_t words = (n + 63) / 64;
  reach_.assign(n, std::vector<std::uint64_t>(words, 0));
  for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
    auto& row = reach_[*it];
    for (TaskId v : succs_[*it]) {
      row[v / 64] |= std::uint64_t{1} << (v % 64);
      for (std::size_t w = 0; w < words; ++w) row[w] |= reach_[v][w];
    }
  }
}

bool TaskGraph::reaches(TaskId from, TaskId to) const {
  return (reach_.at(from)[to / 64] >> (to % 64)) & 1u;
}

std::vector<std::pair<TaskId, TaskId>> TaskGraph::edge_pairs() const {
  std::set<std::pair<TaskId, TaskId>> pairs;
  for (const Edge& e : edges_) pairs.insert({e.pre, e.dep});
  return {pairs.begin(), pairs.end()};
}

TaskGraph build_task_graph(std::vector<TaskMeta> tasks, const RuleSet& rules) {
  std::map<std::pair<std::string, std::int64_t>, std::vector<TaskId>> by_kind;
  std::map<std::uint32_t, std::vector<TaskId>> by_queue;
  for (const TaskMeta& t : tasks) {
    by_kind[{t.kind, t.iteration}].push_back(t.id);
    by_queue[t.queue].push_back(t.id);
  }

  std::vector<Edge> edges;
  for (const DependenceRule& rule : rules.rules()) {
    for (const TaskMeta& t : tasks) {
      if (t.kind != rule.dependent_kind || !rule.condition.holds(t.iteration)) continue;
      auto it = by_kind.find({rule.prerequisite_kind, t.iteration - rule.distance});
      if (it == by_kind.end()) continue;  // prerequisite instance absent: no edge
      for (TaskId pre : it->second) {
        if (pre != t.id) edges.push_back({pre, t.id, EdgeSource::kRule});
      }
    }
  }
  for (auto& [queue, ids] : by_queue) {
    std::sort(ids.begin(), ids.end());
    for (std::size_t k = 1; k < ids.size(); ++k) edges.push_back({ids[k - 1], ids[k], EdgeSource::kQueueOrder});
  }
  return TaskGraph(std::move(tasks), std::move(edges));
}

std::vector<std::pair<TaskId, TaskId>> ConflictReport::pairs() const {
  std::set<std::pair<TaskId, TaskId>> out;
  for (const Conflict& c : conflicts) out.insert({c.first, c.second});
  return {out.begin(), out.end()};
}

ConflictReport check_dependence_sufficiency(const TaskGraph& graph) {
  ConflictReport report;
  const auto& nodes = graph.nodes();
  for (TaskId a = 0; a < nodes.size(); ++a) {
    for (TaskId b = a + 1; b < nodes.size(); ++b) {
      bool ordered_known = false;
      bool ordered = false;
      for (const AccessSet& sa : nodes[a].access) {
        for (const AccessSet& sb : nodes[b].access) {
          if (!conflicts(sa, sb)) continue;
          if (!ordered_known) {
            ordered = graph.reaches(a, b) || graph.reaches(b, a);
            ordered_known = true;
          }
          if (!ordered) report.conflicts.push_back({a, b, sa, sb, intersection(sa, sb)});
        }
      }
    }
  }
  return report;
}

std::string describe(const Conflict& c, const TaskGraph& graph) {
  auto name = [&](TaskId id) {
    const TaskMeta& t = graph.nodes()[id];
    return t.kind + "(" + std::to_string(t.iteration) + ")#" + std::to_string(id);
  };
  std::string ranges;
  for (const Range& r : c.overlap) ranges += "[" + std::to_string(r.begin) + "," + std::to_string(r.end) + ")";
  return name(c.first) + " " + to_string(c.first_access.mode) + " vs " + name(c.second) + " " +
         to_string(c.second_access.mode) + " on buffer " + std::to_string(c.first_access.buffer) + " " + ranges;
}

}  // namespace ovl
