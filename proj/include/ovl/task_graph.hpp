// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ovl/overlay.hpp"

namespace ovl {

/// Guard over the dependent task's iteration index.
struct Condition {
  enum class Op { kAlways, kGreater, kEqual };

  Op op = Op::kAlways;
  std::int64_t value = 0;

  static Condition always() { return {}; }
  static Condition greater(std::int64_t c) { return {Op::kGreater, c}; }
  static Condition equal(std::int64_t c) { return {Op::kEqual, c}; }

  bool holds(std::int64_t i) const;
  std::string to_string() const;
  bool operator==(const Condition&) const = default;
};

/// Task `dependent_kind` at iteration i depends on `prerequisite_kind` at
/// iteration i - distance, whenever condition(i) holds.
struct DependenceRule {
  std::string dependent_kind;
  std::string prerequisite_kind;
  std::int64_t distance = 0;
  Condition condition;

  bool operator==(const DependenceRule&) const = default;
};

class RuleSet {
 public:
  RuleSet& declare_kind(const std::string& kind);
  bool has_kind(const std::string& kind) const;
  const std::vector<std::string>& kinds() const { return kinds_; }

  /// Records a rule. Throws kRule for an undeclared kind or a negative
  /// distance. Returns *this so declarations chain.
  RuleSet& depend(const std::string& dependent, const std::string& prerequisite, std::int64_t distance,
                  Condition condition = Condition::always());

  /// Drops every rule matching (dependent, prerequisite, distance).
  /// Returns how many were dropped.
  std::size_t remove(const std::string& dependent, const std::string& prerequisite, std::int64_t distance);

  const std::vector<DependenceRule>& rules() const { return rules_; }

 private:
  std::vector<std::string> kinds_;
  std::vector<DependenceRule> rules_;
};

enum class EdgeSource { kRule, kQueueOrder };

struct Edge {
  TaskId pre = 0;
  TaskId dep = 0;
  EdgeSource source = EdgeSource::kRule;

  auto operator<=>(const Edge&) const = default;
};

/// Tasks plus prerequisite -> dependent edges. Always acyclic once built.
class TaskGraph {
 public:
  TaskGraph() = default;
  TaskGraph(std::vector<TaskMeta> nodes, std::vector<Edge> edges);

  const std::vector<TaskMeta>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t size() const { return nodes_.size(); }

  const std::vector<TaskId>& predecessors(TaskId id) const { return preds_[id]; }
  const std::vector<TaskId>& successors(TaskId id) const { return succs_[id]; }
  const std::vector<TaskId>& topological_order() const { return topo_; }

  /// True when a non-empty path leads from `from` to `to`.
  bool reaches(TaskId from, TaskId to) const;

  /// Distinct (pre, dep) pairs, sorted.
  std::vector<std::pair<TaskId, TaskId>> edge_pairs() const;

 private:
  std::vector<TaskMeta> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<TaskId>> preds_;
  std::vector<std::vector<TaskId>> succs_;
  std::vector<TaskId> topo_;
  std::vector<std::vector<std::uint64_t>> reach_;  // bit rows of the transitive closure
};

/// Node ids must be 0..n-1 in enqueue order. Adds every rule edge whose
/// prerequisite instance exists and queue-order chains per queue. Throws
/// CyclicDependenceError with a witness cycle.
TaskGraph build_task_graph(std::vector<TaskMeta> tasks, const RuleSet& rules);

struct Conflict {
  TaskId first = 0;  // first < second
  TaskId second = 0;
  AccessSet first_access;
  AccessSet second_access;
  std::vector<Range> overlap;
};

struct ConflictReport {
  std::vector<Conflict> conflicts;

  bool empty() const { return conflicts.empty(); }
  /// Distinct unordered task pairs involved, sorted.
  std::vector<std::pair<TaskId, TaskId>> pairs() const;
};

/// Reports every pair of tasks with conflicting access sets that the graph
/// leaves unordered.
ConflictReport check_dependence_sufficiency(const TaskGraph& graph);

std::string describe(const Conflict& conflict, const TaskGraph& graph);

}  // namespace ovl
