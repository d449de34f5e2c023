// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "ovl/applications.hpp"
#include "support.hpp"

using namespace ovl;
using EdgeSet = std::set<std::pair<TaskId, TaskId>>;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ovl::Error");
  return ErrorCode::kIo;
}

EdgeSet edges_of(const TaskGraph& g, EdgeSource source) {
  EdgeSet s;
  for (const Edge& e : g.edges()) {
    if (e.source == source) s.insert({e.pre, e.dep});
  }
  return s;
}

/// Independent enumeration of rule edges: for every rule and every task
/// matching the dependent kind, scan all tasks for the prerequisite.
EdgeSet enumerate_rule_edges(const std::vector<TaskMeta>& tasks, const RuleSet& rules) {
  EdgeSet s;
  for (const DependenceRule& r : rules.rules()) {
    for (const TaskMeta& dep : tasks) {
      if (dep.kind != r.dependent_kind) continue;
      const std::int64_t i = dep.iteration;
      const bool cond = r.condition.op == Condition::Op::kAlways ||
                        (r.condition.op == Condition::Op::kGreater && i > r.condition.value) ||
                        (r.condition.op == Condition::Op::kEqual && i == r.condition.value);
      if (!cond) continue;
      for (const TaskMeta& pre : tasks) {
        if (pre.kind == r.prerequisite_kind && pre.iteration == i - r.distance) s.insert({pre.id, dep.id});
      }
    }
  }
  return s;
}

EdgeSet enumerate_queue_edges(const std::vector<TaskMeta>& tasks) {
  EdgeSet s;
  std::map<std::uint32_t, TaskId> last;
  for (const TaskMeta& t : tasks) {
    if (auto it = last.find(t.queue); it != last.end()) s.insert({it->second, t.id});
    last[t.queue] = t.id;
  }
  return s;
}

struct LuGraph {
  LuProblem<double> problem;
  Overlay<double> overlay{lu_overlay_manifest()};
  GeneratedTasks gen;
  std::vector<TaskMeta> metas;
  TaskGraph graph;

  LuGraph(std::size_t n, std::size_t m, bool drop_cross_rule = false) {
    problem = make_lu_problem<double>(n, m, 7);
    gen = lu_generate_tasks(problem, overlay);
    if (drop_cross_rule) gen.rules.remove("Task0", "Task3", 1);
    metas = overlay.task_metas();
    graph = build_task_graph(metas, gen.rules);
  }
};

}  // namespace

TEST_CASE("conditions") {
  CHECK(Condition::always().holds(-3));
  CHECK(Condition::greater(0).holds(1));
  CHECK_FALSE(Condition::greater(0).holds(0));
  CHECK(Condition::equal(2).holds(2));
  CHECK_FALSE(Condition::equal(2).holds(3));
}

TEST_CASE("rule declarations") {
  RuleSet rs;
  rs.declare_kind("A").declare_kind("B");
  rs.depend("A", "B", 0).depend("A", "B", 1, Condition::greater(0));
  CHECK(rs.rules().size() == 2);
  CHECK(code_of([&] { rs.depend("A", "B", -1); }) == ErrorCode::kRule);
  CHECK(code_of([&] { rs.depend("A", "C", 0); }) == ErrorCode::kRule);
  CHECK(rs.remove("A", "B", 1) == 1);
  CHECK(rs.rules().size() == 1);
}

TEST_CASE("LU graph for n = 2") {
  LuGraph g(2, 2);
  CHECK(g.graph.size() == 5);
  const EdgeSet expected_rule{{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}};
  CHECK(edges_of(g.graph, EdgeSource::kRule) == expected_rule);
  CHECK(edges_of(g.graph, EdgeSource::kQueueOrder) == EdgeSet{{0, 4}});
}

TEST_CASE("LU graph for n = 3: exact nodes and edges") {
  LuGraph g(3, 2);
  REQUIRE(g.graph.size() == 9);
  const std::vector<std::pair<std::string, std::int64_t>> nodes{
      {"Task0", 0}, {"Task1", 0}, {"Task2", 0}, {"Task3", 0}, {"Task0", 1},
      {"Task1", 1}, {"Task2", 1}, {"Task3", 1}, {"Task0", 2}};
  for (TaskId id = 0; id < 9; ++id) {
    CHECK(g.graph.nodes()[id].kind == nodes[id].first);
    CHECK(g.graph.nodes()[id].iteration == nodes[id].second);
  }
  const EdgeSet rule{{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}, {4, 5}, {4, 6}, {5, 7}, {6, 7}, {7, 8}};
  const EdgeSet queue{{0, 4}, {4, 8}, {1, 5}, {2, 6}, {3, 7}};
  CHECK(edges_of(g.graph, EdgeSource::kRule) == rule);
  CHECK(edges_of(g.graph, EdgeSource::kQueueOrder) == queue);
  CHECK(enumerate_rule_edges(g.metas, g.gen.rules) == rule);
  CHECK(enumerate_queue_edges(g.metas) == queue);
  // The i > 0 guard: nothing from a Task3 reaches Task0(0).
  for (const Edge& e : g.graph.edges()) CHECK(e.dep != 0);
}

TEST_CASE("property: LU graph sizes and edge enumeration for n = 1..8") {
  for (std::size_t n = 1; n <= 8; ++n) {
    LuGraph g(n, 2);
    CHECK(g.graph.size() == 4 * n - 3);
    const EdgeSet rule = edges_of(g.graph, EdgeSource::kRule);
    CHECK(rule.size() == 5 * (n - 1));
    CHECK(rule == enumerate_rule_edges(g.metas, g.gen.rules));
    CHECK(edges_of(g.graph, EdgeSource::kQueueOrder) == enumerate_queue_edges(g.metas));
    // Distance semantics.
    for (const Edge& e : g.graph.edges()) {
      if (e.source != EdgeSource::kRule) continue;
      const auto& pre = g.graph.nodes()[e.pre];
      const auto& dep = g.graph.nodes()[e.dep];
      const std::int64_t d = dep.iteration - pre.iteration;
      if (dep.kind == "Task0") {
        CHECK(d == 1);
        CHECK(dep.iteration > 0);
      } else {
        CHECK(d == 0);
      }
    }
  }
}

TEST_CASE("a two-cycle is reported with its witness") {
  RuleSet rs;
  rs.declare_kind("A").declare_kind("B");
  rs.depend("A", "B", 0).depend("B", "A", 0);
  std::vector<TaskMeta> tasks{{0, "A", 0, 0, {}}, {1, "B", 1, 0, {}}};
  try {
    build_task_graph(tasks, rs);
    FAIL("expected a cycle");
  } catch (const CyclicDependenceError& e) {
    CHECK(e.cycle().size() == 2);
    CHECK(std::set<TaskId>(e.cycle().begin(), e.cycle().end()) == std::set<TaskId>{0, 1});
  }
}

TEST_CASE("no rules, one queue, three tasks: a FIFO chain") {
  std::vector<TaskMeta> tasks{{0, "k", 0, 0, {}}, {1, "k", 0, 1, {}}, {2, "k", 0, 2, {}}};
  const TaskGraph g = build_task_graph(tasks, RuleSet{});
  CHECK(edges_of(g, EdgeSource::kQueueOrder) == EdgeSet{{0, 1}, {1, 2}});
  CHECK(edges_of(g, EdgeSource::kRule).empty());
  CHECK(g.topological_order() == std::vector<TaskId>{0, 1, 2});
  CHECK(g.reaches(0, 2));
  CHECK_FALSE(g.reaches(2, 0));
}

TEST_CASE("property: random rules, random iterations, enumeration agrees") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    RuleSet rs;
    const std::vector<std::string> kinds{"A", "B", "C", "D"};
    for (const auto& k : kinds) rs.declare_kind(k);
    std::vector<TaskMeta> tasks;
    const std::size_t iters = 1 + rng() % 5;
    // Kinds in a fixed order per iteration with queues equal to kind index.
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(iters); ++i) {
      for (std::uint32_t k = 0; k < 4; ++k) {
        if (rng() % 4 == 0) continue;
        tasks.push_back({static_cast<TaskId>(tasks.size()), kinds[k], k, i, {}});
      }
    }
    // Only rules that point to an earlier kind or an earlier iteration.
    for (int r = 0; r < 5; ++r) {
      const std::size_t dep = 1 + rng() % 3, pre = rng() % dep;
      const std::int64_t d = static_cast<std::int64_t>(rng() % 3);
      const Condition c = rng() % 2 ? Condition::always() : Condition::greater(static_cast<std::int64_t>(rng() % 3));
      rs.depend(kinds[dep], kinds[pre], d, c);
    }
    rs.depend("A", "D", 1);
    const TaskGraph g = build_task_graph(tasks, rs);
    CHECK(edges_of(g, EdgeSource::kRule) == enumerate_rule_edges(tasks, rs));
    // Topological order respects every edge; closure matches DFS.
    std::vector<std::size_t> pos(tasks.size());
    for (std::size_t k = 0; k < g.topological_order().size(); ++k) pos[g.topological_order()[k]] = k;
    for (const Edge& e : g.edges()) CHECK(pos[e.pre] < pos[e.dep]);
    const auto pairs = g.edge_pairs();
    for (TaskId a = 0; a < tasks.size(); ++a) {
      for (TaskId b = 0; b < tasks.size(); ++b) {
        if (a != b) CHECK(g.reaches(a, b) == testing::path_exists(pairs, a, b));
      }
    }
  }
}

TEST_CASE("sufficiency: LU with the paper's rules is safe") {
  for (std::size_t n = 1; n <= 6; ++n) {
    LuGraph g(n, 2);
    CHECK(check_dependence_sufficiency(g.graph).empty());
  }
}

TEST_CASE("sufficiency: dropping Task3 -> Task0 exposes block (i,i)") {
  const std::size_t n = 3, m = 2;
  LuGraph g(n, m, true);
  const ConflictReport report = check_dependence_sufficiency(g.graph);
  REQUIRE_FALSE(report.empty());
  // Task3(0) = 3 and Task0(1) = 4; Task3(1) = 7 and Task0(2) = 8.
  std::map<std::pair<TaskId, TaskId>, std::vector<Range>> by_pair;
  for (const Conflict& c : report.conflicts) by_pair[{c.first, c.second}] = c.overlap;
  for (std::size_t i = 1; i < n; ++i) {
    const TaskId t3 = static_cast<TaskId>(4 * (i - 1) + 3), t0 = static_cast<TaskId>(4 * i);
    REQUIRE(by_pair.count({t3, t0}) == 1);
    const Range blk{i * m, (i + 1) * m};
    CHECK(by_pair[{t3, t0}] == std::vector<Range>{blk, blk});
    const Conflict* c = nullptr;
    for (const Conflict& x : report.conflicts) {
      if (x.first == t3 && x.second == t0) c = &x;
    }
    CHECK(describe(*c, g.graph).find("Task0(" + std::to_string(i) + ")") != std::string::npos);
  }
}

TEST_CASE("sufficiency: disjoint buffers without edges are safe") {
  auto a = new_buffer<double>({2, 2});
  auto b = new_buffer<double>({2, 2});
  std::vector<TaskMeta> tasks{{0, "x", 0, 0, {access_set(BlockView<double>(a), AccessMode::kReadWrite)}},
                              {1, "y", 1, 0, {access_set(BlockView<double>(b), AccessMode::kReadWrite)}}};
  CHECK(check_dependence_sufficiency(build_task_graph(tasks, RuleSet{})).empty());
  tasks[1].access = {access_set(BlockView<double>(a), AccessMode::kRead)};
  CHECK(check_dependence_sufficiency(build_task_graph(tasks, RuleSet{})).conflicts.size() == 1);
  tasks[0].access = {access_set(BlockView<double>(a), AccessMode::kRead)};
  CHECK(check_dependence_sufficiency(build_task_graph(tasks, RuleSet{})).empty());
}

TEST_CASE("property: closure report agrees with the element-level race check") {
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t m = 1; m <= 4; ++m) {
      for (bool drop : {false, true}) {
        LuGraph g(n, m, drop);
        const auto report = testing::as_set(check_dependence_sufficiency(g.graph).pairs());
        const auto races = testing::lu_element_races(g.graph, n, m);
        CHECK(report == races);
        if (drop && n > 1) CHECK_FALSE(races.empty());
      }
    }
  }
}

TEST_CASE("VGG graph: ten cross-queue rules and a safe report") {
  VggConfig cfg = VggConfig::tiny();
  cfg.batch = 2;
  auto x = new_buffer<double>({32, 32, 3, 2}, SeededRandom{0, 1, 1});
  auto y = new_buffer<double>({cfg.output_rows(), 2});
  const auto w = make_vgg_weights<double>(cfg, 1);
  Overlay<double> o(vgg_overlay_manifest());
  const GeneratedTasks gen = vgg_generate_tasks(cfg, x, y, w, o);
  CHECK(gen.rules.rules().size() == 10);
  for (const DependenceRule& r : gen.rules.rules()) CHECK(r.distance == 0);
  const TaskGraph g = build_task_graph(o.task_metas(), gen.rules);
  CHECK(g.size() == 42);
  CHECK(edges_of(g, EdgeSource::kRule).size() == 20);
  CHECK(check_dependence_sufficiency(g).empty());
}
