// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "ovl/oracles.hpp"
#include "support.hpp"

using namespace ovl;

namespace {

std::map<std::string, int> kind_counts(const Overlay<double>& o) {
  std::map<std::string, int> c;
  for (const TaskMeta& t : o.task_metas()) ++c[t.kind];
  return c;
}

double lu_error(const LuProblem<double>& p, const oracle::Matrix& original) {
  return oracle::compare(oracle::lu(original), oracle::to_matrix(*p.a), 0.0).rel_fro_err;
}

struct VggRun {
  VggConfig cfg;
  BufferPtr<double> x;
  VggWeights<double> w;
  VggResult<double> result;
};

VggRun run_vgg(std::size_t batch, std::uint64_t seed, std::size_t workers = 1, double scale = 0.1) {
  VggRun r;
  r.cfg = VggConfig::tiny();
  r.cfg.batch = batch;
  r.x = new_buffer<double>({32, 32, 3, batch}, SeededRandom{0.0, 1.0, seed});
  r.w = make_vgg_weights<double>(r.cfg, seed, -scale, scale);
  r.result = vgg_forward(r.cfg, r.x, r.w, workers);
  return r;
}

}  // namespace

TEST_CASE("LU task counts") {
  for (std::size_t n : {1u, 2u, 3u, 5u}) {
    auto p = make_lu_problem<double>(n, 2, 1);
    Overlay<double> o(lu_overlay_manifest());
    const GeneratedTasks gen = lu_generate_tasks(p, o);
    const auto c = kind_counts(o);
    CHECK(gen.tasks.size() == 4 * n - 3);
    CHECK(c.at("Task0") == static_cast<int>(n));
    CHECK(c.count("Task1") == (n > 1 ? 1u : 0u));
    if (n > 1) {
      CHECK(c.at("Task1") == static_cast<int>(n - 1));
      CHECK(c.at("Task2") == static_cast<int>(n - 1));
      CHECK(c.at("Task3") == static_cast<int>(n - 1));
    }
  }
}

TEST_CASE("LU task arguments follow the block macros") {
  const std::size_t n = 3, m = 2;
  auto p = make_lu_problem<double>(n, m, 1);
  Overlay<double> o(lu_overlay_manifest());
  lu_generate_tasks(p, o);
  for (const TaskMeta& t : o.task_metas()) {
    const std::size_t i = static_cast<std::size_t>(t.iteration);
    if (t.kind == "Task0") {
      REQUIRE(t.access.size() == 1);
      CHECK(t.access[0].ranges == std::vector<Range>{{i * m, (i + 1) * m}, {i * m, (i + 1) * m}});
    }
    if (t.kind == "Task3") {
      const auto& inst = o.task(t.id);
      CHECK(std::get<double>(inst.args[3]) == 1.0);
      CHECK(std::get<double>(inst.args[4]) == -1.0);
      CHECK(std::get<double>(inst.args[5]) == 1.0);
      std::vector<AccessSet> writes;
      for (const AccessSet& s : t.access) {
        if (s.writes()) writes.push_back(s);
      }
      REQUIRE(writes.size() == 1);
      CHECK(writes[0].ranges == std::vector<Range>{{(i + 1) * m, n * m}, {(i + 1) * m, n * m}});
    }
  }
}

TEST_CASE("LU errors") {
  CHECK_THROWS_AS(make_lu_problem<double>(0, 2, 1), Error);
  LuProblem<double> bad{new_buffer<double>({5, 5}), 2, 2};
  Overlay<double> o(lu_overlay_manifest());
  CHECK_THROWS_AS(lu_generate_tasks(bad, o), Error);
  Overlay<double> v(vgg_overlay_manifest());
  auto good = make_lu_problem<double>(2, 2, 1);
  CHECK_THROWS_AS(lu_generate_tasks(good, v), Error);
}

TEST_CASE("LU of the identity is the identity") {
  LuProblem<double> p{new_buffer<double>({12, 12}), 3, 4};
  for (std::size_t i = 0; i < 12; ++i) p.a->at({i, i}) = 1.0;
  lu_decompose(p, 2);
  for (std::size_t r = 0; r < 12; ++r) {
    for (std::size_t c = 0; c < 12; ++c) CHECK(p.a->at({r, c}) == (r == c ? 1.0 : 0.0));
  }
}

TEST_CASE("property: blocked LU equals the unblocked oracle") {
  for (auto [n, m] : {std::pair<std::size_t, std::size_t>{1, 5}, {2, 2}, {3, 3}, {4, 8}, {5, 1}, {6, 4}}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      auto p = make_lu_problem<double>(n, m, seed);
      const oracle::Matrix original = oracle::to_matrix(*p.a);
      lu_decompose(p, 1 + seed % 4);
      CHECK(lu_error(p, original) <= 1e-10);
      const oracle::Matrix packed = oracle::to_matrix(*p.a);
      const oracle::Matrix recon = oracle::multiply(oracle::unpack_lower(packed), oracle::unpack_upper(packed));
      CHECK(oracle::compare(original, recon, 1e-10).pass);
    }
  }
}

TEST_CASE("LU singular pivot propagates as a task failure") {
  LuProblem<double> p{new_buffer<double>({4, 4}), 2, 2};  // all zeros
  try {
    lu_decompose(p, 2);
    FAIL("expected failure");
  } catch (const TaskFailedError& e) {
    CHECK(e.task() == 0);
    CHECK(e.cause() == ErrorCode::kSingularPivot);
  }
}

TEST_CASE("float LU is close to the oracle") {
  auto p = make_lu_problem<float>(4, 8, 3);
  const oracle::Matrix original = oracle::to_matrix(*p.a);
  lu_decompose(p, 2);
  CHECK(oracle::compare(oracle::lu(original), oracle::to_matrix(*p.a), 1e-4).pass);
}

TEST_CASE("VGG task sequence per map") {
  VggConfig cfg = VggConfig::tiny();
  cfg.batch = 3;
  auto x = new_buffer<double>({32, 32, 3, 3});
  auto y = new_buffer<double>({cfg.output_rows(), 3});
  const auto w = make_vgg_weights<double>(cfg, 1);
  Overlay<double> o(vgg_overlay_manifest());
  const GeneratedTasks gen = vgg_generate_tasks(cfg, x, y, w, o);
  REQUIRE(gen.tasks.size() == 63);

  const std::vector<std::string> sequence{
      conv_kind(0),  conv_kind(1),  pool_kind(0), conv_kind(2),  conv_kind(3),  pool_kind(1), conv_kind(4),
      conv_kind(5),  conv_kind(6),  pool_kind(2), conv_kind(7),  conv_kind(8),  conv_kind(9), pool_kind(3),
      conv_kind(10), conv_kind(11), conv_kind(12), pool_kind(4), fc_kind(0),    fc_kind(1),   fc_kind(2)};
  for (std::size_t i = 0; i < 3; ++i) {
    int q0 = 0, q1 = 0;
    for (std::size_t k = 0; k < 21; ++k) {
      const TaskMeta& t = o.task(gen.tasks[21 * i + k].id).meta;
      CHECK(t.kind == sequence[k]);
      CHECK(t.iteration == static_cast<std::int64_t>(i));
      (t.queue == 0 ? q0 : q1)++;
    }
    CHECK(q0 == 16);
    CHECK(q1 == 5);
  }

  auto flags = [&](std::size_t k) {
    const auto& a = o.task(gen.tasks[k].id).args;
    return ConvControlFlags{std::get<bool>(a[3]), std::get<bool>(a[4]), std::get<bool>(a[5]), std::get<bool>(a[6])};
  };
  CHECK(flags(0) == ConvControlFlags{false, true, true, false});
  CHECK(flags(1) == ConvControlFlags{true, true, true, false});
  CHECK(flags(17 - 1) == ConvControlFlags{true, true, true, false});
  for (std::size_t k : {18u, 19u, 20u}) CHECK(flags(k) == ConvControlFlags{false, false, true, true});
  CHECK(std::get<bool>(o.task(gen.tasks[2].id).args[1]) == true);
  CHECK(std::get<bool>(o.task(gen.tasks[17].id).args[1]) == false);
}

TEST_CASE("VGG extents halve after each pool") {
  const VggRun r = run_vgg(2, 4);
  std::vector<Shape> pools;
  for (const TraceRecord& t : r.result.trace.records) {
    if (t.kind.rfind("MaxpoolLayers", 0) == 0 && t.iteration == 0) pools.push_back(t.output_shape);
  }
  REQUIRE(pools.size() == 5);
  std::size_t h = 32;
  for (const Shape& s : pools) {
    h /= 2;
    CHECK(s[0] == h);
    CHECK(s[1] == h);
  }
  CHECK(pools.back()[0] == 1);
}

TEST_CASE("VGG with zero weights outputs zeros") {
  VggConfig cfg = VggConfig::tiny();
  auto x = new_buffer<double>({32, 32, 3, 1}, SeededRandom{0, 1, 1});
  const auto w = make_vgg_weights<double>(cfg, Zeros{});
  const auto r = vgg_forward(cfg, x, w, 2);
  for (double v : r.output->data()) CHECK(v == 0.0);
}

TEST_CASE("property: VGG matches the direct oracle") {
  for (double scale : {0.1, 0.6}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const VggRun r = run_vgg(2, seed, 2, scale);
      const auto report =
          oracle::compare(oracle::cnn_forward(r.cfg, *r.x, r.w), oracle::to_matrix(*r.result.output), 1e-6);
      CHECK(report.pass);
    }
  }
}

TEST_CASE("VGG oracle comparison detects a single perturbed weight") {
  VggRun r = run_vgg(1, 5, 1, 0.6);
  double peak = 0.0;
  for (double v : r.result.output->data()) peak = std::max(peak, std::abs(v));
  MESSAGE("peak |output| with +-0.6 weights: " << peak);
  CHECK(peak > 1e-3);
  r.w.fc[2]->data()[0] += 0.01;
  const auto report =
      oracle::compare(oracle::cnn_forward(r.cfg, *r.x, r.w), oracle::to_matrix(*r.result.output), 1e-6);
  CHECK_FALSE(report.pass);
}

TEST_CASE("VGG batch of two equals two single runs") {
  const VggRun both = run_vgg(2, 9, 2, 0.6);
  for (std::size_t i = 0; i < 2; ++i) {
    VggConfig cfg = both.cfg;
    cfg.batch = 1;
    auto xi = new_buffer<double>({32, 32, 3, 1});
    for (std::size_t k = 0; k < xi->size(); ++k) xi->data()[k] = both.x->data()[k * 2 + i];
    const auto single = vgg_forward(cfg, xi, both.w, 1);
    for (std::size_t r = 0; r < cfg.fc.back(); ++r) CHECK(single.output->at({r, 0}) == both.result.output->at({r, i}));
  }
}

TEST_CASE("VGG small scale runs and verifies") {
  VggConfig cfg = VggConfig::small();
  auto x = new_buffer<double>({64, 64, 3, 1}, SeededRandom{0, 1, 2});
  const auto w = make_vgg_weights<double>(cfg, 2, -0.4, 0.4);
  const auto r = vgg_forward(cfg, x, w, 2);
  CHECK(oracle::compare(oracle::cnn_forward(cfg, *x, w), oracle::to_matrix(*r.output), 1e-6).pass);
}

TEST_CASE("VGG configuration errors") {
  VggConfig cfg = VggConfig::tiny();
  cfg.height = 48;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = VggConfig::tiny();
  auto x = new_buffer<double>({32, 32, 2, 1});
  const auto w = make_vgg_weights<double>(cfg, 1);
  CHECK_THROWS_AS(vgg_forward(cfg, x, w, 1), Error);
}
