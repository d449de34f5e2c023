// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ovl/cli.hpp"
#include "ovl/runtime.hpp"
#include "ovl/tensor.hpp"

using namespace ovl;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "overlay-sim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("ovl_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("build writes the manifests") {
  TempDir dir;
  auto r = cli({"build", "lu", "--out-dir", dir.path.string()});
  CHECK(r.code == 0);
  const std::string lu = slurp(dir / "lu.overlay.json");
  for (const char* ip : {"LU", "TransformRowPanel", "TransformColumnPanel", "GEMM"}) {
    CHECK(lu.find(ip) != std::string::npos);
  }
  CHECK(r.out.find("queue 3: GEMM") != std::string::npos);

  r = cli({"build", "vgg", "-o", dir.path.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("queue 1: Maxpool") != std::string::npos);
  CHECK(fs::exists(dir / "vgg.overlay.json"));

  CHECK(cli({"build", "fft", "-o", dir.path.string()}).code == 2);
}

TEST_CASE("usage errors exit with 2, help with 0") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"run"}).code == 2);
  CHECK(cli({"run", "qr"}).code == 2);
  CHECK(cli({"run", "lu", "--precision", "f16"}).code == 2);
  CHECK(cli({"run", "lu", "--workers", "0"}).code == 2);
  CHECK(cli({"run", "lu", "--n", "0"}).code == 2);
  CHECK(cli({"run", "vgg", "--scale", "huge"}).code == 2);
  const auto h = cli({"--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("inspect-trace") != std::string::npos);
}

TEST_CASE("run lu --verify") {
  const auto r = cli({"run", "lu", "--n", "4", "--m", "8", "--seed", "1", "--verify"});
  CHECK(r.code == 0);
  CHECK(r.out.find("verify oracle_lu") != std::string::npos);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);

  const auto f = cli({"run", "lu", "--n", "3", "--m", "4", "--precision", "f32", "--verify", "--workers", "2"});
  CHECK(f.code == 0);
}

TEST_CASE("dumps do not depend on workers or tracing") {
  TempDir dir;
  CHECK(cli({"run", "lu", "--n", "4", "--m", "8", "--workers", "1", "--dump", dir / "a1.txt"}).code == 0);
  CHECK(cli({"run", "lu", "--n", "4", "--m", "8", "--workers", "4", "--dump", dir / "a4.txt", "--trace",
             dir / "t.json"})
            .code == 0);
  CHECK(slurp(dir / "a1.txt") == slurp(dir / "a4.txt"));
  CHECK(cli({"run", "vgg", "--n", "2", "--workers", "1", "--dump", dir / "y1.txt"}).code == 0);
  CHECK(cli({"run", "vgg", "--n", "2", "--workers", "3", "--dump", dir / "y3.txt"}).code == 0);
  CHECK(slurp(dir / "y1.txt") == slurp(dir / "y3.txt"));
}

TEST_CASE("--input feeds the LU matrix") {
  TempDir dir;
  auto a = new_buffer<double>({6, 6}, SeededRandom{-1, 1, 5});
  for (std::size_t i = 0; i < 6; ++i) a->at({i, i}) += 6.0;
  write_tensor_text(*a, dir / "a.txt");
  const auto r = cli({"run", "lu", "--n", "3", "--m", "2", "--input", dir / "a.txt", "--verify", "--dump",
                      dir / "out.txt"});
  CHECK(r.code == 0);
  CHECK(read_tensor_text<double>(dir / "out.txt")->shape() == Shape{6, 6});
  CHECK(cli({"run", "lu", "--n", "2", "--m", "2", "--input", dir / "a.txt"}).code == 2);
  CHECK(cli({"run", "lu", "--input", dir / "missing.txt"}).code == 1);
}

TEST_CASE("singular input is a kernel failure") {
  TempDir dir;
  auto z = new_buffer<double>({4, 4});
  write_tensor_text(*z, dir / "z.txt");
  const auto r = cli({"run", "lu", "--n", "2", "--m", "2", "--input", dir / "z.txt"});
  CHECK(r.code == 1);
  CHECK(r.err.find("singular") != std::string::npos);
}

TEST_CASE("run vgg with a trace, then inspect it") {
  TempDir dir;
  const auto r = cli({"run", "vgg", "--scale", "tiny", "--seed", "3", "--verify", "--trace", dir / "t.json", "--n", "2"});
  CHECK(r.code == 0);
  CHECK(count_lines(dir / "t.json") == 21 * 2 + 1);
  const auto i = cli({"inspect-trace", dir / "t.json"});
  CHECK(i.code == 0);
  CHECK(i.out.find("tasks 42") != std::string::npos);
  CHECK(i.out.find("queue 0 tasks 32") != std::string::npos);
  CHECK(i.out.find("queue 1 tasks 10") != std::string::npos);
}

TEST_CASE("inspect-trace on LU n = 3") {
  TempDir dir;
  CHECK(cli({"run", "lu", "--n", "3", "--m", "2", "--trace", dir / "t.json", "--workers", "2"}).code == 0);
  const auto i = cli({"inspect-trace", dir / "t.json"});
  CHECK(i.code == 0);
  CHECK(i.out.find("tasks 9") != std::string::npos);
  CHECK(i.out.find("schedule valid") != std::string::npos);

  CHECK(cli({"run", "lu", "--n", "3", "--m", "2", "--trace", dir / "s.json", "--workers", "1"}).code == 0);
  const auto s = cli({"inspect-trace", dir / "s.json"});
  CHECK(s.out.find("worker_utilization 100.0%") != std::string::npos);

  // Swap vstart and vend of the first record.
  ExecutionTrace t = parse_trace_file(dir / "t.json");
  t.records[1].vstart += 100;
  emit_trace(t, dir / "bad.json");
  const auto b = cli({"inspect-trace", dir / "bad.json"});
  CHECK(b.code == 1);
  CHECK(b.out.find("INVALID") != std::string::npos);

  std::ofstream(dir / "junk.json") << "{\"id\":\n";
  CHECK(cli({"inspect-trace", dir / "junk.json"}).code == 1);
}

TEST_CASE("--check-races and --overlay") {
  TempDir dir;
  const auto r = cli({"run", "lu", "--n", "3", "--m", "2", "--check-races"});
  CHECK(r.code == 0);
  CHECK(r.out.find("conflicts 0") != std::string::npos);
  const auto v = cli({"run", "vgg", "--check-races"});
  CHECK(v.code == 0);

  CHECK(cli({"build", "lu", "-o", dir.path.string()}).code == 0);
  CHECK(cli({"build", "vgg", "-o", dir.path.string()}).code == 0);
  CHECK(cli({"run", "lu", "--overlay", dir / "lu.overlay.json", "--verify"}).code == 0);
  // The VGG overlay lacks the LU IPs.
  CHECK(cli({"run", "lu", "--overlay", dir / "vgg.overlay.json"}).code == 2);
  std::ofstream(dir / "broken.json") << "{";
  CHECK(cli({"run", "lu", "--overlay", dir / "broken.json"}).code == 1);
}
