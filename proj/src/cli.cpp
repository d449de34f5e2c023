// SPDX-License-Identifier: Apache-2.0
#include "ovl/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>

#include "ovl/applications.hpp"
#include "ovl/oracles.hpp"

namespace ovl {

namespace {

struct RunConfig {
  std::string app;
  std::size_t n = 0;  // LU blocks, or VGG batch; 0 until given
  std::size_t m = 8;
  std::string scale = "tiny";
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::string precision = "f64";
  std::string input;
  std::string dump;
  std::string trace;
  std::string overlay;
  bool verify = false;
  bool check_races = false;
  bool unsafe = false;
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T>
double lu_tolerance() {
  return std::is_same_v<T, double> ? 1e-10 : 1e-4;
}

template <class T>
double cnn_tolerance() {
  return std::is_same_v<T, double> ? 1e-6 : 1e-4;
}

void print_report(std::ostream& out, const char* what, const oracle::ComparisonReport& r) {
  out << "verify " << what << " rel_fro_err=" << std::scientific << std::setprecision(3) << r.rel_fro_err
      << " max_abs_err=" << r.max_abs_err << " tol=" << r.tolerance << (r.pass ? " PASS" : " FAIL") << '\n'
      << std::defaultfloat;
}

template <class T>
OverlayPtr<T> overlay_for(const RunConfig& cfg, const OverlayManifest& fallback) {
  if (cfg.overlay.empty()) return build_overlay<T>(fallback);
  return load_overlay<T>(cfg.overlay);
}

/// Builds the graph, runs the optional race report, then executes.
template <class T>
int schedule(const RunConfig& cfg, Overlay<T>& overlay, const GeneratedTasks& gen, ExecutionTrace& trace,
             std::ostream& out) {
  const TaskGraph graph = build_task_graph(overlay.task_metas(), gen.rules);
  int status = kExitOk;
  if (cfg.check_races) {
    const ConflictReport report = check_dependence_sufficiency(graph);
    out << "conflicts " << report.conflicts.size() << '\n';
    for (const Conflict& c : report.conflicts) out << "  " << describe(c, graph) << '\n';
    if (!report.empty()) status = kExitFailure;
  }
  trace = run(overlay, graph, RunOptions{cfg.workers, cfg.unsafe});
  overlay.reset_tasks();
  const TraceSummary summary = summarize_trace(trace);
  out << "tasks " << summary.tasks << " span " << summary.span << " critical_path " << summary.critical_path << '\n';
  if (!cfg.trace.empty()) emit_trace(trace, cfg.trace);
  return status;
}

template <class T>
int run_lu(const RunConfig& cfg, std::ostream& out) {
  const std::size_t n = cfg.n == 0 ? 4 : cfg.n;
  LuProblem<T> problem;
  if (cfg.input.empty()) {
    problem = make_lu_problem<T>(n, cfg.m, cfg.seed);
  } else {
    problem = {read_tensor_text<T>(cfg.input), n, cfg.m};
    if (problem.a->shape() != Shape{n * cfg.m, n * cfg.m}) {
      throw UsageError("--input must hold a " + std::to_string(n * cfg.m) + " x " + std::to_string(n * cfg.m) +
                       " matrix for --n " + std::to_string(n) + " --m " + std::to_string(cfg.m));
    }
  }
  const oracle::Matrix original = oracle::to_matrix(*problem.a);

  auto overlay = overlay_for<T>(cfg, lu_overlay_manifest());
  const GeneratedTasks gen = lu_generate_tasks(problem, *overlay);
  out << "app lu n=" << n << " m=" << cfg.m << " precision=" << cfg.precision << " workers=" << cfg.workers << '\n';
  ExecutionTrace trace;
  int status = schedule(cfg, *overlay, gen, trace, out);

  if (!cfg.dump.empty()) write_tensor_text(*problem.a, cfg.dump);
  if (cfg.verify) {
    const oracle::Matrix packed = oracle::to_matrix(*problem.a);
    const auto vs_oracle = oracle::compare(oracle::lu(original), packed, lu_tolerance<T>());
    const auto recon = oracle::compare(
        original, oracle::multiply(oracle::unpack_lower(packed), oracle::unpack_upper(packed)), lu_tolerance<T>());
    print_report(out, "oracle_lu", vs_oracle);
    print_report(out, "reconstruction", recon);
    if (!vs_oracle.pass || !recon.pass) status = kExitFailure;
  }
  return status;
}

template <class T>
int run_vgg(const RunConfig& cfg, std::ostream& out) {
  VggConfig config;
  if (cfg.scale == "tiny") {
    config = VggConfig::tiny();
  } else if (cfg.scale == "small") {
    config = VggConfig::small();
  } else {
    throw UsageError("--scale must be tiny or small");
  }
  config.batch = cfg.n == 0 ? 1 : cfg.n;

  BufferPtr<T> x;
  if (cfg.input.empty()) {
    x = new_buffer<T>({config.height, config.width, config.channels, config.batch}, SeededRandom{0.0, 1.0, cfg.seed});
  } else {
    x = read_tensor_text<T>(cfg.input);
    const Shape& s = x->shape();
    if (s.size() != 4 || s[0] % 32 || s[1] % 32) throw UsageError("--input must be H x W x C x batch, H and W multiples of 32");
    config.height = s[0];
    config.width = s[1];
    config.channels = s[2];
    config.batch = s[3];
  }
  const VggWeights<T> weights = make_vgg_weights<T>(config, cfg.seed);

  auto overlay = overlay_for<T>(cfg, vgg_overlay_manifest());
  auto y = new_buffer<T>({config.output_rows(), config.batch});
  const GeneratedTasks gen = vgg_generate_tasks(config, x, y, weights, *overlay);
  out << "app vgg scale=" << cfg.scale << " batch=" << config.batch << " precision=" << cfg.precision
      << " workers=" << cfg.workers << '\n';
  ExecutionTrace trace;
  int status = schedule(cfg, *overlay, gen, trace, out);

  auto result = new_buffer<T>({config.fc.back(), config.batch});
  for (std::size_t r = 0; r < config.fc.back(); ++r) {
    for (std::size_t i = 0; i < config.batch; ++i) result->at({r, i}) = y->at({r, i});
  }
  if (!cfg.dump.empty()) write_tensor_text(*result, cfg.dump);
  if (cfg.verify) {
    const auto report =
        oracle::compare(oracle::cnn_forward(config, *x, weights), oracle::to_matrix(*result), cnn_tolerance<T>());
    print_report(out, "oracle_cnn_forward", report);
    if (!report.pass) status = kExitFailure;
  }
  return status;
}

template <class T>
int run_app(const RunConfig& cfg, std::ostream& out) {
  if (cfg.app == "lu") return run_lu<T>(cfg, out);
  return run_vgg<T>(cfg, out);
}

int cmd_build(const std::string& app, const std::string& dir, std::ostream& out) {
  const OverlayManifest manifest = app == "lu" ? lu_overlay_manifest() : vgg_overlay_manifest();
  const std::filesystem::path path = std::filesystem::path(dir) / (app + ".overlay.json");
  manifest.save(path.string());
  out << "wrote " << path.string() << " (" << manifest.interfaces.size() << " queues)\n";
  for (const CommandInterface& ci : manifest.interfaces) out << "  queue " << ci.queue_no << ": " << ci.ip.name << '\n';
  return kExitOk;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  const ExecutionTrace trace = parse_trace_file(path);
  const TraceSummary s = summarize_trace(trace);
  out << "tasks " << s.tasks << '\n'
      << "span " << s.span << '\n'
      << "critical_path " << s.critical_path << '\n'
      << "max_concurrency " << s.max_concurrency << '\n';
  out << std::fixed << std::setprecision(1);
  for (const auto& [q, u] : s.queue_utilization) {
    out << "queue " << q << " tasks " << s.queue_tasks.at(q) << " utilization " << 100.0 * u << "%\n";
  }
  out << "worker_utilization " << 100.0 * s.worker_utilization << "%\n" << std::defaultfloat;
  if (s.valid()) {
    out << "schedule valid\n";
    return kExitOk;
  }
  out << "schedule INVALID\n";
  for (const std::string& v : s.violations) out << "  " << v << '\n';
  return kExitFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulated FPGA overlay runtime: blocked LU and a VGG-style CNN"};
  app.name("overlay-sim");
  app.require_subcommand(1);

  std::string build_app, build_dir = ".";
  auto* build = app.add_subcommand("build", "Write the overlay manifest of an application");
  build->add_option("app", build_app, "lu or vgg")->required();
  build->add_option("-o,--out-dir", build_dir, "Directory for <app>.overlay.json");

  RunConfig cfg;
  auto* run_cmd = app.add_subcommand("run", "Generate tasks, schedule them and execute");
  run_cmd->add_option("app", cfg.app, "lu or vgg")->required();
  run_cmd->add_option("--n", cfg.n, "LU: blocks along the diagonal (default 4). VGG: batch size (default 1)")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--m", cfg.m, "LU block size")->check(CLI::PositiveNumber);
  run_cmd->add_option("--scale", cfg.scale, "VGG preset: tiny or small");
  run_cmd->add_option("--seed", cfg.seed, "Seed for generated inputs and weights");
  run_cmd->add_option("--workers", cfg.workers, "Maximum tasks in flight")->check(CLI::PositiveNumber);
  run_cmd->add_option("--precision", cfg.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  run_cmd->add_option("--input", cfg.input, "tensor-text input (LU matrix or VGG X)");
  run_cmd->add_option("--dump", cfg.dump, "Write the result as tensor-text");
  run_cmd->add_option("--trace", cfg.trace, "Write the execution trace (NDJSON)");
  run_cmd->add_option("--overlay", cfg.overlay, "Overlay manifest to load instead of the built-in one");
  run_cmd->add_flag("--verify", cfg.verify, "Compare against the reference oracle");
  run_cmd->add_flag("--check-races", cfg.check_races, "Print the conflict report; fail when it is not empty");
  run_cmd->add_flag("--unsafe", cfg.unsafe, "Run even when the conflict report is not empty");

  std::string trace_path;
  auto* inspect = app.add_subcommand("inspect-trace", "Summarize and validate a trace file");
  inspect->add_option("path", trace_path, "Trace file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "overlay-sim: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (build->parsed()) {
      if (build_app != "lu" && build_app != "vgg") throw UsageError("unknown app `" + build_app + "` (lu, vgg)");
      return cmd_build(build_app, build_dir, out);
    }
    if (run_cmd->parsed()) {
      if (cfg.app != "lu" && cfg.app != "vgg") throw UsageError("unknown app `" + cfg.app + "` (lu, vgg)");
      return cfg.precision == "f32" ? run_app<float>(cfg, out) : run_app<double>(cfg, out);
    }
    return cmd_inspect(trace_path, out);
  } catch (const UsageError& e) {
    err << "overlay-sim: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "overlay-sim: " << to_string(e.code()) << ": " << e.what() << '\n';
    return e.code() == ErrorCode::kConfiguration ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "overlay-sim: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace ovl
