#include "drcg/baselines.hpp"
#include "drcg/bench.hpp"
#include "drcg/io.hpp"
#include "drcg/reduction.hpp"
#include "drcg/verify.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace drcg;
using nlohmann::json;

struct SystemFlags {
  int C = 2, L = 8, K = 2, Nr = 2, d = 2;
  std::vector<double> P{100.0, 500.0};
  double noise_dbm = -80.0;
  std::uint64_t seed = 1;

  void add(CLI::App *app) {
    app->add_option("--C", C, "antenna clusters");
    app->add_option("--L", L, "antennas per cluster");
    app->add_option("--K", K, "users");
    app->add_option("--Nr", Nr, "receive antennas per user");
    app->add_option("--d", d, "streams per user");
    app->add_option("--P", P, "per-cluster budgets in W, cycled to length C");
    app->add_option("--noise-dbm", noise_dbm, "noise power per user in dBm");
    app->add_option("--seed", seed, "base seed");
  }

  SystemConfig config() const {
    SystemConfig cfg = SystemConfig::make(C, L, K, Nr, d, P, noise_dbm, seed);
    cfg.validate();
    return cfg;
  }
};

int cmd_gen(const SystemFlags &sys, int trials, const std::string &out) {
  bench::ExperimentSpec spec;
  spec.system = sys.config();
  spec.seed = sys.seed;
  std::filesystem::create_directories(out);
  for (int t = 0; t < trials; ++t) {
    const SystemConfig cfg = bench::detail::trial_system(spec, t);
    const ChannelSet ch = draw_full_rank_channels(cfg, make_topology(cfg));
    const std::string path = (std::filesystem::path(out) / ("channel_" + std::to_string(t) + ".bin")).string();
    io::with_output_file(path, [&](std::ostream &os) { io::write_channel(os, ch); });
    std::cout << path << "\n";
  }
  return 0;
}

struct SolveFlags {
  std::string channel;
  int trial = 0;
  std::string method = "proposed";
  std::optional<std::uint64_t> init_seed;
  std::string init_point;
  std::string out_point;
  std::string trace;
  SolverParams params;
};

int cmd_solve(SystemFlags sys, const SolveFlags &f) {
  std::optional<ChannelSet> loaded;
  if (!f.channel.empty()) {
    loaded = io::with_input_file(f.channel, [](std::istream &is) { return io::read_channel(is); });
    sys.C = loaded->C();
    sys.K = loaded->K();
    sys.L = loaded->L();
    sys.Nr = loaded->Nr();
  }
  bench::ExperimentSpec spec;
  spec.system = sys.config();
  spec.seed = sys.seed;
  spec.solver = f.params;
  spec.methods = {bench::parse_method(f.method, "--method")};
  spec.validate();
  const SystemConfig cfg = bench::detail::trial_system(spec, f.trial);
  const ChannelSet ch = loaded ? *loaded : draw_full_rank_channels(cfg, make_topology(cfg));
  ch.require_full_rank();
  const std::uint64_t seed = f.init_seed.value_or(bench::detail::trial_init_seed(spec, f.trial));

  RunReport r;
  const bench::Method m = spec.methods.front();
  if (!f.init_point.empty() && (m == bench::Method::Proposed || m == bench::Method::SphereRcg)) {
    const PointV V0 = io::with_input_file(f.init_point, [](std::istream &is) { return io::read_point_v(is); });
    if (m == bench::Method::Proposed) {
      const ReducedProblem rp = build_reduced(ch, cfg);
      const Blocks X0 = normalize_onto(project_to_subspace(V0, rp, ch).clusters(), make_ellipsoid_manifold(rp));
      r = solve_reduced(rp, ch, f.params, X0);
    } else {
      r = sphere_rcg(ch, cfg, f.params,
                     normalize_onto(V0.clusters(), make_sphere_manifold(cfg.P, cfg.L, cfg.K, cfg.d)));
    }
  } else {
    r = bench::detail::run_method(m, spec, ch, cfg, seed);
  }

  auto emit = [&](std::ostream &os) {
    for (const auto &row : r.trace) os << bench::trace_row_json(f.trial, row).dump() << "\n";
  };
  if (f.trace.empty() || f.trace == "-") {
    emit(std::cout);
  } else {
    std::ofstream os(f.trace);
    if (!os) throw Error(ErrorCode::Io, "cannot open " + f.trace + " for writing");
    emit(os);
  }
  if (!f.out_point.empty())
    io::with_output_file(f.out_point, [&](std::ostream &os) { io::write_point(os, r.V); });
  std::cerr << r.method << ": wsr " << r.wsr_bits << " bits/s/Hz after " << r.iterations
            << " iterations (" << to_string(r.stop) << ")\n";
  return 0;
}

struct BenchFlags {
  std::string config;
  std::optional<int> trials, iterations, workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> wall_clock_ns;
  std::optional<std::string> output;
  std::vector<std::string> methods;
};

int cmd_bench(const BenchFlags &f) {
  std::ifstream is(f.config);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + f.config);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error &e) {
    throw Error(ErrorCode::InvalidConfig, f.config + ": " + e.what());
  }
  if (f.trials) j["trials"] = *f.trials;
  if (f.seed) j["seed"] = *f.seed;
  if (f.output) j["output"] = *f.output;
  if (!f.methods.empty()) j["methods"] = f.methods;
  if (f.iterations) j["budget"] = {{"iterations", *f.iterations}};
  if (f.wall_clock_ns) j["budget"] = {{"wall_clock_ns", *f.wall_clock_ns}};
  const bench::ExperimentSpec spec = bench::parse_spec(j);
  const bench::BenchResult res = bench::run(spec, f.workers.value_or(0));
  std::cerr << "spec " << res.spec_hash << ", " << res.trials.size() << " trials\n";
  for (const auto &p : res.files) std::cout << p << "\n";
  return 0;
}

int cmd_verify(const std::string &fault) {
  verify::Fault fl = verify::Fault::None;
  if (fault == "asymmetric-q") fl = verify::Fault::AsymmetricQ;
  else if (fault == "flipped-gradient") fl = verify::Fault::FlippedGradient;
  const verify::Report rep = verify::run_all(fl);
  for (const auto &c : rep.checks)
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  return rep.ok() ? 0 : 1;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Reduced-dimension Riemannian CG beamforming for clustered antenna arrays"};
  app.require_subcommand(1);

  SystemFlags gen_sys;
  int gen_trials = 1;
  std::string gen_out = "channels";
  auto *gen = app.add_subcommand("gen", "draw channel sets and write them as binary containers");
  gen_sys.add(gen);
  gen->add_option("--trials", gen_trials, "number of channel sets")->check(CLI::PositiveNumber);
  gen->add_option("-o,--output", gen_out, "output directory");

  SystemFlags solve_sys;
  SolveFlags sf;
  auto *solve = app.add_subcommand("solve", "run one method on one channel set");
  solve_sys.add(solve);
  solve->add_option("--channel", sf.channel, "channel container from `gen` (overrides C, L, K, Nr)");
  solve->add_option("--trial", sf.trial, "trial index used to derive the channel and init seeds");
  solve->add_option("-m,--method", sf.method, "proposed | sphere_rcg | ezf | wmmse");
  solve->add_option("--init-seed", sf.init_seed, "seed for the random initial point");
  solve->add_option("--init", sf.init_point, "initial PointV container (RCG methods)");
  solve->add_option("--out", sf.out_point, "write the final beamformer here");
  solve->add_option("--trace", sf.trace, "JSON-lines trace destination (default stdout)");
  solve->add_option("--sigma", sf.params.sigma, "Armijo backtracking factor");
  solve->add_option("--p", sf.params.p, "Armijo sufficient-decrease constant");
  solve->add_option("--alpha0", sf.params.alpha0, "initial Armijo step");
  solve->add_option("--max-iters", sf.params.max_iters, "iteration cap");
  solve->add_option("--max-backtracks", sf.params.max_backtracks, "backtracking cap");
  solve->add_option("--wsr-tol", sf.params.wsr_tol, "stop when |dWSR| (bits/s/Hz) falls below; 0 disables");
  solve->add_option("--grad-tol", sf.params.grad_tol, "stop when the gradient norm falls below; 0 disables");
  solve->add_flag("--warm-start", sf.params.warm_start, "start each line search at 4x the last step");

  BenchFlags bf;
  auto *bench_cmd = app.add_subcommand("bench", "run an experiment spec");
  bench_cmd->add_option("config", bf.config, "experiment spec (JSON)")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--trials", bf.trials, "override trials");
  bench_cmd->add_option("--seed", bf.seed, "override seed");
  bench_cmd->add_option("-o,--output", bf.output, "override output directory");
  bench_cmd->add_option("--methods", bf.methods, "override methods");
  bench_cmd->add_option("--iterations", bf.iterations, "iteration budget");
  bench_cmd->add_option("--wall-clock-ns", bf.wall_clock_ns, "wall-clock budget per run");
  bench_cmd->add_option("-j,--workers", bf.workers, "worker threads (DRCG_WORKERS wins)");

  std::string fault = "none";
  auto *verify_cmd = app.add_subcommand("verify", "run the self-check suite");
  verify_cmd->add_option("--fault", fault, "inject a fault")
      ->check(CLI::IsMember({"none", "asymmetric-q", "flipped-gradient"}));

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return cmd_gen(gen_sys, gen_trials, gen_out);
    if (solve->parsed()) return cmd_solve(solve_sys, sf);
    if (bench_cmd->parsed()) return cmd_bench(bf);
    if (verify_cmd->parsed()) return cmd_verify(fault);
  } catch (const drcg::Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
