#pragma once

// Experiment harness: JSON experiment specs, paired seeded trials fanned out
// over worker threads, JSON-lines traces and CSV aggregates.

#include "drcg/baselines.hpp"
#include "drcg/reduction.hpp"
#include "drcg/solver.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace drcg::bench {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class Method { Proposed, SphereRcg, Ezf, Wmmse };

inline const char *to_string(Method m) {
  switch (m) {
  case Method::Proposed: return "proposed";
  case Method::SphereRcg: return "sphere_rcg";
  case Method::Ezf: return "ezf";
  case Method::Wmmse: return "wmmse";
  }
  return "unknown";
}

inline Method parse_method(const std::string &s, const std::string &path) {
  for (Method m : {Method::Proposed, Method::SphereRcg, Method::Ezf, Method::Wmmse})
    if (s == to_string(m)) return m;
  throw Error(ErrorCode::InvalidConfig,
              path + ": unknown method '" + s + "' (proposed, sphere_rcg, ezf, wmmse)");
}

struct Budget {
  int iterations = 0;              // overrides solver.max_iters when > 0
  std::int64_t wall_clock_ns = 0;  // monotonic-clock stop when > 0
};

struct ExperimentSpec {
  SystemConfig system;
  double noise_dbm = -80.0;
  SolverParams solver;
  std::vector<Method> methods{Method::Proposed};
  int trials = 1;
  std::uint64_t seed = 1;
  Budget budget;
  std::string output = "bench_out";
  std::vector<std::string> formats{"jsonl", "csv"};

  void validate() const;
};

namespace detail {

[[noreturn]] inline void fail(const std::string &m) { throw Error(ErrorCode::InvalidConfig, m); }

/// Object reader that records which keys were consumed so leftovers can be
/// reported as unknown.
class Fields {
public:
  Fields(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_ + ": expected an object");
  }

  bool has(const std::string &key) const { return j_.contains(key); }
  std::string at(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

  const json &raw(const std::string &key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T> void read(const std::string &key, T &out) {
    if (!has(key)) return;
    out = convert<T>(raw(key), at(key));
  }

  template <class T> void read_list(const std::string &key, std::vector<T> &out) {
    if (!has(key)) return;
    const json &v = raw(key);
    if (!v.is_array()) fail(at(key) + ": expected a list");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(convert<T>(v[i], at(key) + "[" + std::to_string(i) + "]"));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(at(it.key()) + ": unknown key");
  }

  template <class T> static T convert(const json &v, const std::string &path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path + ": expected true/false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(path + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return v.get<T>();
        if (v.get<std::int64_t>() < 0) fail(path + ": must be >= 0");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path + ": expected a number");
    } else {
      if (!v.is_string()) fail(path + ": expected a string");
    }
    return v.get<T>();
  }

private:
  const json &j_;
  std::string path_;
  std::set<std::string> seen_;
};

} // namespace detail

inline void ExperimentSpec::validate() const {
  system.validate();
  solver.validate();
  if (methods.empty()) detail::fail("methods: need at least one method");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j)
      if (methods[j] == methods[i]) detail::fail("methods[" + std::to_string(i) + "]: duplicate");
    if (methods[i] == Method::Wmmse && system.C != 1)
      detail::fail("methods[" + std::to_string(i) + "]: wmmse requires system.C = 1");
  }
  if (trials < 1) detail::fail("trials: must be >= 1");
  if (budget.iterations < 0) detail::fail("budget.iterations: must be >= 0");
  if (budget.wall_clock_ns < 0) detail::fail("budget.wall_clock_ns: must be >= 0");
  if (budget.iterations > 0 && budget.wall_clock_ns > 0)
    detail::fail("budget: set iterations or wall_clock_ns, not both");
  if (output.empty()) detail::fail("output: must not be empty");
  for (std::size_t i = 0; i < formats.size(); ++i)
    if (formats[i] != "jsonl" && formats[i] != "csv")
      detail::fail("formats[" + std::to_string(i) + "]: expected jsonl or csv");
}

inline ExperimentSpec parse_spec(const json &j) {
  using detail::Fields;
  Fields top(j, "");
  if (!top.has("schema_version")) detail::fail("schema_version: required");
  int version = 0;
  top.read("schema_version", version);
  if (version != kSchemaVersion)
    detail::fail("schema_version: unsupported version " + std::to_string(version));

  ExperimentSpec spec;
  if (top.has("system")) {
    Fields s(top.raw("system"), "system");
    SystemConfig &c = spec.system;
    s.read("C", c.C);
    s.read("L", c.L);
    s.read("K", c.K);
    s.read("Nr", c.Nr);
    s.read("d", c.d);
    s.read("noise_dbm", spec.noise_dbm);
    std::vector<double> P{100.0, 500.0};
    s.read_list("P", P);
    std::vector<double> omega;
    s.read_list("omega", omega);
    const int C = c.C, K = c.K;
    if (C < 1 || K < 1) detail::fail("system: C and K must be positive");
    if (!s.has("P") && P.size() != static_cast<std::size_t>(C)) {
      std::vector<double> cycled;
      for (int i = 0; i < C; ++i) cycled.push_back(P[i % P.size()]);
      P = cycled;
    }
    c.P = P;
    c.sigma2.assign(K, dbm_to_watt(spec.noise_dbm));
    c.omega = omega.empty() ? std::vector<double>(K, 1.0) : omega;
    s.read("cell_radius_m", c.cell_radius_m);
    s.read("cluster_ring_fraction", c.cluster_ring_fraction);
    s.read("min_user_distance_m", c.min_user_distance_m);
    s.read("shadow_std_db", c.shadow_std_db);
    s.finish();
  } else {
    spec.system = SystemConfig::make(2, 8, 2, 2, 2, {100.0, 500.0}, spec.noise_dbm);
  }

  if (top.has("solver")) {
    Fields s(top.raw("solver"), "solver");
    SolverParams &p = spec.solver;
    s.read("sigma", p.sigma);
    s.read("p", p.p);
    s.read("alpha0", p.alpha0);
    s.read("max_iters", p.max_iters);
    s.read("max_backtracks", p.max_backtracks);
    s.read("wsr_tol", p.wsr_tol);
    s.read("grad_tol", p.grad_tol);
    s.read("warm_start", p.warm_start);
    s.read("report_tol", p.report_tol);
    s.finish();
  }

  if (top.has("methods")) {
    std::vector<std::string> names;
    top.read_list("methods", names);
    spec.methods.clear();
    for (std::size_t i = 0; i < names.size(); ++i)
      spec.methods.push_back(parse_method(names[i], "methods[" + std::to_string(i) + "]"));
  }
  top.read("trials", spec.trials);
  top.read("seed", spec.seed);
  spec.system.seed = spec.seed;
  if (top.has("budget")) {
    Fields b(top.raw("budget"), "budget");
    b.read("iterations", spec.budget.iterations);
    b.read("wall_clock_ns", spec.budget.wall_clock_ns);
    b.finish();
  }
  top.read("output", spec.output);
  top.read_list("formats", spec.formats);
  top.finish();
  spec.validate();
  return spec;
}

inline ExperimentSpec load_spec(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error &e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  return parse_spec(j);
}

/// Fully resolved spec (defaults filled in). This is what gets hashed.
inline json to_json(const ExperimentSpec &s) {
  json methods = json::array();
  for (Method m : s.methods) methods.push_back(to_string(m));
  return {
      {"schema_version", kSchemaVersion},
      {"system",
       {{"C", s.system.C},
        {"L", s.system.L},
        {"K", s.system.K},
        {"Nr", s.system.Nr},
        {"d", s.system.d},
        {"P", s.system.P},
        {"noise_dbm", s.noise_dbm},
        {"omega", s.system.omega},
        {"cell_radius_m", s.system.cell_radius_m},
        {"cluster_ring_fraction", s.system.cluster_ring_fraction},
        {"min_user_distance_m", s.system.min_user_distance_m},
        {"shadow_std_db", s.system.shadow_std_db}}},
      {"solver",
       {{"sigma", s.solver.sigma},
        {"p", s.solver.p},
        {"alpha0", s.solver.alpha0},
        {"max_iters", s.solver.max_iters},
        {"max_backtracks", s.solver.max_backtracks},
        {"wsr_tol", s.solver.wsr_tol},
        {"grad_tol", s.solver.grad_tol},
        {"warm_start", s.solver.warm_start},
        {"report_tol", s.solver.report_tol}}},
      {"methods", methods},
      {"trials", s.trials},
      {"seed", s.seed},
      {"budget", {{"iterations", s.budget.iterations}, {"wall_clock_ns", s.budget.wall_clock_ns}}},
      {"output", s.output},
      {"formats", s.formats},
  };
}

/// FNV-1a over the canonical JSON text, as 16 hex digits. Where and in
/// which formats results are written does not change them, so output and
/// formats are left out.
inline std::string spec_hash(const ExperimentSpec &s) {
  json j = to_json(s);
  j.erase("output");
  j.erase("formats");
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  static const char *hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = hex[h & 0xf];
  return out;
}

/// DRCG_WORKERS wins over the requested count; 0 means one per hardware thread.
inline int worker_count(int requested = 0) {
  if (const char *env = std::getenv("DRCG_WORKERS")) {
    int n = 0;
    const std::string v(env);
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec != std::errc() || ptr != v.data() + v.size() || n < 1)
      throw Error(ErrorCode::InvalidConfig, "DRCG_WORKERS: expected a positive integer");
    return n;
  }
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

/// Channel seed for trial t; every method in the trial sees this channel.
inline SystemConfig trial_system(const ExperimentSpec &spec, int t) {
  SystemConfig cfg = spec.system;
  cfg.seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(Stream::Trial),
                                     static_cast<std::uint64_t>(t)});
  return cfg;
}

inline std::uint64_t trial_init_seed(const ExperimentSpec &spec, int t) {
  return derive_seed(spec.seed, {static_cast<std::uint64_t>(Stream::Trial),
                                 static_cast<std::uint64_t>(t),
                                 static_cast<std::uint64_t>(Stream::InitPoint)});
}

inline RunReport run_ezf(const ChannelSet &ch, const SystemConfig &cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  PrecoderOutput out = ezf(ch, cfg);
  const double bits = wsr_V(out.V, ch, cfg).wsr_bits();
  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  RunReport r;
  r.method = "ezf";
  r.trace.push_back({0, bits, 0.0, 0.0, 0, ns});
  r.X = out.V.clusters();
  r.V = std::move(out.V);
  r.wsr_bits = bits;
  r.stop = StopReason::ClosedForm;
  return r;
}

inline RunReport run_method(Method m, const ExperimentSpec &spec, const ChannelSet &ch,
                            const SystemConfig &cfg, std::uint64_t init_seed) {
  SolverParams params = spec.solver;
  if (spec.budget.iterations > 0) params.max_iters = spec.budget.iterations;
  SolveOptions opts;
  opts.time_budget_ns = spec.budget.wall_clock_ns;
  switch (m) {
  case Method::Proposed:
    return solve_reduced(build_reduced(ch, cfg), ch, params, init_seed, opts);
  case Method::SphereRcg: return sphere_rcg(ch, cfg, params, init_seed, opts);
  case Method::Ezf: return run_ezf(ch, cfg);
  case Method::Wmmse: {
    WmmseParams wp;
    wp.max_iters = params.max_iters;
    wp.wsr_tol = params.wsr_tol;
    wp.report_tol = params.report_tol;
    wp.time_budget_ns = spec.budget.wall_clock_ns;
    return wmmse_sum_power(ch, cfg, wp, init_seed);
  }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown method");
}

inline std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

} // namespace detail

struct TrialResult {
  int trial = 0;
  std::vector<RunReport> runs;  // same order as spec.methods
};

struct BenchResult {
  std::string spec_hash;
  std::vector<TrialResult> trials;
  std::vector<std::string> files;
};

/// Runs every trial; results are keyed by trial id so worker scheduling
/// never affects what is written.
inline std::vector<TrialResult> run_trials(const ExperimentSpec &spec, int workers) {
  spec.validate();
  std::vector<TrialResult> results(spec.trials);
  std::vector<std::exception_ptr> errors(spec.trials);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int t = next++; t < spec.trials; t = next++) {
      try {
        const SystemConfig cfg = detail::trial_system(spec, t);
        const ChannelSet ch = draw_full_rank_channels(cfg, make_topology(cfg));
        const std::uint64_t init = detail::trial_init_seed(spec, t);
        results[t].trial = t;
        for (Method m : spec.methods) results[t].runs.push_back(detail::run_method(m, spec, ch, cfg, init));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min(workers, spec.trials));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(work);
  work();
  for (auto &th : pool) th.join();
  for (const auto &e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

/// WSR at iteration i, holding the last value once a run has stopped.
inline double wsr_at_iter(const RunReport &r, int i) {
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(i), r.trace.size() - 1);
  return r.trace[idx].wsr_bits;
}

/// WSR of the last row recorded at or before t (the first row if none).
inline double wsr_at_time(const RunReport &r, std::int64_t t) {
  double v = r.trace.front().wsr_bits;
  for (const auto &row : r.trace) {
    if (row.elapsed_ns > t) break;
    v = row.wsr_bits;
  }
  return v;
}

struct CdfPoint {
  double wsr_bits;
  double cdf;
};

/// Empirical CDF of final WSRs: sorted samples with cdf = rank / n.
inline std::vector<CdfPoint> empirical_cdf(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out.push_back({samples[i], (i + 1) / n});
  return out;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path &p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + p.string() + " for writing");
  return os;
}

inline void provenance(std::ostream &os, const std::string &hash, const ExperimentSpec &spec,
                       const std::string &columns) {
  os << "# spec_hash=" << hash << " seed=" << spec.seed << " schema_version=" << kSchemaVersion
     << "\n# " << columns << "\n";
}

} // namespace detail

inline nlohmann::ordered_json trace_row_json(int trial, const TraceRow &r) {
  return {{"trial", trial},          {"iter", r.iter},   {"wsr_bits", r.wsr_bits},
          {"grad_norm", r.grad_norm}, {"alpha", r.alpha}, {"backtracks", r.backtracks},
          {"elapsed_ns", r.elapsed_ns}};
}

inline std::vector<std::string> write_outputs(const ExperimentSpec &spec,
                                              const std::vector<TrialResult> &trials,
                                              const std::string &hash) {
  namespace fs = std::filesystem;
  using detail::fmt;
  const fs::path dir(spec.output);
  fs::create_directories(dir);
  std::vector<std::string> files;
  auto want = [&](const char *f) {
    return std::find(spec.formats.begin(), spec.formats.end(), f) != spec.formats.end();
  };

  {
    const fs::path p = dir / "spec.json";
    auto os = detail::open_out(p);
    os << to_json(spec).dump(2) << "\n";
    files.push_back(p.string());
  }

  if (want("jsonl")) {
    for (std::size_t m = 0; m < spec.methods.size(); ++m) {
      const fs::path p = dir / (std::string("traces_") + to_string(spec.methods[m]) + ".jsonl");
      auto os = detail::open_out(p);
      const nlohmann::ordered_json meta = {{"meta",
                          {{"schema_version", kSchemaVersion},
                           {"spec_hash", hash},
                           {"seed", spec.seed},
                           {"method", to_string(spec.methods[m])},
                           {"units", {{"wsr_bits", "bits/s/Hz"}, {"elapsed_ns", "ns"}}}}}};
      os << meta.dump() << "\n";
      for (const auto &tr : trials)
        for (const auto &row : tr.runs[m].trace) os << trace_row_json(tr.trial, row).dump() << "\n";
      files.push_back(p.string());
    }
  }

  if (want("csv")) {
    {
      const fs::path p = dir / "wsr_vs_iter.csv";
      auto os = detail::open_out(p);
      detail::provenance(os, hash, spec, "mean_wsr_bits in bits/s/Hz over trials; stopped runs hold their last value");
      os << "method,iter,mean_wsr_bits\n";
      for (std::size_t m = 0; m < spec.methods.size(); ++m) {
        std::size_t longest = 0;
        for (const auto &tr : trials) longest = std::max(longest, tr.runs[m].trace.size());
        for (std::size_t i = 0; i < longest; ++i) {
          double acc = 0.0;
          for (const auto &tr : trials) acc += wsr_at_iter(tr.runs[m], static_cast<int>(i));
          os << to_string(spec.methods[m]) << "," << i << "," << fmt(acc / trials.size()) << "\n";
        }
      }
      files.push_back(p.string());
    }
    {
      const fs::path p = dir / "wsr_vs_time.csv";
      auto os = detail::open_out(p);
      detail::provenance(os, hash, spec, "elapsed_ns in ns on a grid shared by all methods; mean_wsr_bits in bits/s/Hz");
      os << "method,elapsed_ns,mean_wsr_bits\n";
      std::int64_t horizon = 0;
      for (const auto &tr : trials)
        for (const auto &r : tr.runs) horizon = std::max(horizon, r.trace.back().elapsed_ns);
      constexpr int kGrid = 64;
      for (std::size_t m = 0; m < spec.methods.size(); ++m)
        for (int g = 0; g <= kGrid; ++g) {
          const std::int64_t t = horizon * g / kGrid;
          double acc = 0.0;
          for (const auto &tr : trials) acc += wsr_at_time(tr.runs[m], t);
          os << to_string(spec.methods[m]) << "," << t << "," << fmt(acc / trials.size()) << "\n";
        }
      files.push_back(p.string());
    }
    {
      const fs::path p = dir / "cdf.csv";
      auto os = detail::open_out(p);
      detail::provenance(os, hash, spec, "final wsr_bits in bits/s/Hz under the configured budget; cdf in [0, 1]");
      os << "method,rank,wsr_bits,cdf\n";
      for (std::size_t m = 0; m < spec.methods.size(); ++m) {
        std::vector<double> finals;
        for (const auto &tr : trials) finals.push_back(tr.runs[m].wsr_bits);
        const auto cdf = empirical_cdf(finals);
        for (std::size_t i = 0; i < cdf.size(); ++i)
          os << to_string(spec.methods[m]) << "," << i + 1 << "," << fmt(cdf[i].wsr_bits) << ","
             << fmt(cdf[i].cdf) << "\n";
      }
      files.push_back(p.string());
    }
    {
      const fs::path p = dir / "convergence_time.csv";
      auto os = detail::open_out(p);
      detail::provenance(os, hash, spec,
                         "converged_* is the first iteration with |dWSR| < report_tol (empty if never); "
                         "times in ns; wsr in bits/s/Hz");
      os << "method,trial,iterations,converged_iter,converged_ns,total_ns,mean_iter_ns,final_wsr_bits,stop\n";
      for (std::size_t m = 0; m < spec.methods.size(); ++m)
        for (const auto &tr : trials) {
          const RunReport &r = tr.runs[m];
          const std::int64_t total = r.trace.back().elapsed_ns;
          const double per_iter = r.iterations > 0 ? static_cast<double>(total) / r.iterations : 0.0;
          os << to_string(spec.methods[m]) << "," << tr.trial << "," << r.iterations << ",";
          if (r.wsr_converged_iter) os << *r.wsr_converged_iter;
          os << ",";
          if (r.wsr_converged_ns) os << *r.wsr_converged_ns;
          os << "," << total << "," << fmt(per_iter) << "," << fmt(r.wsr_bits) << ","
             << drcg::to_string(r.stop) << "\n";
        }
      files.push_back(p.string());
    }
  }
  return files;
}

inline BenchResult run(const ExperimentSpec &spec, int workers = 0) {
  BenchResult out;
  out.spec_hash = spec_hash(spec);
  out.trials = run_trials(spec, worker_count(workers));
  out.files = write_outputs(spec, out.trials, out.spec_hash);
  return out;
}

} // namespace drcg::bench
