#pragma once

// Self-check suite behind `drcg verify`: finite-difference gradients, rate
// equivalence, manifold invariants, descent/feasibility/tightness and
// cross-method agreement on small seeded instances. Faults can be injected
// to confirm that the checks actually bite.

#include "drcg/baselines.hpp"
#include "drcg/reduction.hpp"
#include "drcg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace drcg::verify {

enum class Fault { None, AsymmetricQ, FlippedGradient };

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::vector<Check> checks;
  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check &c) { return c.passed; });
  }
};

namespace detail {

struct Instance {
  SystemConfig cfg;
  ChannelSet ch;
  ReducedProblem rp;
};

inline Instance instance(int C, int L, int K, std::uint64_t seed) {
  SystemConfig cfg = SystemConfig::make(C, L, K, 2, 2, {100.0, 500.0}, -80.0, seed);
  ChannelSet ch = draw_full_rank_channels(cfg, make_topology(cfg));
  ReducedProblem rp = build_reduced(ch, cfg);
  return {cfg, std::move(ch), std::move(rp)};
}

inline Blocks unit_direction(const Blocks &like, Rng &rng) {
  Blocks d;
  for (const auto &m : like) {
    CMat r(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = rng.complex_normal();
    d.push_back(r);
  }
  return scaled(d, 1.0 / std::sqrt(norm2(d)));
}

template <class F> double fd_error(F &&f, const Blocks &x, const Blocks &g, const Blocks &dir) {
  const double h = 1e-6 * std::sqrt(norm2(x));
  const double fd = (f(axpy(x, h, dir)) - f(axpy(x, -h, dir))) / (2.0 * h);
  const double an = kWirtingerFactor * inner(g, dir);
  return std::abs(fd - an) / std::max(std::abs(an), 1e-300);
}

inline std::string sci(double x) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << x;
  return os.str();
}

} // namespace detail

inline Check check_hermitian_q(Fault fault) {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto in = detail::instance(2, 8, 2, seed);
    if (fault == Fault::AsymmetricQ) in.rp.Q[0](0, 1) += 1e-3 * in.rp.Q[0].norm();
    for (const auto &Q : in.rp.Q) worst = std::max(worst, hermitian_residual(Q));
  }
  return {"reduced Q Hermitian", worst <= 1e-10, "max residual " + detail::sci(worst)};
}

inline Check check_gradient(Fault fault) {
  const double sign = fault == Fault::FlippedGradient ? -1.0 : 1.0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto in = detail::instance(2, 8, 2, seed);
    const ProductManifold M = make_ellipsoid_manifold(in.rp);
    const ReducedObjective red(in.rp);
    const FullObjective full(in.ch, in.cfg);
    Rng rng(seed, {static_cast<std::uint64_t>(Stream::Fault)});
    const Blocks X = random_point(M, seed);
    const Blocks V = lift(PointX::from_clusters(X, in.rp.K), in.ch).clusters();
    const Blocks gx = scaled(red.rates_and_gradient(X).second, sign);
    const Blocks gv = scaled(full.rates_and_gradient(V).second, sign);
    auto fx = [&](const Blocks &b) { return red.value(b); };
    auto fv = [&](const Blocks &b) { return full.value(b); };
    for (int n = 0; n < 5; ++n) {
      worst = std::max(worst, detail::fd_error(fx, X, gx, detail::unit_direction(X, rng)));
      worst = std::max(worst, detail::fd_error(fv, V, gv, detail::unit_direction(V, rng)));
    }
  }
  return {"gradient vs central differences", worst <= 1e-6, "max rel error " + detail::sci(worst)};
}

inline Check check_rate_equivalence() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto in = detail::instance(2, 8, 2, seed);
    const ProductManifold M = make_ellipsoid_manifold(in.rp);
    for (std::uint64_t p = 0; p < 4; ++p) {
      const PointX X = PointX::from_clusters(random_point(M, 10 * seed + p), in.rp.K);
      const double r = wsr_X(X, in.rp).wsr;
      const double v = wsr_V(lift(X, in.ch), in.ch, in.cfg).wsr;
      worst = std::max(worst, std::abs(r - v) / r);
    }
  }
  return {"reduced rate equals full rate", worst <= 1e-9, "max rel gap " + detail::sci(worst)};
}

inline Check check_manifold() {
  const auto in = detail::instance(2, 8, 2, 3);
  const ProductManifold M = make_ellipsoid_manifold(in.rp);
  Rng rng(3, {static_cast<std::uint64_t>(Stream::Fault)});
  double idem = 0.0, tangency = 0.0, feas = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Blocks X = random_point(M, s);
    const Blocks Z = scaled(detail::unit_direction(X, rng), std::sqrt(norm2(X)));
    const TangentX t = project_tangent(X, Z, M);
    const TangentX tt = project_tangent(X, t, M);
    idem = std::max(idem, std::sqrt(norm2(axpy(tt, -1.0, t)) / norm2(t)));
    const auto res = tangency_residuals(X, t, M);
    for (std::size_t c = 0; c < M.size(); ++c) tangency = std::max(tangency, res[c] / M[c].budget());
    feas = std::max(feas, feasibility_residual(retract(X, t, 0.3, M), M));
  }
  const Blocks X = random_point(M, 99);
  const TangentX eta = project_tangent(X, scaled(detail::unit_direction(X, rng), std::sqrt(norm2(X))), M);
  auto gap = [&](double a) { return std::sqrt(norm2(axpy(retract(X, eta, a, M), -1.0, axpy(X, a, eta)))); };
  const double ratio = gap(1e-3) / gap(1e-4);
  const bool ok = idem <= 1e-12 && tangency <= 1e-8 && feas <= 1e-10 && ratio > 50.0 && ratio < 200.0;
  return {"manifold invariants", ok,
          "idempotence " + detail::sci(idem) + ", tangency " + detail::sci(tangency) +
              ", feasibility " + detail::sci(feas) + ", retraction ratio " + detail::sci(ratio)};
}

inline Check check_descent_and_tightness() {
  bool monotone = true, feasible = true;
  double tight = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto in = detail::instance(2, 8, 2, seed);
    const ProductManifold M = make_ellipsoid_manifold(in.rp);
    SolveOptions opts;
    opts.on_iterate = [&](const SolverState &st) { feasible = feasible && on_manifold(st.X, M, 1e-8); };
    const RunReport r = solve_reduced(in.rp, in.ch, SolverParams{}, seed, opts);
    for (std::size_t i = 1; i < r.trace.size(); ++i)
      monotone = monotone && r.trace[i].wsr_bits >= r.trace[i - 1].wsr_bits;
    for (int c = 0; c < in.cfg.C; ++c)
      tight = std::max(tight, std::abs(r.V.cluster(c).squaredNorm() - in.cfg.P[c]) / in.cfg.P[c]);
  }
  return {"monotone descent, feasibility, power tightness", monotone && feasible && tight <= 1e-8,
          std::string(monotone ? "monotone" : "NOT monotone") + ", " +
              (feasible ? "feasible" : "left the manifold") + ", tightness " + detail::sci(tight)};
}

inline Check check_cross_method() {
  SystemConfig cfg = SystemConfig::make(1, 8, 2, 2, 2, {100.0}, -80.0, 11);
  const ChannelSet ch = draw_full_rank_channels(cfg, make_topology(cfg));
  const ReducedProblem rp = build_reduced(ch, cfg);
  SolverParams sp;
  sp.wsr_tol = 1e-6;
  sp.max_iters = 2000;
  sp.warm_start = true;
  WmmseParams wp;
  wp.wsr_tol = 1e-6;
  wp.max_iters = 2000;
  double a = 0.0, b = 0.0, w = 0.0;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    a = std::max(a, solve_reduced(rp, ch, sp, s).wsr_bits);
    b = std::max(b, sphere_rcg(ch, cfg, sp, s).wsr_bits);
    w = std::max(w, wmmse_sum_power(ch, cfg, wp, s).wsr_bits);
  }
  const double gs = std::abs(a - b) / a, gw = std::abs(a - w) / a;
  return {"cross-method agreement (C = 1, best of 5)", gs <= 0.01 && gw <= 0.02,
          "vs sphere " + detail::sci(gs) + ", vs wmmse " + detail::sci(gw)};
}

inline Check check_ezf_warm_start() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto in = detail::instance(2, 8, 2, seed);
    const PrecoderOutput e = ezf(in.ch, in.cfg);
    const double base = wsr_V(e.V, in.ch, in.cfg).wsr_bits();
    const Blocks X0 = normalize_onto(project_to_subspace(e.V, in.rp, in.ch).clusters(),
                                     make_ellipsoid_manifold(in.rp));
    const double fin = solve_reduced(in.rp, in.ch, SolverParams{}, X0).wsr_bits;
    worst = std::max(worst, base - fin);
  }
  return {"warm start from EZF never loses rate", worst <= 1e-9,
          "max loss " + detail::sci(std::max(worst, 0.0)) + " bits/s/Hz"};
}

inline Report run_all(Fault fault = Fault::None) {
  Report r;
  auto guarded = [&](const std::string &name, const std::function<Check()> &fn) {
    try {
      r.checks.push_back(fn());
    } catch (const std::exception &e) {
      r.checks.push_back({name, false, std::string("threw: ") + e.what()});
    }
  };
  guarded("reduced Q Hermitian", [&] { return check_hermitian_q(fault); });
  guarded("gradient vs central differences", [&] { return check_gradient(fault); });
  guarded("reduced rate equals full rate", check_rate_equivalence);
  guarded("manifold invariants", check_manifold);
  guarded("monotone descent, feasibility, power tightness", check_descent_and_tightness);
  guarded("cross-method agreement", check_cross_method);
  guarded("warm start from EZF", check_ezf_warm_start);
  return r;
}

} // namespace drcg::verify
