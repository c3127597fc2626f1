#pragma once

// Riemannian conjugate gradient on a product of ellipsoids: Hestenes-Stiefel
// directions with a descent safeguard, Armijo backtracking along the
// retraction, and projection-based vector transport.

#include "drcg/blocks.hpp"
#include "drcg/geometry.hpp"
#include "drcg/objective.hpp"
#include "drcg/reduction.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace drcg {

struct SolverParams {
  double sigma = 0.6;     // backtracking factor
  double p = 0.1;         // sufficient-decrease constant
  double alpha0 = 1e10;   // initial trial step
  int max_iters = 500;
  int max_backtracks = 200;
  double wsr_tol = 1e-3;  // stop when |ΔWSR| (bits/s/Hz) drops below; 0 disables
  double grad_tol = 0.0;  // stop when ‖grad‖ drops below; 0 disables
  bool warm_start = false;  // next trial step = 4 × previous accepted step
  // |ΔWSR| threshold recorded as the convergence iteration, even when the run
  // continues to a fixed budget.
  double report_tol = 1e-3;

  void validate() const {
    auto fail = [](const std::string &m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (!(sigma > 0.0 && sigma < 1.0)) fail("solver.sigma: must lie in (0, 1)");
    if (!(p > 0.0 && p < 1.0)) fail("solver.p: must lie in (0, 1)");
    if (!(alpha0 > 0.0)) fail("solver.alpha0: must be positive");
    if (max_iters < 0) fail("solver.max_iters: must be >= 0");
    if (max_backtracks < 0) fail("solver.max_backtracks: must be >= 0");
    if (wsr_tol < 0.0) fail("solver.wsr_tol: must be >= 0");
    if (grad_tol < 0.0) fail("solver.grad_tol: must be >= 0");
    if (report_tol < 0.0) fail("solver.report_tol: must be >= 0");
  }
};

struct TraceRow {
  int iter = 0;
  double wsr_bits = 0.0;
  double grad_norm = 0.0;
  double alpha = 0.0;
  int backtracks = 0;
  std::int64_t elapsed_ns = 0;
};

enum class StopReason { WsrTolerance, GradTolerance, MaxIterations, ZeroGradient, Stalled, TimeBudget,
                        ClosedForm };

inline const char *to_string(StopReason r) {
  switch (r) {
  case StopReason::WsrTolerance: return "wsr_tol";
  case StopReason::GradTolerance: return "grad_tol";
  case StopReason::MaxIterations: return "max_iters";
  case StopReason::ZeroGradient: return "zero_gradient";
  case StopReason::Stalled: return "stalled";
  case StopReason::TimeBudget: return "time_budget";
  case StopReason::ClosedForm: return "closed_form";
  }
  return "unknown";
}

struct RunReport {
  std::string method;
  std::vector<TraceRow> trace;
  Blocks X;            // solver-space point (X^(c) or V^(c))
  PointV V;            // full-dimension beamformer
  double wsr_bits = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int line_search_failures = 0;
  StopReason stop = StopReason::MaxIterations;
  // First iteration (and its elapsed time) with |ΔWSR| < report_tol.
  std::optional<int> wsr_converged_iter;
  std::optional<std::int64_t> wsr_converged_ns;
};

struct SolverState {
  Blocks X;
  TangentX grad;
  TangentX eta;
  TangentX prev_grad;
  TangentX prev_eta;
  double prev_alpha = 0.0;
  double f = 0.0;
  int iter = 0;
  std::vector<TraceRow> trace;
};

using IterateHook = std::function<void(const SolverState &)>;

/// grad f = P_X(∇f).
template <class Objective>
TangentX riemannian_grad(const Objective &obj, const Blocks &X, const ProductManifold &M) {
  return project_tangent(X, obj.rates_and_gradient(X).second, M);
}

struct BetaResult {
  double beta = 0.0;
  bool restart = false;  // zero or non-finite denominator
};

/// Hestenes-Stiefel coefficient ⟨g, y⟩ / ⟨Tη, y⟩ with y = g − T(g_prev); every
/// argument must already live in the current tangent space.
inline BetaResult beta_hs(const TangentX &grad_new, const TangentX &transported_grad,
                          const TangentX &transported_eta) {
  const TangentX y = axpy(grad_new, -1.0, transported_grad);
  const double num = metric(grad_new, y);
  const double den = metric(transported_eta, y);
  if (den == 0.0 || !std::isfinite(den) || !std::isfinite(num)) return {0.0, true};
  const double beta = num / den;
  if (!std::isfinite(beta)) return {0.0, true};
  return {beta, false};
}

/// Direction −g + β·Tη with the descent safeguard: raw β first, then
/// max(β, 0), then steepest descent.
inline TangentX safeguarded_direction(const TangentX &grad, const TangentX &transported_eta,
                                      double beta_raw, double *beta_used = nullptr) {
  for (double beta : {beta_raw, std::max(beta_raw, 0.0)}) {
    TangentX eta = axpy(scaled(grad, -1.0), beta, transported_eta);
    if (metric(grad, eta) <= 0.0) {
      if (beta_used) *beta_used = beta;
      return eta;
    }
  }
  if (beta_used) *beta_used = 0.0;
  return scaled(grad, -1.0);
}

struct LineSearchResult {
  double alpha = 0.0;
  Blocks X;
  double f = 0.0;
  int backtracks = 0;
  bool failed = false;
};

/// Smallest m ≥ 0 with f(R(η, σᵐα)) ≤ f(X) + p·σᵐα·D, where
/// D = kWirtingerFactor·⟨grad, η⟩ is the directional derivative.
template <class Objective>
LineSearchResult armijo_search(const Objective &obj, const ProductManifold &M, const Blocks &X,
                               const TangentX &eta, double f_curr, const TangentX &grad,
                               const SolverParams &params, double alpha_init) {
  const double slope = kWirtingerFactor * metric(grad, eta);
  if (norm2(eta) == 0.0 || slope == 0.0) return {0.0, X, f_curr, 0, false};
  LineSearchResult best{0.0, X, f_curr, 0, true};
  double alpha = alpha_init;
  for (int m = 0; m <= params.max_backtracks; ++m, alpha *= params.sigma) {
    Blocks trial;
    double f_trial;
    try {
      trial = retract(X, eta, alpha, M);
      f_trial = obj.value(trial);
    } catch (const Error &) {
      continue;  // overflow or singular covariance at an absurd step
    }
    if (!std::isfinite(f_trial)) continue;
    if (f_trial <= f_curr + params.p * alpha * slope)
      return {alpha, std::move(trial), f_trial, m, false};
    if (f_trial < best.f) best = {alpha, std::move(trial), f_trial, m, true};
  }
  best.backtracks = params.max_backtracks;
  return best;
}

struct SolveOptions {
  IterateHook on_iterate;
  std::int64_t time_budget_ns = 0;  // monotonic wall-clock stop; 0 disables
};

template <class Objective>
RunReport solve(const Objective &obj, const ProductManifold &M, const SolverParams &params,
                Blocks init, const SolveOptions &opts = {}) {
  params.validate();
  require_matches(init, M, "solve");
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed = [&] {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0).count();
  };

  RunReport report;
  SolverState st;
  st.X = std::move(init);
  auto [rep, egrad] = obj.rates_and_gradient(st.X);
  st.f = -rep.wsr;
  st.grad = project_tangent(st.X, egrad, M);
  double wsr_bits = rep.wsr_bits();
  double gnorm = std::sqrt(metric(st.grad, st.grad));
  st.trace.push_back({0, wsr_bits, gnorm, 0.0, 0, elapsed()});
  if (opts.on_iterate) opts.on_iterate(st);

  report.stop = StopReason::MaxIterations;
  if (gnorm < 1e-14) {
    report.stop = StopReason::ZeroGradient;
  } else {
    for (int l = 1; l <= params.max_iters; ++l) {
      st.iter = l;
      if (l == 1) {
        st.eta = scaled(st.grad, -1.0);
      } else {
        const TangentX t_eta = transport(st.prev_eta, st.X, M);
        const TangentX t_grad = transport(st.prev_grad, st.X, M);
        const BetaResult b = beta_hs(st.grad, t_grad, t_eta);
        st.eta = safeguarded_direction(st.grad, t_eta, b.restart ? 0.0 : b.beta);
      }

      double alpha_init = params.alpha0;
      if (params.warm_start && st.prev_alpha > 0.0) alpha_init = 4.0 * st.prev_alpha;
      LineSearchResult ls = armijo_search(obj, M, st.X, st.eta, st.f, st.grad, params, alpha_init);
      if (ls.failed) ++report.line_search_failures;

      st.prev_grad = st.grad;
      st.prev_eta = st.eta;
      if (ls.alpha > 0.0) st.prev_alpha = ls.alpha;
      const bool moved = ls.alpha > 0.0;
      st.X = std::move(ls.X);
      auto [rep_new, egrad_new] = obj.rates_and_gradient(st.X);
      st.f = -rep_new.wsr;
      st.grad = project_tangent(st.X, egrad_new, M);

      const double wsr_prev = wsr_bits;
      wsr_bits = rep_new.wsr_bits();
      gnorm = std::sqrt(metric(st.grad, st.grad));
      st.trace.push_back({l, wsr_bits, gnorm, ls.alpha, ls.backtracks, elapsed()});
      if (opts.on_iterate) opts.on_iterate(st);

      const double delta = std::abs(wsr_bits - wsr_prev);
      if (delta < params.report_tol && !report.wsr_converged_iter) {
        report.wsr_converged_iter = l;
        report.wsr_converged_ns = st.trace.back().elapsed_ns;
      }
      if (params.wsr_tol > 0.0 && delta < params.wsr_tol) {
        report.stop = StopReason::WsrTolerance;
        break;
      }
      if (params.grad_tol > 0.0 && gnorm <= params.grad_tol) {
        report.stop = StopReason::GradTolerance;
        break;
      }
      if (!moved) {
        report.stop = StopReason::Stalled;
        break;
      }
      if (opts.time_budget_ns > 0 && st.trace.back().elapsed_ns >= opts.time_budget_ns) {
        report.stop = StopReason::TimeBudget;
        break;
      }
    }
  }

  report.iterations = st.iter;
  report.trace = std::move(st.trace);
  report.X = std::move(st.X);
  report.wsr_bits = wsr_bits;
  report.grad_norm = gnorm;
  return report;
}

/// The reduced-dimension method: solve over X on the ellipsoid product, then
/// lift the result to V.
inline RunReport solve_reduced(const ReducedProblem &rp, const ChannelSet &ch,
                               const SolverParams &params, std::variant<Blocks, std::uint64_t> init,
                               const SolveOptions &opts = {}) {
  const ProductManifold M = make_ellipsoid_manifold(rp);
  Blocks X0 = std::holds_alternative<Blocks>(init)
                  ? std::get<Blocks>(std::move(init))
                  : random_point(M, std::get<std::uint64_t>(init));
  RunReport report = solve(ReducedObjective(rp), M, params, std::move(X0), opts);
  report.method = "proposed";
  report.V = lift(PointX::from_clusters(report.X, rp.K), ch);
  return report;
}

} // namespace drcg
