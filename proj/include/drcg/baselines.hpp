#pragma once

// Comparison methods: eigen zero-forcing, the full-dimension spherical RCG
// (same solver, Q = I factors), and single-cluster sum-power WMMSE.

#include "drcg/blocks.hpp"
#include "drcg/channel.hpp"
#include "drcg/geometry.hpp"
#include "drcg/objective.hpp"
#include "drcg/rng.hpp"
#include "drcg/solver.hpp"

#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace drcg {

struct PrecoderOutput {
  PointV V;
  std::string method;
  std::vector<double> cluster_power;  // ‖V^(c)‖_F²
};

inline std::vector<double> cluster_powers(const PointV &V) {
  std::vector<double> out;
  for (const auto &b : V.clusters()) out.push_back(b.squaredNorm());
  return out;
}

/// Eigen zero-forcing: each user's dominant d right-singular directions form
/// its effective channel; the stacked effective channel is pseudo-inverted,
/// columns are normalized, and one global scale makes the most-loaded
/// cluster meet its budget with equality.
inline PrecoderOutput ezf(const ChannelSet &ch, const SystemConfig &cfg) {
  const int K = ch.K(), d = cfg.d, Nt = ch.Nt();
  if (Nt < K * d) throw Error(ErrorCode::InvalidConfig, "ezf: need Nt >= K*d");
  CMat E(K * d, Nt);
  for (int k = 0; k < K; ++k) {
    Eigen::JacobiSVD<CMat> svd(ch.user(k), Eigen::ComputeFullV);
    E.middleRows(k * d, d) = svd.matrixV().leftCols(d).adjoint();
  }
  const CMat gramE = E * E.adjoint();
  if (!full_rank_gram(gramE))
    throw Error(ErrorCode::RankDeficient, "ezf: stacked effective channel lost row rank");
  CMat W = E.adjoint() * HermitianFactor(gramE).solve(CMat::Identity(K * d, K * d));
  for (Eigen::Index j = 0; j < W.cols(); ++j) W.col(j).normalize();

  Blocks users;
  for (int k = 0; k < K; ++k) users.push_back(W.middleCols(k * d, d));
  PointV V = PointV::from_users(std::move(users), ch.C());
  double scale = std::numeric_limits<double>::infinity();
  for (int c = 0; c < ch.C(); ++c)
    scale = std::min(scale, std::sqrt(cfg.P[c] / V.cluster(c).squaredNorm()));
  Blocks clusters = scaled(V.clusters(), scale);
  PrecoderOutput out{PointV::from_clusters(std::move(clusters), K), "ezf", {}};
  out.cluster_power = cluster_powers(out.V);
  return out;
}

/// Full-dimension RCG over the product of spheres ‖V^(c)‖_F² = P_c.
inline RunReport sphere_rcg(const ChannelSet &ch, const SystemConfig &cfg,
                            const SolverParams &params, std::variant<Blocks, std::uint64_t> init,
                            const SolveOptions &opts = {}) {
  const ProductManifold M = make_sphere_manifold(cfg.P, ch.L(), ch.K(), cfg.d);
  Blocks V0 = std::holds_alternative<Blocks>(init)
                  ? std::get<Blocks>(std::move(init))
                  : random_point(M, std::get<std::uint64_t>(init));
  const FullObjective obj(ch, cfg);
  RunReport report = solve(obj, M, params, std::move(V0), opts);
  report.method = "sphere_rcg";
  report.V = PointV::from_clusters(report.X, ch.K());
  return report;
}

struct WmmseParams {
  int max_iters = 500;
  double wsr_tol = 1e-3;     // bits/s/Hz; 0 disables
  double report_tol = 1e-3;
  int max_doublings = 200;
  int bisection_steps = 200;
  std::int64_t time_budget_ns = 0;  // 0 disables
};

namespace detail {

/// Σ_i ‖row_i‖² / (λ_i + μ)² — transmit power of (A + μI)⁻¹B in A's eigenbasis.
inline double wmmse_power(const RVec &lambda, const RVec &row_energy, double mu) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double den = lambda[i] + mu;
    if (row_energy[i] == 0.0) continue;
    if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
    acc += row_energy[i] / (den * den);
  }
  return acc;
}

} // namespace detail

/// Sum-power WMMSE block coordinate descent for a single cluster (C = 1):
/// MMSE receivers, MSE weights, then the transmit update with the power
/// multiplier found by bisection.
inline RunReport wmmse_sum_power(const ChannelSet &ch, const SystemConfig &cfg,
                                 const WmmseParams &params,
                                 std::variant<Blocks, std::uint64_t> init) {
  if (ch.C() != 1) throw Error(ErrorCode::InvalidConfig, "wmmse_sum_power: requires C = 1");
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed = [&] {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0).count();
  };

  const int K = ch.K(), d = cfg.d, Nt = ch.Nt();
  const double P = cfg.P[0];
  const ProductManifold sphere = make_sphere_manifold(cfg.P, ch.L(), K, d);
  const FullObjective obj(ch, cfg);
  Blocks V = std::holds_alternative<Blocks>(init)
                 ? std::get<Blocks>(std::move(init))
                 : random_point(sphere, std::get<std::uint64_t>(init));
  require_matches(V, sphere, "wmmse_sum_power");

  RunReport report;
  report.method = "wmmse";
  auto record = [&](int iter, double mu) {
    auto [rep, g] = obj.rates_and_gradient(V);
    const TangentX rg = project_tangent(V, g, sphere);
    report.trace.push_back({iter, rep.wsr_bits(), std::sqrt(metric(rg, rg)), mu, 0, elapsed()});
    return rep.wsr_bits();
  };
  double wsr = record(0, 0.0);
  report.stop = StopReason::MaxIterations;

  for (int it = 1; it <= params.max_iters; ++it) {
    const Blocks Vu = clusters_to_users(V, K);
    CMat A = CMat::Zero(Nt, Nt);
    CMat B(Nt, K * d);
    for (int k = 0; k < K; ++k) {
      const CMat &Hk = ch.user(k);
      CMat J = cfg.sigma2[k] * CMat::Identity(ch.Nr(), ch.Nr());
      for (int j = 0; j < K; ++j) {
        const CMat HV = Hk * Vu[j];
        J += HV * HV.adjoint();
      }
      const CMat HVk = Hk * Vu[k];
      const CMat U = HermitianFactor(symmetrize(J)).solve(HVk);
      const CMat Emse = CMat::Identity(d, d) - U.adjoint() * HVk;
      const CMat Wt = HermitianFactor(symmetrize(Emse)).solve(CMat::Identity(d, d));
      const CMat HU = Hk.adjoint() * U;
      A += cfg.omega[k] * HU * Wt * HU.adjoint();
      B.middleCols(k * d, d) = cfg.omega[k] * HU * Wt;
    }
    Eigen::SelfAdjointEigenSolver<CMat> eig(symmetrize(A));
    const RVec lambda = eig.eigenvalues().cwiseMax(0.0);
    const CMat DB = eig.eigenvectors().adjoint() * B;
    const RVec row_energy = DB.rowwise().squaredNorm();

    double mu = 0.0;
    const double tiny = 1e-12 * std::max(lambda.maxCoeff(), 0.0);
    bool need_mu = detail::wmmse_power(lambda, row_energy, 0.0) > P;
    for (Eigen::Index i = 0; i < lambda.size() && !need_mu; ++i)
      need_mu = lambda[i] <= tiny && row_energy[i] > 0.0;
    if (need_mu) {
      double lo = 0.0;
      double hi = std::max(tiny, std::numeric_limits<double>::min());
      int doublings = 0;
      while (detail::wmmse_power(lambda, row_energy, hi) > P) {
        lo = hi;
        hi *= 2.0;
        if (++doublings > params.max_doublings)
          throw Error(ErrorCode::BisectionFailed, "wmmse: no bracket for the power multiplier");
      }
      for (int s = 0; s < params.bisection_steps && hi - lo > 1e-15 * hi; ++s) {
        const double mid = 0.5 * (lo + hi);
        (detail::wmmse_power(lambda, row_energy, mid) > P ? lo : hi) = mid;
      }
      mu = hi;
    }
    RVec inv(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
      inv[i] = (lambda[i] + mu > 0.0) ? 1.0 / (lambda[i] + mu) : 0.0;
    const CMat Vall = eig.eigenvectors() * (inv.asDiagonal() * DB);
    Blocks users;
    for (int k = 0; k < K; ++k) users.push_back(Vall.middleCols(k * d, d));
    V = users_to_clusters(users, 1);

    const double prev = wsr;
    wsr = record(it, mu);
    report.iterations = it;
    const double delta = std::abs(wsr - prev);
    if (delta < params.report_tol && !report.wsr_converged_iter) {
      report.wsr_converged_iter = it;
      report.wsr_converged_ns = report.trace.back().elapsed_ns;
    }
    if (params.wsr_tol > 0.0 && delta < params.wsr_tol) {
      report.stop = StopReason::WsrTolerance;
      break;
    }
    if (params.time_budget_ns > 0 && report.trace.back().elapsed_ns >= params.time_budget_ns) {
      report.stop = StopReason::TimeBudget;
      break;
    }
  }
  report.wsr_bits = wsr;
  report.grad_norm = report.trace.back().grad_norm;
  report.X = V;
  report.V = PointV::from_clusters(std::move(V), K);
  return report;
}

} // namespace drcg
