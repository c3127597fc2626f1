#pragma once

// Weighted sum-rate objective and its Euclidean gradient, in both the full
// beamformer space (channels H_k, variable V) and the reduced space
// (effective channels G_k, variable X). The two share one engine: user k
// sees a per-user channel A_k and every user j transmits a stack B_j.
//
// Gradient convention: the returned gradient ∇f is the conjugate-coordinate
// (Wirtinger) gradient, so that df = 2·Re⟨∇f, dB⟩ for f = −Σ ω_k R_k.

#include "drcg/blocks.hpp"
#include "drcg/channel.hpp"
#include "drcg/numerics.hpp"
#include "drcg/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace drcg {

/// df = kWirtingerFactor · Re⟨∇f, dB⟩.
inline constexpr double kWirtingerFactor = 2.0;

inline double nats_to_bits(double nats) { return nats / std::numbers::ln2; }

struct RateReport {
  std::vector<double> rates;   // nats, per user
  double wsr = 0.0;            // Σ ω_k R_k, nats
  std::vector<double> cond_S;  // condition estimates of S_k
  std::vector<double> cond_F;  // condition estimates of F_k

  double wsr_bits() const { return nats_to_bits(wsr); }
  double rate_bits(int k) const { return nats_to_bits(rates[k]); }
};

struct RateInputs {
  std::span<const CMat> channels;  // A_k, Nr x D
  std::span<const CMat> beams;     // B_k, D x d
  std::span<const double> sigma2;
  std::span<const double> omega;
};

namespace detail {

struct Covariances {
  std::vector<std::vector<CMat>> AB;  // AB[i][j] = A_i B_j
  std::vector<HermitianFactor> S;     // σ_i²I + Σ_j A_i B_j B_jᴴ A_iᴴ
  std::vector<HermitianFactor> F;     // σ_i²I + Σ_{j≠i} ...
};

inline Covariances assemble(const RateInputs &in) {
  const std::size_t K = in.channels.size();
  if (in.beams.size() != K || in.sigma2.size() != K || in.omega.size() != K)
    throw Error(ErrorCode::DimensionMismatch, "rates: per-user input lengths differ");
  Covariances cov;
  cov.AB.resize(K);
  cov.S.reserve(K);
  cov.F.reserve(K);
  for (std::size_t i = 0; i < K; ++i) {
    const CMat &A = in.channels[i];
    cov.AB[i].reserve(K);
    for (std::size_t j = 0; j < K; ++j) {
      if (in.beams[j].rows() != A.cols())
        throw Error(ErrorCode::DimensionMismatch, "rates: channel/beam inner dimension");
      cov.AB[i].push_back(A * in.beams[j]);
    }
    const Eigen::Index nr = A.rows();
    CMat F = CMat::Zero(nr, nr);
    F.diagonal().setConstant(in.sigma2[i]);
    for (std::size_t j = 0; j < K; ++j)
      if (j != i) F.noalias() += cov.AB[i][j] * cov.AB[i][j].adjoint();
    CMat S = F;
    S.noalias() += cov.AB[i][i] * cov.AB[i][i].adjoint();
    cov.S.emplace_back(std::move(S), HermitianFactor::Trusted{});
    cov.F.emplace_back(std::move(F), HermitianFactor::Trusted{});
  }
  return cov;
}

inline RateReport rates_from(const Covariances &cov, const RateInputs &in) {
  RateReport rep;
  const std::size_t K = cov.S.size();
  for (std::size_t k = 0; k < K; ++k) {
    // logdet S ≥ logdet F holds exactly; clamp roundoff below zero.
    const double r = std::max(0.0, cov.S[k].logdet() - cov.F[k].logdet());
    rep.rates.push_back(r);
    rep.cond_S.push_back(cov.S[k].condition_estimate());
    rep.cond_F.push_back(cov.F[k].condition_estimate());
  }
  for (std::size_t k = 0; k < K; ++k) rep.wsr += in.omega[k] * rep.rates[k];
  return rep;
}

/// ∇f(B_k) = −ω_k A_kᴴS_k⁻¹A_kB_k − Σ_{i≠k} ω_i A_iᴴ(S_i⁻¹ − F_i⁻¹)A_iB_k.
inline Blocks gradient_from(const Covariances &cov, const RateInputs &in) {
  const std::size_t K = cov.S.size();
  Blocks grad;
  grad.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    CMat g = CMat::Zero(in.beams[k].rows(), in.beams[k].cols());
    for (std::size_t i = 0; i < K; ++i) {
      const CMat &y = cov.AB[i][k];
      CMat w = cov.S[i].solve(y);
      if (i != k) w -= cov.F[i].solve(y);
      g.noalias() -= in.omega[i] * (in.channels[i].adjoint() * w);
    }
    grad.push_back(std::move(g));
  }
  return grad;
}

} // namespace detail

inline RateReport weighted_rates(const RateInputs &in) {
  const auto cov = detail::assemble(in);
  return detail::rates_from(cov, in);
}

/// Per-user Wirtinger gradient of f = −Σ ω_k R_k.
inline Blocks weighted_rate_gradient(const RateInputs &in) {
  const auto cov = detail::assemble(in);
  return detail::gradient_from(cov, in);
}

inline std::pair<RateReport, Blocks> weighted_rates_and_gradient(const RateInputs &in) {
  const auto cov = detail::assemble(in);
  return {detail::rates_from(cov, in), detail::gradient_from(cov, in)};
}

inline RateInputs full_inputs(const PointV &V, const ChannelSet &ch, const SystemConfig &cfg,
                              std::vector<CMat> &channels) {
  channels.clear();
  for (int k = 0; k < ch.K(); ++k) channels.push_back(ch.user(k));
  return {channels, V.users(), cfg.sigma2, cfg.omega};
}

inline RateReport wsr_V(const PointV &V, const ChannelSet &ch, const SystemConfig &cfg) {
  std::vector<CMat> channels;
  return weighted_rates(full_inputs(V, ch, cfg, channels));
}

inline RateReport wsr_X(const PointX &X, const ReducedProblem &rp) {
  return weighted_rates({rp.G, X.users(), rp.sigma2, rp.omega});
}

inline GradX egrad_X(const PointX &X, const ReducedProblem &rp) {
  return GradX::from_users(weighted_rate_gradient({rp.G, X.users(), rp.sigma2, rp.omega}),
                           rp.C);
}

inline GradV egrad_V(const PointV &V, const ChannelSet &ch, const SystemConfig &cfg) {
  std::vector<CMat> channels;
  return GradV::from_users(weighted_rate_gradient(full_inputs(V, ch, cfg, channels)), ch.C());
}

/// Objective over per-cluster blocks X^(c), as seen by the solver.
class ReducedObjective {
public:
  explicit ReducedObjective(const ReducedProblem &rp) : rp_(&rp) {}

  RateReport rates(const Blocks &x) const {
    const auto users = clusters_to_users(x, rp_->K);
    return weighted_rates({rp_->G, users, rp_->sigma2, rp_->omega});
  }
  /// f = −WSR in nats.
  double value(const Blocks &x) const { return -rates(x).wsr; }

  std::pair<RateReport, Blocks> rates_and_gradient(const Blocks &x) const {
    const auto users = clusters_to_users(x, rp_->K);
    auto [rep, g] = weighted_rates_and_gradient({rp_->G, users, rp_->sigma2, rp_->omega});
    return {std::move(rep), users_to_clusters(g, rp_->C)};
  }

  const ReducedProblem &problem() const { return *rp_; }

private:
  const ReducedProblem *rp_;
};

/// Objective over per-cluster blocks V^(c) in the full antenna space.
class FullObjective {
public:
  FullObjective(const ChannelSet &ch, const SystemConfig &cfg) : ch_(&ch), cfg_(&cfg) {
    for (int k = 0; k < ch.K(); ++k) channels_.push_back(ch.user(k));
  }

  RateReport rates(const Blocks &v) const {
    const auto users = clusters_to_users(v, ch_->K());
    return weighted_rates({channels_, users, cfg_->sigma2, cfg_->omega});
  }
  double value(const Blocks &v) const { return -rates(v).wsr; }

  std::pair<RateReport, Blocks> rates_and_gradient(const Blocks &v) const {
    const auto users = clusters_to_users(v, ch_->K());
    auto [rep, g] = weighted_rates_and_gradient({channels_, users, cfg_->sigma2, cfg_->omega});
    return {std::move(rep), users_to_clusters(g, ch_->C())};
  }

private:
  const ChannelSet *ch_;
  const SystemConfig *cfg_;
  std::vector<CMat> channels_;
};

} // namespace drcg
