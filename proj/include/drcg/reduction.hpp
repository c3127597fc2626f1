#pragma once

// Reduced problem: Gram matrices Q^(c) = H^(c)(H^(c))ᴴ, effective channels
// G_k = [H_k^(1)(H^(1))ᴴ ... H_k^(C)(H^(C))ᴴ], and the maps between the
// full beamformer V and the reduced variable X with V^(c) = (H^(c))ᴴ X^(c).

#include "drcg/blocks.hpp"
#include "drcg/channel.hpp"
#include "drcg/numerics.hpp"

#include <string>
#include <vector>

namespace drcg {

struct ReducedProblem {
  int K = 0, C = 0, Nr = 0, L = 0, d = 0;
  std::vector<CMat> G;                // K entries, Nr x C·K·Nr
  std::vector<CMat> Q;                // C entries, K·Nr x K·Nr, Hermitian PD
  std::vector<HermitianFactor> Qfactor;
  std::vector<double> P, sigma2, omega;

  int reduced_rows() const { return K * Nr; }
};

inline CMat gram(const CMat &H) { return symmetrize(H * H.adjoint()); }

inline ReducedProblem build_reduced(const ChannelSet &ch, const SystemConfig &cfg) {
  if (ch.K() != cfg.K || ch.C() != cfg.C || ch.Nr() != cfg.Nr || ch.L() != cfg.L)
    throw Error(ErrorCode::DimensionMismatch, "build_reduced: channel/config shape mismatch");
  ReducedProblem rp;
  rp.K = cfg.K;
  rp.C = cfg.C;
  rp.Nr = cfg.Nr;
  rp.L = cfg.L;
  rp.d = cfg.d;
  rp.P = cfg.P;
  rp.sigma2 = cfg.sigma2;
  rp.omega = cfg.omega;
  for (int c = 0; c < rp.C; ++c) {
    rp.Q.push_back(gram(ch.cluster(c)));
    try {
      rp.Qfactor.emplace_back(rp.Q.back());
    } catch (const Error &e) {
      throw Error(ErrorCode::RankDeficient,
                  "build_reduced: Q^(" + std::to_string(c) + ") not PD (" + e.what() + ")");
    }
  }
  const int width = rp.K * rp.Nr;
  for (int k = 0; k < rp.K; ++k) {
    CMat Gk(rp.Nr, rp.C * width);
    for (int c = 0; c < rp.C; ++c)
      Gk.middleCols(c * width, width) = ch.block(k, c) * ch.cluster(c).adjoint();
    rp.G.push_back(std::move(Gk));
  }
  return rp;
}

/// V^(c) = (H^(c))ᴴ X^(c) for every cluster.
inline PointV lift(const PointX &X, const ChannelSet &ch) {
  if (X.C() != ch.C() || X.K() != ch.K())
    throw Error(ErrorCode::DimensionMismatch, "lift: cluster/user count mismatch");
  Blocks V;
  V.reserve(ch.C());
  for (int c = 0; c < ch.C(); ++c) {
    if (X.cluster(c).rows() != ch.cluster(c).rows())
      throw Error(ErrorCode::DimensionMismatch, "lift: X^(c) row count != K*Nr");
    V.push_back(ch.cluster(c).adjoint() * X.cluster(c));
  }
  return PointV::from_clusters(std::move(V), ch.K());
}

/// Least-squares inverse of lift: X^(c) = (Q^(c))⁻¹ H^(c) V^(c).
inline PointX project_to_subspace(const PointV &V, const ReducedProblem &rp,
                                  const ChannelSet &ch) {
  if (V.C() != rp.C || V.K() != rp.K)
    throw Error(ErrorCode::DimensionMismatch, "project_to_subspace: shape mismatch");
  Blocks X;
  X.reserve(rp.C);
  for (int c = 0; c < rp.C; ++c) {
    if (V.cluster(c).rows() != ch.L())
      throw Error(ErrorCode::DimensionMismatch, "project_to_subspace: V^(c) rows != L");
    X.push_back(rp.Qfactor[c].solve(ch.cluster(c) * V.cluster(c)));
  }
  return PointX::from_clusters(std::move(X), rp.K);
}

/// tr((X^(c))ᴴ Q^(c) X^(c)).
inline double cluster_power(const CMat &Xc, const CMat &Q) {
  return frob_inner(Xc, Q * Xc);
}

/// ‖V^(c) − lift(project(V))^(c)‖_F / ‖V^(c)‖_F per cluster.
inline std::vector<double> subspace_residuals(const PointV &V, const ReducedProblem &rp,
                                              const ChannelSet &ch) {
  const PointV back = lift(project_to_subspace(V, rp, ch), ch);
  std::vector<double> out;
  for (int c = 0; c < rp.C; ++c) {
    const double n = V.cluster(c).norm();
    const double r = (V.cluster(c) - back.cluster(c)).norm();
    out.push_back(n == 0.0 ? r : r / n);
  }
  return out;
}

} // namespace drcg
