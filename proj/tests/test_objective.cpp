#include "drcg/geometry.hpp"
#include "drcg/objective.hpp"
#include "drcg/reduction.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace drcg {
namespace {

using testing::random_cmat;
using testing::unit_channel;
using testing::unit_config;

struct Instance {
  SystemConfig cfg;
  ChannelSet ch;
  ReducedProblem rp;
};

Instance physical_instance(int C, int L, int K, int Nr, int d, std::uint64_t seed) {
  SystemConfig cfg = SystemConfig::make(C, L, K, Nr, d, {100.0, 500.0}, -80.0, seed);
  ChannelSet ch = draw_full_rank_channels(cfg, make_topology(cfg));
  ReducedProblem rp = build_reduced(ch, cfg);
  return {cfg, std::move(ch), std::move(rp)};
}

Instance unit_instance(int C, int L, int K, int Nr, int d, std::uint64_t seed) {
  SystemConfig cfg = unit_config(C, L, K, Nr, d);
  ChannelSet ch = unit_channel(K, C, Nr, L, seed);
  ReducedProblem rp = build_reduced(ch, cfg);
  return {cfg, std::move(ch), std::move(rp)};
}

PointX random_manifold_x(const ReducedProblem &rp, std::uint64_t seed) {
  return PointX::from_clusters(random_point(make_ellipsoid_manifold(rp), seed), rp.K);
}

TEST(WsrV, ZeroBeamformerHasZeroRate) {
  const Instance in = unit_instance(2, 6, 2, 2, 2, 1);
  const Blocks V0(2, CMat::Zero(6, 4));
  const RateReport r = wsr_V(PointV::from_clusters(V0, 2), in.ch, in.cfg);
  for (double rk : r.rates) EXPECT_EQ(rk, 0.0);
  EXPECT_EQ(r.wsr, 0.0);
}

TEST(WsrV, ScalarChannelMatchesShannon) {
  const Complex h(0.7, -1.3), v(0.4, 0.9);
  const double s2 = 0.25;
  ChannelSet ch(1, 1, {CMat::Constant(1, 1, h)});
  SystemConfig cfg = unit_config(1, 1, 1, 1, 1);
  cfg.sigma2 = {s2};
  const RateReport r =
      wsr_V(PointV::from_clusters({CMat::Constant(1, 1, v)}, 1), ch, cfg);
  EXPECT_NEAR(r.rates[0], std::log(1.0 + std::norm(h * v) / s2), 1e-14);
}

TEST(WsrV, MoreNoiseStrictlyLowersRate) {
  const Instance in = unit_instance(2, 6, 3, 2, 2, 2);
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Blocks V;
    for (int c = 0; c < 2; ++c) V.push_back(random_cmat(6, 6, rng));
    const PointV p = PointV::from_clusters(V, 3);
    const RateReport base = wsr_V(p, in.ch, in.cfg);
    for (int k = 0; k < 3; ++k) {
      SystemConfig noisier = in.cfg;
      noisier.sigma2[k] *= 2.0;
      EXPECT_LT(wsr_V(p, in.ch, noisier).rates[k], base.rates[k]);
    }
  }
}

TEST(WsrV, ReportsWeightedSumAndBits) {
  const Instance in = unit_instance(1, 6, 2, 2, 2, 4);
  SystemConfig cfg = in.cfg;
  cfg.omega = {0.3, 1.7};
  Rng rng(5);
  const PointV V = PointV::from_clusters({random_cmat(6, 4, rng)}, 2);
  const RateReport r = wsr_V(V, in.ch, cfg);
  EXPECT_EQ(r.wsr, 0.3 * r.rates[0] + 1.7 * r.rates[1]);
  EXPECT_NEAR(r.wsr_bits(), r.wsr / std::log(2.0), 1e-12);
  for (double c : r.cond_S) EXPECT_GE(c, 1.0);
}

TEST(WsrX, ZeroPoint) {
  const Instance in = unit_instance(2, 6, 2, 2, 2, 6);
  const Blocks X0(2, CMat::Zero(4, 4));
  EXPECT_EQ(wsr_X(PointX::from_clusters(X0, 2), in.rp).wsr, 0.0);
}

TEST(WsrX, EqualsFullRateAfterLift) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Instance in = physical_instance(2, 8, 2, 2, 2, seed);
    const PointX X = random_manifold_x(in.rp, seed + 100);
    const double reduced = wsr_X(X, in.rp).wsr;
    const double full = wsr_V(lift(X, in.ch), in.ch, in.cfg).wsr;
    EXPECT_NEAR(reduced, full, 1e-9 * full);
  }
}

TEST(WsrX, SingleUserHasNoInterference) {
  const Instance in = unit_instance(2, 4, 1, 2, 2, 7);
  const PointX X = random_manifold_x(in.rp, 8);
  const CMat &G = in.rp.G[0];
  const CMat &X1 = X.user(0);
  const CMat M = CMat::Identity(2, 2) + X1.adjoint() * G.adjoint() * G * X1 / in.cfg.sigma2[0];
  EXPECT_NEAR(wsr_X(X, in.rp).rates[0], testing::logdet_by_eigenvalues(M), 1e-12);
}

TEST(EgradX, SingleUserCollapse) {
  const Instance in = unit_instance(2, 4, 1, 2, 2, 9);
  const PointX X = random_manifold_x(in.rp, 10);
  const CMat &G = in.rp.G[0];
  const CMat S = in.cfg.sigma2[0] * CMat::Identity(2, 2) + G * X.user(0) * X.user(0).adjoint() * G.adjoint();
  const CMat expected = -G.adjoint() * S.inverse() * G * X.user(0);
  EXPECT_LT((egrad_X(X, in.rp).user(0) - expected).norm(), 1e-10 * expected.norm());
}

TEST(EgradX, LinearInWeights) {
  const Instance in = unit_instance(2, 6, 3, 2, 1, 11);
  const PointX X = random_manifold_x(in.rp, 12);
  ReducedProblem scaled_rp = in.rp;
  for (auto &w : scaled_rp.omega) w *= 2.5;
  const GradX g = egrad_X(X, in.rp);
  const GradX h = egrad_X(X, scaled_rp);
  for (int k = 0; k < 3; ++k) EXPECT_LT((h.user(k) - 2.5 * g.user(k)).norm(), 1e-12 * h.user(k).norm());
}

double max_fd_error(const std::function<double(const Blocks &)> &f, const Blocks &x,
                    const Blocks &grad, Rng &rng, int directions) {
  double worst = 0.0;
  const double h = 1e-6 * std::sqrt(norm2(x));
  auto check = [&](Blocks delta) {
    delta = scaled(delta, 1.0 / std::sqrt(norm2(delta)));
    const double fd = testing::central_difference(f, x, delta, h);
    const double an = kWirtingerFactor * testing::trace_inner(grad, delta);
    worst = std::max(worst, std::abs(fd - an) / std::abs(an));
  };
  for (int n = 0; n < directions; ++n) check(testing::random_blocks(x, rng));
  return worst;
}

TEST(EgradX, MatchesCentralDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Instance in = physical_instance(2, 8, 2, 2, 2, seed);
    const PointX X = random_manifold_x(in.rp, seed + 50);
    const ReducedObjective obj(in.rp);
    Rng rng(seed);
    const double err = max_fd_error([&](const Blocks &b) { return obj.value(b); }, X.clusters(),
                                    egrad_X(X, in.rp).clusters(), rng, 10);
    EXPECT_LE(err, 1e-6) << "seed " << seed;
  }
}

TEST(EgradV, SingleUserSingleClusterCollapse) {
  const Instance in = unit_instance(1, 6, 1, 2, 2, 13);
  Rng rng(14);
  const PointV V = PointV::from_clusters({random_cmat(6, 2, rng)}, 1);
  const CMat &H = in.ch.user(0);
  const CMat S = CMat::Identity(2, 2) + H * V.user(0) * V.user(0).adjoint() * H.adjoint();
  const CMat expected = -H.adjoint() * S.inverse() * H * V.user(0);
  EXPECT_LT((egrad_V(V, in.ch, in.cfg).user(0) - expected).norm(), 1e-10 * expected.norm());
}

TEST(EgradV, MatchesCentralDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Instance in = physical_instance(2, 8, 2, 2, 2, seed);
    const PointV V = lift(random_manifold_x(in.rp, seed + 70), in.ch);
    const FullObjective obj(in.ch, in.cfg);
    Rng rng(seed + 1);
    const double err = max_fd_error([&](const Blocks &b) { return obj.value(b); }, V.clusters(),
                                    egrad_V(V, in.ch, in.cfg).clusters(), rng, 10);
    EXPECT_LE(err, 1e-6) << "seed " << seed;
  }
}

TEST(EgradV, ClusterBlocksLieInChannelColumnSpace) {
  const Instance in = unit_instance(2, 8, 2, 2, 2, 15);
  Rng rng(16);
  Blocks Vb;
  for (int c = 0; c < 2; ++c) Vb.push_back(random_cmat(8, 4, rng));  // not in the subspace
  const GradV g = egrad_V(PointV::from_clusters(Vb, 2), in.ch, in.cfg);
  for (int c = 0; c < 2; ++c) {
    const CMat P = testing::column_space_projector(in.ch.cluster(c).adjoint());
    EXPECT_LT((g.cluster(c) - P * g.cluster(c)).norm(), 1e-8 * g.cluster(c).norm());
  }
  const auto res = subspace_residuals(PointV::from_clusters(g.clusters(), 2), in.rp, in.ch);
  for (double r : res) EXPECT_LT(r, 1e-8);
}

TEST(Gradients, ChainRuleAcrossSpaces) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Instance in = physical_instance(2, 8, 2, 2, 2, seed);
    const PointX X = random_manifold_x(in.rp, seed + 30);
    const GradX gx = egrad_X(X, in.rp);
    const GradV gv = egrad_V(lift(X, in.ch), in.ch, in.cfg);
    for (int c = 0; c < 2; ++c) {
      const CMat mapped = in.ch.cluster(c) * gv.cluster(c);
      EXPECT_LT((gx.cluster(c) - mapped).norm(), 1e-8 * gx.cluster(c).norm());
    }
  }
}

TEST(Objective, InvariantUnderPerUserUnitaryRotation) {
  const Instance in = unit_instance(2, 6, 2, 2, 2, 17);
  const PointX X = random_manifold_x(in.rp, 18);
  Rng rng(19);
  Blocks users = X.users();
  for (auto &u : users) {
    Eigen::HouseholderQR<CMat> qr(random_cmat(2, 2, rng));
    const CMat U = qr.householderQ();
    u = u * U;
  }
  const double a = wsr_X(X, in.rp).wsr;
  const double b = wsr_X(PointX::from_users(users, 2), in.rp).wsr;
  EXPECT_NEAR(a, b, 1e-9 * a);
}

TEST(Objective, ReducedAndFullAdaptersAgree) {
  const Instance in = physical_instance(2, 8, 2, 2, 2, 3);
  const PointX X = random_manifold_x(in.rp, 4);
  const ReducedObjective red(in.rp);
  const FullObjective full(in.ch, in.cfg);
  EXPECT_NEAR(red.value(X.clusters()), full.value(lift(X, in.ch).clusters()),
              1e-9 * std::abs(red.value(X.clusters())));
}

} // namespace
} // namespace drcg
