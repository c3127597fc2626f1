#include "drcg/reduction.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace drcg {
namespace {

using testing::random_cmat;
using testing::unit_channel;
using testing::unit_config;

Blocks random_x(const ReducedProblem &rp, Rng &rng) {
  Blocks X;
  for (int c = 0; c < rp.C; ++c) X.push_back(random_cmat(rp.K * rp.Nr, rp.K * rp.d, rng));
  return X;
}

TEST(BuildReduced, IdentityChannel) {
  // C = 1, K·Nr = L, H^(1) = I.
  const CMat I = CMat::Identity(4, 4);
  ChannelSet ch(2, 1, {I.topRows(2), I.bottomRows(2)});
  const ReducedProblem rp = build_reduced(ch, unit_config(1, 4, 2, 2, 2));
  EXPECT_LT((rp.Q[0] - I).norm(), 1e-15);
  for (int k = 0; k < 2; ++k) EXPECT_LT((rp.G[k] - ch.user(k)).norm(), 1e-15);
}

TEST(BuildReduced, GramIsHermitianAndMatchesDefinition) {
  const ChannelSet ch = unit_channel(2, 3, 2, 8, 4);
  const ReducedProblem rp = build_reduced(ch, unit_config(3, 8, 2, 2, 2));
  for (int c = 0; c < 3; ++c) {
    EXPECT_LT(hermitian_residual(rp.Q[c]), 1e-12);
    EXPECT_TRUE(rp.Q[c] == gram(ch.cluster(c)));
    EXPECT_LT((rp.Q[c] - ch.cluster(c) * ch.cluster(c).adjoint()).norm(), 1e-12 * rp.Q[c].norm());
  }
  for (int k = 0; k < 2; ++k)
    for (int c = 0; c < 3; ++c)
      EXPECT_LT((rp.G[k].middleCols(c * 4, 4) - ch.block(k, c) * ch.cluster(c).adjoint()).norm(),
                1e-12);
}

TEST(BuildReduced, SingleUserTwoClustersShape) {
  const ChannelSet ch = unit_channel(1, 2, 2, 4, 8);
  const ReducedProblem rp = build_reduced(ch, unit_config(2, 4, 1, 2, 2));
  ASSERT_EQ(rp.G.size(), 1u);
  EXPECT_EQ(rp.G[0].rows(), 2);
  EXPECT_EQ(rp.G[0].cols(), 4);  // two blocks of width Nr
}

TEST(BuildReduced, RankDeficientPropagates) {
  Rng rng(2);
  const CMat h = random_cmat(2, 4, rng);
  ChannelSet ch(2, 1, {h, h});
  try {
    build_reduced(ch, unit_config(1, 4, 2, 2, 2));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
  }
}

TEST(Lift, ZeroAndIdentity) {
  const CMat I = CMat::Identity(4, 4);
  ChannelSet ch(2, 1, {I.topRows(2), I.bottomRows(2)});
  Rng rng(3);
  const Blocks X{random_cmat(4, 4, rng)};
  EXPECT_LT((lift(PointX::from_clusters(X, 2), ch).cluster(0) - X[0]).norm(), 1e-15);
  EXPECT_EQ(lift(PointX::from_clusters({CMat::Zero(4, 4)}, 2), ch).cluster(0).norm(), 0.0);
}

TEST(Lift, PowerIdentity) {
  const ChannelSet ch = unit_channel(3, 2, 2, 10, 5);
  const ReducedProblem rp = build_reduced(ch, unit_config(2, 10, 3, 2, 1));
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const PointX X = PointX::from_clusters(random_x(rp, rng), rp.K);
    const PointV V = lift(X, ch);
    for (int c = 0; c < rp.C; ++c) {
      const double reduced = cluster_power(X.cluster(c), rp.Q[c]);
      EXPECT_NEAR(reduced, V.cluster(c).squaredNorm(), 1e-9 * reduced);
    }
  }
}

TEST(Lift, ViewsStayConsistent) {
  const ChannelSet ch = unit_channel(2, 3, 2, 6, 7);
  const ReducedProblem rp = build_reduced(ch, unit_config(3, 6, 2, 2, 2));
  Rng rng(8);
  const PointV V = lift(PointX::from_clusters(random_x(rp, rng), rp.K), ch);
  for (int k = 0; k < 2; ++k)
    for (int c = 0; c < 3; ++c)
      EXPECT_TRUE(V.user(k).middleRows(c * 6, 6) == V.cluster(c).middleCols(k * 2, 2));
}

TEST(ProjectToSubspace, RoundTrip) {
  const ChannelSet ch = unit_channel(2, 2, 2, 8, 9);
  const ReducedProblem rp = build_reduced(ch, unit_config(2, 8, 2, 2, 2));
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const PointX X0 = PointX::from_clusters(random_x(rp, rng), rp.K);
    const PointX X = project_to_subspace(lift(X0, ch), rp, ch);
    for (int c = 0; c < rp.C; ++c)
      EXPECT_LT((X.cluster(c) - X0.cluster(c)).norm(), 1e-8 * X0.cluster(c).norm());
  }
}

TEST(ProjectToSubspace, ZeroMapsToZero) {
  const ChannelSet ch = unit_channel(2, 2, 2, 8, 11);
  const ReducedProblem rp = build_reduced(ch, unit_config(2, 8, 2, 2, 2));
  const Blocks V0(2, CMat::Zero(8, 4));
  const PointX X = project_to_subspace(PointV::from_clusters(V0, 2), rp, ch);
  for (const auto &b : X.clusters()) EXPECT_EQ(b.norm(), 0.0);
}

TEST(ProjectToSubspace, IgnoresNullSpaceComponent) {
  const ChannelSet ch = unit_channel(2, 2, 2, 8, 12);
  const ReducedProblem rp = build_reduced(ch, unit_config(2, 8, 2, 2, 2));
  Rng rng(13);
  const PointV V = lift(PointX::from_clusters(random_x(rp, rng), rp.K), ch);
  Blocks perturbed = V.clusters();
  for (int c = 0; c < 2; ++c) {
    const CMat N = testing::null_space(ch.cluster(c));
    ASSERT_EQ(N.cols(), 8 - 4);
    perturbed[c] += N * random_cmat(N.cols(), 4, rng);
  }
  const PointX a = project_to_subspace(V, rp, ch);
  const PointX b = project_to_subspace(PointV::from_clusters(perturbed, 2), rp, ch);
  for (int c = 0; c < 2; ++c)
    EXPECT_LT((a.cluster(c) - b.cluster(c)).norm(), 1e-8 * a.cluster(c).norm());
  for (double r : subspace_residuals(V, rp, ch)) EXPECT_LT(r, 1e-10);
  for (double r : subspace_residuals(PointV::from_clusters(perturbed, 2), rp, ch))
    EXPECT_GT(r, 1e-3);
}

TEST(Blocks, ReblockingRoundTrip) {
  Rng rng(14);
  Blocks clusters;
  for (int c = 0; c < 3; ++c) clusters.push_back(random_cmat(5, 6, rng));
  const Blocks users = clusters_to_users(clusters, 3);
  ASSERT_EQ(users.size(), 3u);
  EXPECT_EQ(users[0].rows(), 15);
  EXPECT_EQ(users[0].cols(), 2);
  const Blocks back = users_to_clusters(users, 3);
  for (int c = 0; c < 3; ++c) EXPECT_TRUE(back[c] == clusters[c]);
}

} // namespace
} // namespace drcg
