#include "drcg/solver.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

namespace drcg {
namespace {

using testing::random_blocks;
using testing::random_cmat;
using testing::unit_channel;
using testing::unit_config;

// f(x) = Re tr(xᴴ A x) on a sphere; Wirtinger gradient A·x.
class QuadraticObjective {
public:
  explicit QuadraticObjective(CMat A) : A_(std::move(A)) {}
  double value(const Blocks &x) const { return frob_inner(x[0], A_ * x[0]); }
  std::pair<RateReport, Blocks> rates_and_gradient(const Blocks &x) const {
    RateReport r;
    r.wsr = -value(x);
    return {r, Blocks{A_ * x[0]}};
  }

private:
  CMat A_;
};

SolverParams tight_params() {
  SolverParams p;
  p.wsr_tol = 0.0;
  p.grad_tol = 1e-10;
  p.max_iters = 3000;
  return p;
}

TEST(SolverParams, Validation) {
  SolverParams p;
  EXPECT_NO_THROW(p.validate());
  p.sigma = 1.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.p = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.alpha0 = -1.0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(RiemannianGrad, TangentEuclideanGradientUnchanged) {
  Rng rng(1);
  const ProductManifold M = make_sphere_manifold({1.0}, 4, 1, 1);
  const Blocks X = random_point(M, 2);
  const CMat B = random_cmat(4, 4, rng);
  const QuadraticObjective obj(B.adjoint() * B);
  const Blocks egrad = obj.rates_and_gradient(X).second;
  const TangentX g = riemannian_grad(obj, X, M);
  const TangentX gg = project_tangent(X, g, M);
  EXPECT_LT((gg[0] - g[0]).norm(), 1e-12 * g[0].norm());
  // The discarded part is normal, hence orthogonal to grad.
  EXPECT_LE(std::abs(metric(g, axpy(egrad, -1.0, g))), 1e-8 * norm2(egrad));
}

TEST(RiemannianGrad, VanishesAtSingleUserEigenSolution) {
  const ChannelSet ch = unit_channel(1, 1, 2, 4, 3);
  const SystemConfig cfg = unit_config(1, 4, 1, 2, 1);
  const ReducedProblem rp = build_reduced(ch, cfg);
  Eigen::SelfAdjointEigenSolver<CMat> eig(rp.Q[0]);
  const double lmax = eig.eigenvalues()[1];
  const CMat x = eig.eigenvectors().col(1) * std::sqrt(cfg.P[0] / lmax);
  const ProductManifold M = make_ellipsoid_manifold(rp);
  ASSERT_TRUE(on_manifold({x}, M, 1e-12));
  const TangentX g = riemannian_grad(ReducedObjective(rp), {x}, M);
  EXPECT_LE(std::sqrt(norm2(g)), 1e-6);
}

TEST(RiemannianGrad, OrthogonalToNormalPart) {
  const ChannelSet ch = unit_channel(2, 2, 2, 6, 4);
  const ReducedProblem rp = build_reduced(ch, unit_config(2, 6, 2, 2, 2));
  const ProductManifold M = make_ellipsoid_manifold(rp);
  const ReducedObjective obj(rp);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Blocks X = random_point(M, seed);
    const Blocks egrad = obj.rates_and_gradient(X).second;
    const TangentX g = riemannian_grad(obj, X, M);
    EXPECT_LE(std::abs(metric(g, axpy(egrad, -1.0, g))), 1e-8 * norm2(egrad));
  }
}

TEST(BetaHs, VanishingGradientChangeRestarts) {
  Rng rng(5);
  const Blocks g{random_cmat(3, 2, rng)};
  const Blocks eta{random_cmat(3, 2, rng)};
  const BetaResult b = beta_hs(g, g, eta);
  EXPECT_EQ(b.beta, 0.0);
  EXPECT_TRUE(b.restart);
}

TEST(BetaHs, MatchesDirectFormula) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Blocks g{random_cmat(3, 2, rng), random_cmat(2, 2, rng)};
    const Blocks tg{random_cmat(3, 2, rng), random_cmat(2, 2, rng)};
    const Blocks te{random_cmat(3, 2, rng), random_cmat(2, 2, rng)};
    double num = 0.0, den = 0.0;
    for (int c = 0; c < 2; ++c) {
      num += (g[c].adjoint() * (g[c] - tg[c])).trace().real();
      den += (te[c].adjoint() * (g[c] - tg[c])).trace().real();
    }
    EXPECT_NEAR(beta_hs(g, tg, te).beta, num / den, 1e-12 * std::abs(num / den));
  }
}

TEST(SafeguardedDirection, AlwaysDescends) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Blocks g{random_cmat(3, 2, rng)};
    const Blocks te{random_cmat(3, 2, rng)};
    const double beta = rng.uniform(-5.0, 5.0);
    double used = 0.0;
    const TangentX eta = safeguarded_direction(g, te, beta, &used);
    EXPECT_LE(metric(g, eta), 0.0);
    EXPECT_TRUE(used == beta || used == std::max(beta, 0.0) || used == 0.0);
  }
}

TEST(Armijo, QuadraticOnSphereSatisfiesSufficientDecrease) {
  Rng rng(8);
  const CMat B = random_cmat(4, 4, rng);
  const QuadraticObjective obj(B.adjoint() * B);
  const ProductManifold M = make_sphere_manifold({1.0}, 4, 1, 1);
  SolverParams params;
  params.alpha0 = 1.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Blocks X = random_point(M, seed);
    const TangentX g = riemannian_grad(obj, X, M);
    const TangentX eta = scaled(g, -1.0);
    const double f = obj.value(X);
    const LineSearchResult ls = armijo_search(obj, M, X, eta, f, g, params, params.alpha0);
    ASSERT_FALSE(ls.failed);
    EXPECT_LE(ls.f, f + params.p * ls.alpha * kWirtingerFactor * metric(g, eta));
    EXPECT_LT(ls.f, f);
    EXPECT_NEAR(ls.alpha, std::pow(params.sigma, ls.backtracks), 1e-15);
    EXPECT_TRUE(on_manifold(ls.X, M, 1e-12));
  }
}

TEST(Armijo, ZeroDirectionIsNotAStep) {
  const QuadraticObjective obj(CMat::Identity(3, 3));
  const ProductManifold M = make_sphere_manifold({1.0}, 3, 1, 1);
  const Blocks X = random_point(M, 1);
  const TangentX zero = zeros_like(X);
  const LineSearchResult ls = armijo_search(obj, M, X, zero, obj.value(X), zero, SolverParams{}, 1.0);
  EXPECT_EQ(ls.alpha, 0.0);
  EXPECT_EQ(ls.backtracks, 0);
  EXPECT_FALSE(ls.failed);
}

TEST(Armijo, PaperStepOnDeskInstanceBacktracksFinitely) {
  SystemConfig cfg = SystemConfig::make(2, 8, 2, 2, 2, {100.0, 500.0}, -80.0, 21);
  const ChannelSet ch = draw_full_rank_channels(cfg, make_topology(cfg));
  const ReducedProblem rp = build_reduced(ch, cfg);
  const ProductManifold M = make_ellipsoid_manifold(rp);
  const ReducedObjective obj(rp);
  const Blocks X = random_point(M, 5);
  const TangentX g = riemannian_grad(obj, X, M);
  const LineSearchResult ls =
      armijo_search(obj, M, X, scaled(g, -1.0), obj.value(X), g, SolverParams{}, 1e10);
  EXPECT_FALSE(ls.failed);
  EXPECT_LT(ls.backtracks, SolverParams{}.max_backtracks);
  RecordProperty("backtracks_reduced", ls.backtracks);

  // Full-dimension sphere variables are O(1), so the same α⁰ needs dozens of
  // backtracks before the first acceptance.
  const FullObjective full(ch, cfg);
  const ProductManifold S = make_sphere_manifold(cfg.P, cfg.L, cfg.K, cfg.d);
  const Blocks V = random_point(S, 5);
  const TangentX gv = riemannian_grad(full, V, S);
  const LineSearchResult lv =
      armijo_search(full, S, V, scaled(gv, -1.0), full.value(V), gv, SolverParams{}, 1e10);
  EXPECT_FALSE(lv.failed);
  EXPECT_GT(lv.backtracks, 20);
  EXPECT_LT(lv.backtracks, SolverParams{}.max_backtracks);
  RecordProperty("backtracks_sphere", lv.backtracks);
}

TEST(Armijo, ReportsFailureWhenBacktrackBudgetTooSmall) {
  Rng rng(9);
  const CMat B = random_cmat(4, 4, rng);
  const QuadraticObjective obj(B.adjoint() * B);
  const ProductManifold M = make_sphere_manifold({1.0}, 4, 1, 1);
  const Blocks X = random_point(M, 3);
  const TangentX g = riemannian_grad(obj, X, M);
  SolverParams params;
  params.max_backtracks = 0;
  // η points uphill while the supplied gradient claims it descends.
  const LineSearchResult ls = armijo_search(obj, M, X, g, obj.value(X), scaled(g, -1.0), params, 1e3);
  EXPECT_TRUE(ls.failed);
  EXPECT_EQ(ls.backtracks, 0);
}

TEST(Solve, SingleUserEigenSolution) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ChannelSet ch = unit_channel(1, 1, 2, 4, seed);
    const SystemConfig cfg = unit_config(1, 4, 1, 2, 1);
    const ReducedProblem rp = build_reduced(ch, cfg);
    const RunReport r = solve_reduced(rp, ch, tight_params(), seed);
    const double lmax = testing::max_singular_value_sq(ch.cluster(0));
    const double closed = std::log2(1.0 + cfg.P[0] * lmax / cfg.sigma2[0]);
    EXPECT_NEAR(r.wsr_bits, closed, 1e-6 * closed);
  }
}

TEST(Solve, ZeroWeightUserIsIgnored) {
  const ChannelSet ch = unit_channel(2, 1, 2, 6, 11);
  SystemConfig cfg = unit_config(1, 6, 2, 2, 1);
  cfg.omega = {1.0, 0.0};
  const ReducedProblem rp = build_reduced(ch, cfg);
  SolverParams params = tight_params();
  params.max_iters = 20000;
  const RunReport r = solve_reduced(rp, ch, params, std::uint64_t{3});

  // The same problem without the second user.
  ChannelSet solo(1, 1, {ch.block(0, 0)});
  SystemConfig solo_cfg = unit_config(1, 6, 1, 2, 1);
  const RunReport s = solve_reduced(build_reduced(solo, solo_cfg), solo, tight_params(), std::uint64_t{3});
  const double closed =
      std::log2(1.0 + cfg.P[0] * testing::max_singular_value_sq(ch.block(0, 0)) / cfg.sigma2[0]);
  EXPECT_NEAR(s.wsr_bits, closed, 1e-6 * closed);
  EXPECT_NEAR(r.wsr_bits, s.wsr_bits, 1e-4 * closed);
}

TEST(Solve, MonotoneFeasibleAndTight) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SystemConfig cfg = SystemConfig::make(2, 8, 2, 2, 2, {100.0, 500.0}, -80.0, seed);
    const ChannelSet ch = draw_full_rank_channels(cfg, make_topology(cfg));
    const ReducedProblem rp = build_reduced(ch, cfg);
    const ProductManifold M = make_ellipsoid_manifold(rp);
    double worst_feas = 0.0;
    SolveOptions opts;
    opts.on_iterate = [&](const SolverState &st) {
      worst_feas = std::max(worst_feas, feasibility_residual(st.X, M));
      if (st.iter > 0) EXPECT_LE(metric(st.prev_grad, st.prev_eta), 0.0);
    };
    SolverParams params;
    params.max_iters = 200;
    const RunReport r = solve_reduced(rp, ch, params, seed, opts);
    EXPECT_LE(worst_feas, 1e-8);
    for (std::size_t i = 1; i < r.trace.size(); ++i)
      EXPECT_GE(r.trace[i].wsr_bits, r.trace[i - 1].wsr_bits);
    for (int c = 0; c < cfg.C; ++c)
      EXPECT_NEAR(r.V.cluster(c).squaredNorm(), cfg.P[c], 1e-8 * cfg.P[c]);
    EXPECT_EQ(r.trace.front().iter, 0);
    EXPECT_EQ(r.trace.back().iter, r.iterations);
  }
}

TEST(Solve, GradientToleranceReached) {
  const ChannelSet ch = unit_channel(2, 2, 2, 6, 12);
  const SystemConfig cfg = unit_config(2, 6, 2, 2, 2);
  const ReducedProblem rp = build_reduced(ch, cfg);
  SolverParams params;
  params.wsr_tol = 0.0;
  params.grad_tol = 1e-5;
  params.max_iters = 20000;
  const RunReport r = solve_reduced(rp, ch, params, std::uint64_t{4});
  EXPECT_EQ(r.stop, StopReason::GradTolerance);
  EXPECT_LE(r.grad_norm, 1e-5);
}

TEST(Solve, WarmStartStillMonotone) {
  const ChannelSet ch = unit_channel(2, 2, 2, 6, 13);
  const ReducedProblem rp = build_reduced(ch, unit_config(2, 6, 2, 2, 2));
  SolverParams params;
  params.warm_start = true;
  params.wsr_tol = 1e-8;
  const RunReport r = solve_reduced(rp, ch, params, std::uint64_t{5});
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i].wsr_bits, r.trace[i - 1].wsr_bits);
}

TEST(Solve, TwoSeedsBothMonotone) {
  SystemConfig cfg = SystemConfig::make(2, 8, 2, 2, 2, {100.0, 500.0}, -80.0, 7);
  const ChannelSet ch = draw_full_rank_channels(cfg, make_topology(cfg));
  const ReducedProblem rp = build_reduced(ch, cfg);
  for (std::uint64_t seed : {1u, 2u}) {
    const RunReport r = solve_reduced(rp, ch, SolverParams{}, std::uint64_t{seed});
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i].wsr_bits, r.trace[i - 1].wsr_bits);
    RecordProperty("final_wsr_seed" + std::to_string(seed), std::to_string(r.wsr_bits));
  }
}

TEST(Solve, ZeroGradientReturnsImmediately) {
  const QuadraticObjective obj(CMat::Identity(3, 3));  // constant on the sphere
  const ProductManifold M = make_sphere_manifold({1.0}, 3, 1, 1);
  const RunReport r = solve(obj, M, SolverParams{}, random_point(M, 1));
  EXPECT_EQ(r.stop, StopReason::ZeroGradient);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.trace.size(), 1u);
}

TEST(Solve, QuadraticOnSphereFindsSmallestEigenvalue) {
  Rng rng(14);
  const CMat B = random_cmat(5, 5, rng);
  const CMat A = B.adjoint() * B;
  const ProductManifold M = make_sphere_manifold({1.0}, 5, 1, 1);
  SolverParams params = tight_params();
  params.alpha0 = 1.0;
  const RunReport r = solve(QuadraticObjective(A), M, params, random_point(M, 2));
  Eigen::SelfAdjointEigenSolver<CMat> eig(A);
  EXPECT_NEAR(-r.wsr_bits * std::log(2.0), eig.eigenvalues()[0], 1e-8);
}

} // namespace
} // namespace drcg
