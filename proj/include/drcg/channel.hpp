#pragma once

// Clustered downlink channel: system configuration, single-cell topology,
// large-scale pathloss with log-normal shadowing and i.i.d. Rayleigh blocks.

#include "drcg/numerics.hpp"
#include "drcg/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace drcg {

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

struct SystemConfig {
  int C = 2;   // antenna clusters
  int L = 8;   // antennas per cluster
  int K = 2;   // users
  int Nr = 2;  // receive antennas per user
  int d = 2;   // streams per user
  std::vector<double> P;       // per-cluster budgets [W], length C
  std::vector<double> sigma2;  // per-user noise powers [W], length K
  std::vector<double> omega;   // per-user weights, length K
  double cell_radius_m = 400.0;
  // Cluster ring radius as a fraction of the cell radius.
  double cluster_ring_fraction = 0.5;
  // Users closer than this to any cluster are redrawn.
  double min_user_distance_m = 10.0;
  double shadow_std_db = 8.0;
  std::uint64_t seed = 1;

  int Nt() const { return L * C; }

  /// Uniform budgets/noise/weights, alternating budget list is cycled.
  static SystemConfig make(int C, int L, int K, int Nr, int d,
                           std::vector<double> budgets = {100.0, 500.0},
                           double noise_dbm = -80.0, std::uint64_t seed = 1) {
    SystemConfig cfg;
    cfg.C = C;
    cfg.L = L;
    cfg.K = K;
    cfg.Nr = Nr;
    cfg.d = d;
    cfg.seed = seed;
    for (int c = 0; c < C; ++c) cfg.P.push_back(budgets[c % budgets.size()]);
    cfg.sigma2.assign(K, dbm_to_watt(noise_dbm));
    cfg.omega.assign(K, 1.0);
    return cfg;
  }

  void validate() const {
    auto fail = [](const std::string &m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (C < 1 || L < 1 || K < 1 || Nr < 1 || d < 1)
      fail("system: C, L, K, Nr, d must be positive");
    if (d > std::min(Nt(), Nr)) fail("system.d: exceeds min(Nt, Nr)");
    if (Nt() < C * K * Nr) fail("system.L: need Nt >= C*K*Nr (L >= K*Nr)");
    if (static_cast<int>(P.size()) != C) fail("system.P: length must equal C");
    if (static_cast<int>(sigma2.size()) != K) fail("system.sigma2: length must equal K");
    if (static_cast<int>(omega.size()) != K) fail("system.omega: length must equal K");
    for (double p : P)
      if (!(p > 0.0)) fail("system.P: budgets must be positive");
    for (double s : sigma2)
      if (!(s > 0.0)) fail("system.sigma2: noise powers must be positive");
    for (double w : omega)
      if (!(w > 0.0)) fail("system.omega: weights must be positive");
    if (!(cell_radius_m > 0.0)) fail("system.cell_radius_m: must be positive");
    if (!(cluster_ring_fraction >= 0.0 && cluster_ring_fraction <= 1.0))
      fail("system.cluster_ring_fraction: must lie in [0, 1]");
    if (min_user_distance_m < 0.0) fail("system.min_user_distance_m: must be >= 0");
  }
};

using Point2 = std::array<double, 2>;

struct Topology {
  std::vector<Point2> clusters;  // meters
  std::vector<Point2> users;     // meters
};

inline double distance_m(const Point2 &a, const Point2 &b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

/// Regular hexagon with circumradius R, vertices at 0°, 60°, ..., centered at 0.
inline bool inside_hexagon(const Point2 &p, double R) {
  const double x = std::abs(p[0]);
  const double y = std::abs(p[1]);
  const double s3 = std::numbers::sqrt3;
  return y <= R * s3 / 2.0 && s3 * x + y <= s3 * R;
}

inline Topology make_topology(const SystemConfig &cfg) {
  Topology topo;
  const double ring = cfg.cluster_ring_fraction * cfg.cell_radius_m;
  for (int c = 0; c < cfg.C; ++c) {
    const double angle = 2.0 * std::numbers::pi * c / cfg.C;
    topo.clusters.push_back({ring * std::cos(angle), ring * std::sin(angle)});
  }
  Rng rng(cfg.seed, {static_cast<std::uint64_t>(Stream::Topology)});
  const double R = cfg.cell_radius_m;
  for (int k = 0; k < cfg.K; ++k) {
    for (;;) {
      const Point2 p{rng.uniform(-R, R), rng.uniform(-R, R)};
      if (!inside_hexagon(p, R)) continue;
      bool near = false;
      for (const auto &c : topo.clusters)
        near = near || distance_m(p, c) < cfg.min_user_distance_m;
      if (near) continue;
      topo.users.push_back(p);
      break;
    }
  }
  return topo;
}

/// 128.1 + 37.6·log10(d_km) + shadowing, in dB.
inline double pathloss_db(double d_km, double shadow_db) {
  if (!(d_km > 0.0))
    throw Error(ErrorCode::NonPositiveDistance, "pathloss_db: distance must be > 0");
  return 128.1 + 37.6 * std::log10(d_km) + shadow_db;
}

/// All H_k^(c) blocks plus the per-user and per-cluster stackings.
class ChannelSet {
public:
  ChannelSet() = default;

  /// blocks indexed [k * C + c], each Nr x L.
  ChannelSet(int K, int C, std::vector<CMat> blocks, std::vector<double> beta = {})
      : K_(K), C_(C), blocks_(std::move(blocks)), beta_(std::move(beta)) {
    if (K < 1 || C < 1 || static_cast<int>(blocks_.size()) != K * C)
      throw Error(ErrorCode::DimensionMismatch, "ChannelSet: block count != K*C");
    Nr_ = static_cast<int>(blocks_[0].rows());
    L_ = static_cast<int>(blocks_[0].cols());
    for (const auto &b : blocks_) {
      if (b.rows() != Nr_ || b.cols() != L_)
        throw Error(ErrorCode::DimensionMismatch, "ChannelSet: ragged blocks");
      require_finite(b, "ChannelSet");
    }
    if (beta_.empty()) beta_.assign(blocks_.size(), 1.0);
    per_user_.assign(K_, CMat(Nr_, L_ * C_));
    per_cluster_.assign(C_, CMat(K_ * Nr_, L_));
    for (int k = 0; k < K_; ++k)
      for (int c = 0; c < C_; ++c) {
        per_user_[k].middleCols(c * L_, L_) = block(k, c);
        per_cluster_[c].middleRows(k * Nr_, Nr_) = block(k, c);
      }
  }

  int K() const { return K_; }
  int C() const { return C_; }
  int Nr() const { return Nr_; }
  int L() const { return L_; }
  int Nt() const { return L_ * C_; }

  const CMat &block(int k, int c) const { return blocks_[k * C_ + c]; }
  /// H_k = [H_k^(1) ... H_k^(C)], Nr x Nt.
  const CMat &user(int k) const { return per_user_[k]; }
  /// H^(c) = [H_1^(c); ...; H_K^(c)], K·Nr x L.
  const CMat &cluster(int c) const { return per_cluster_[c]; }
  /// Large-scale linear gain β_k^(c).
  double beta(int k, int c) const { return beta_[k * C_ + c]; }
  const std::vector<CMat> &blocks() const { return blocks_; }

  /// Index of the first cluster whose stacked channel loses row rank, or -1.
  int first_rank_deficient_cluster(const Tolerances &tol = default_tolerances()) const {
    for (int c = 0; c < C_; ++c) {
      const CMat &H = cluster(c);
      if (H.rows() > H.cols() || !full_rank_gram(H * H.adjoint(), tol)) return c;
    }
    return -1;
  }

  void require_full_rank() const {
    const int c = first_rank_deficient_cluster();
    if (c >= 0)
      throw Error(ErrorCode::RankDeficient,
                  "channel: H^(" + std::to_string(c) + ") is not full row rank");
  }

private:
  int K_ = 0, C_ = 0, Nr_ = 0, L_ = 0;
  std::vector<CMat> blocks_;
  std::vector<double> beta_;
  std::vector<CMat> per_user_;
  std::vector<CMat> per_cluster_;
};

/// Draws one channel realization. `attempt` selects an independent substream
/// so callers can regenerate after a RankDeficient failure.
inline ChannelSet draw_channels(const SystemConfig &cfg, const Topology &topo,
                                std::uint64_t attempt = 0) {
  if (static_cast<int>(topo.clusters.size()) != cfg.C ||
      static_cast<int>(topo.users.size()) != cfg.K)
    throw Error(ErrorCode::DimensionMismatch, "draw_channels: topology/config mismatch");
  std::vector<CMat> blocks;
  std::vector<double> beta;
  blocks.reserve(cfg.K * cfg.C);
  for (int k = 0; k < cfg.K; ++k) {
    for (int c = 0; c < cfg.C; ++c) {
      const auto uk = static_cast<std::uint64_t>(k);
      const auto uc = static_cast<std::uint64_t>(c);
      Rng shadow(cfg.seed, {static_cast<std::uint64_t>(Stream::Shadowing), attempt, uk, uc});
      Rng fading(cfg.seed, {static_cast<std::uint64_t>(Stream::Fading), attempt, uk, uc});
      const double d_km = distance_m(topo.users[k], topo.clusters[c]) / 1000.0;
      const double pl = pathloss_db(d_km, cfg.shadow_std_db * shadow.normal());
      const double gain = db_to_linear(-pl);
      CMat E(cfg.Nr, cfg.L);
      for (int i = 0; i < cfg.Nr; ++i)
        for (int j = 0; j < cfg.L; ++j) E(i, j) = fading.complex_normal();
      blocks.push_back(std::sqrt(gain) * E);
      beta.push_back(gain);
    }
  }
  ChannelSet ch(cfg.K, cfg.C, std::move(blocks), std::move(beta));
  ch.require_full_rank();
  return ch;
}

/// Regenerates on rank loss, up to max_attempts independent draws.
inline ChannelSet draw_full_rank_channels(const SystemConfig &cfg, const Topology &topo,
                                          int max_attempts = 16) {
  for (int a = 0;; ++a) {
    try {
      return draw_channels(cfg, topo, static_cast<std::uint64_t>(a));
    } catch (const Error &e) {
      if (e.code() != ErrorCode::RankDeficient || a + 1 >= max_attempts) throw;
    }
  }
}

} // namespace drcg
