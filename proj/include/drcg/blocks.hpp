#pragma once

// Tuples of per-cluster matrix blocks and the two re-blockings used
// throughout: per-cluster B^(c) = [B_1^(c) ... B_K^(c)] and per-user
// B_k = [B_k^(1); ...; B_k^(C)].

#include "drcg/numerics.hpp"

#include <string>
#include <utility>
#include <vector>

namespace drcg {

/// One matrix per product-manifold factor (cluster).
using Blocks = std::vector<CMat>;

inline void require_same_shape(const Blocks &a, const Blocks &b, const char *where) {
  if (a.size() != b.size())
    throw Error(ErrorCode::DimensionMismatch, std::string(where) + ": factor count");
  for (std::size_t i = 0; i < a.size(); ++i) require_same_shape(a[i], b[i], where);
}

/// Σ_c Re tr((a^(c))ᴴ b^(c)).
inline double inner(const Blocks &a, const Blocks &b) {
  require_same_shape(a, b, "inner");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += frob_inner(a[i], b[i]);
  return acc;
}

inline double norm2(const Blocks &a) {
  double acc = 0.0;
  for (const auto &m : a) acc += m.squaredNorm();
  return acc;
}

inline Blocks scaled(const Blocks &a, double s) {
  Blocks out = a;
  for (auto &m : out) m *= s;
  return out;
}

/// a + s·b
inline Blocks axpy(const Blocks &a, double s, const Blocks &b) {
  require_same_shape(a, b, "axpy");
  Blocks out = a;
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += s * b[i];
  return out;
}

inline Blocks zeros_like(const Blocks &a) {
  Blocks out;
  out.reserve(a.size());
  for (const auto &m : a) out.push_back(CMat::Zero(m.rows(), m.cols()));
  return out;
}

/// Per-cluster blocks (rows_c x K·d) -> per-user stacks (Σ rows_c x d).
inline Blocks clusters_to_users(const Blocks &clusters, int K) {
  if (clusters.empty() || K < 1 || clusters[0].cols() % K != 0)
    throw Error(ErrorCode::DimensionMismatch, "clusters_to_users: bad shape");
  const Eigen::Index d = clusters[0].cols() / K;
  Eigen::Index rows = 0;
  for (const auto &b : clusters) {
    if (b.cols() != K * d)
      throw Error(ErrorCode::DimensionMismatch, "clusters_to_users: ragged columns");
    rows += b.rows();
  }
  Blocks users(K, CMat(rows, d));
  for (int k = 0; k < K; ++k) {
    Eigen::Index r = 0;
    for (const auto &b : clusters) {
      users[k].middleRows(r, b.rows()) = b.middleCols(k * d, d);
      r += b.rows();
    }
  }
  return users;
}

/// Inverse of clusters_to_users; every cluster contributes rows_per_cluster rows.
inline Blocks users_to_clusters(const Blocks &users, int C) {
  if (users.empty() || C < 1 || users[0].rows() % C != 0)
    throw Error(ErrorCode::DimensionMismatch, "users_to_clusters: bad shape");
  const auto K = static_cast<Eigen::Index>(users.size());
  const Eigen::Index d = users[0].cols();
  const Eigen::Index rows = users[0].rows() / C;
  Blocks clusters(C, CMat(rows, K * d));
  for (Eigen::Index k = 0; k < K; ++k) {
    if (users[k].rows() != rows * C || users[k].cols() != d)
      throw Error(ErrorCode::DimensionMismatch, "users_to_clusters: ragged users");
    for (int c = 0; c < C; ++c)
      clusters[c].middleCols(k * d, d) = users[k].middleRows(c * rows, rows);
  }
  return clusters;
}

/// A beamformer-shaped value held in both blockings. The two views are built
/// together and never mutated, so they cannot drift apart.
template <class Tag> class BlockPoint {
public:
  BlockPoint() = default;

  static BlockPoint from_clusters(Blocks clusters, int K) {
    BlockPoint p;
    p.users_ = clusters_to_users(clusters, K);
    p.clusters_ = std::move(clusters);
    return p;
  }

  static BlockPoint from_users(Blocks users, int C) {
    BlockPoint p;
    p.clusters_ = users_to_clusters(users, C);
    p.users_ = std::move(users);
    return p;
  }

  const Blocks &clusters() const { return clusters_; }
  const Blocks &users() const { return users_; }
  const CMat &cluster(int c) const { return clusters_[c]; }
  const CMat &user(int k) const { return users_[k]; }
  int C() const { return static_cast<int>(clusters_.size()); }
  int K() const { return static_cast<int>(users_.size()); }

private:
  Blocks clusters_;
  Blocks users_;
};

/// Full-dimension beamformer V: V^(c) is L x K·d, V_k is Nt x d.
using PointV = BlockPoint<struct PointVTag>;
/// Reduced variable X: X^(c) is K·Nr x K·d, X_k is C·Nr x d.
using PointX = BlockPoint<struct PointXTag>;
/// Euclidean gradients in the matching blockings.
using GradV = BlockPoint<struct GradVTag>;
using GradX = BlockPoint<struct GradXTag>;

} // namespace drcg
