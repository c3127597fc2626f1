#pragma once

// Product of ellipsoids M_c = {X : tr(Xᴴ Q X) = P_c}, Q Hermitian PD,
// embedded in C^{rows x cols} with metric Re tr(ξᴴη). With Q = I the factor is
// the sphere of radius sqrt(P_c), which is the full-dimension baseline.

#include "drcg/blocks.hpp"
#include "drcg/numerics.hpp"
#include "drcg/reduction.hpp"
#include "drcg/rng.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace drcg {

using TangentX = Blocks;

class EllipsoidFactor {
public:
  /// Ellipsoid with Gram matrix Q.
  EllipsoidFactor(CMat Q, double P, Eigen::Index cols)
      : Q_(std::move(Q)), rows_(Q_.rows()), cols_(cols), P_(P), identity_(false) {
    if (!(P_ > 0.0)) throw Error(ErrorCode::InvalidConfig, "ellipsoid: P must be > 0");
    HermitianFactor check(Q_);  // throws unless Hermitian PD
  }

  /// Sphere of squared radius P in C^{rows x cols}.
  static EllipsoidFactor sphere(Eigen::Index rows, Eigen::Index cols, double P) {
    return EllipsoidFactor(rows, cols, P);
  }

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  double budget() const { return P_; }
  bool is_sphere() const { return identity_; }
  CMat gram() const { return identity_ ? CMat::Identity(rows_, rows_) : Q_; }

  CMat apply(const CMat &X) const { return identity_ ? X : CMat(Q_ * X); }

  /// tr(Xᴴ Q X).
  double power(const CMat &X) const {
    return identity_ ? X.squaredNorm() : frob_inner(X, Q_ * X);
  }

private:
  EllipsoidFactor(Eigen::Index rows, Eigen::Index cols, double P)
      : rows_(rows), cols_(cols), P_(P), identity_(true) {
    if (!(P_ > 0.0)) throw Error(ErrorCode::InvalidConfig, "sphere: P must be > 0");
  }

  CMat Q_;
  Eigen::Index rows_ = 0, cols_ = 0;
  double P_ = 0.0;
  bool identity_ = false;
};

struct ProductManifold {
  std::vector<EllipsoidFactor> factors;

  std::size_t size() const { return factors.size(); }
  const EllipsoidFactor &operator[](std::size_t c) const { return factors[c]; }
};

inline ProductManifold make_ellipsoid_manifold(const ReducedProblem &rp) {
  ProductManifold M;
  for (int c = 0; c < rp.C; ++c) M.factors.emplace_back(rp.Q[c], rp.P[c], rp.K * rp.d);
  return M;
}

inline ProductManifold make_sphere_manifold(const std::vector<double> &P, int L, int K, int d) {
  ProductManifold M;
  for (double p : P) M.factors.push_back(EllipsoidFactor::sphere(L, K * d, p));
  return M;
}

inline void require_matches(const Blocks &X, const ProductManifold &M, const char *where) {
  if (X.size() != M.size())
    throw Error(ErrorCode::DimensionMismatch, std::string(where) + ": factor count");
  for (std::size_t c = 0; c < M.size(); ++c)
    if (X[c].rows() != M[c].rows() || X[c].cols() != M[c].cols())
      throw Error(ErrorCode::DimensionMismatch, std::string(where) + ": block shape");
}

/// max_c |tr(Xᴴ Q X) − P_c| / P_c.
inline double feasibility_residual(const Blocks &X, const ProductManifold &M) {
  require_matches(X, M, "feasibility_residual");
  double worst = 0.0;
  for (std::size_t c = 0; c < M.size(); ++c)
    worst = std::max(worst, std::abs(M[c].power(X[c]) - M[c].budget()) / M[c].budget());
  return worst;
}

inline bool on_manifold(const Blocks &X, const ProductManifold &M, double tol) {
  return feasibility_residual(X, M) <= tol;
}

/// Per-factor |Re tr(Q ξ Xᴴ)|.
inline std::vector<double> tangency_residuals(const Blocks &X, const TangentX &xi,
                                              const ProductManifold &M) {
  require_matches(X, M, "tangency_residuals");
  require_same_shape(X, xi, "tangency_residuals");
  std::vector<double> out;
  for (std::size_t c = 0; c < M.size(); ++c)
    out.push_back(std::abs(frob_inner(M[c].apply(X[c]), xi[c])));
  return out;
}

/// Z − λ·QX per factor, λ = Re tr(Q(ZXᴴ + XZᴴ)) / (2 tr(QQXXᴴ)).
inline TangentX project_tangent(const Blocks &X, const Blocks &Z, const ProductManifold &M) {
  require_matches(X, M, "project_tangent");
  require_same_shape(X, Z, "project_tangent");
  TangentX out;
  out.reserve(M.size());
  for (std::size_t c = 0; c < M.size(); ++c) {
    const CMat normal = M[c].apply(X[c]);
    const double denom = normal.squaredNorm();
    if (!(denom > 0.0))
      throw Error(ErrorCode::DegenerateNormal, "project_tangent: Q·X vanishes");
    const double lambda = frob_inner(normal, Z[c]) / denom;
    out.push_back(Z[c] - lambda * normal);
  }
  return out;
}

/// Rescales X + α·η back onto every factor.
inline Blocks retract(const Blocks &X, const TangentX &eta, double alpha,
                      const ProductManifold &M) {
  require_matches(X, M, "retract");
  require_same_shape(X, eta, "retract");
  Blocks out;
  out.reserve(M.size());
  for (std::size_t c = 0; c < M.size(); ++c) {
    CMat Y = X[c] + alpha * eta[c];
    const double p = M[c].power(Y);
    if (!(p > 0.0) || !std::isfinite(p))
      throw Error(ErrorCode::DegenerateDirection, "retract: X + αη has no power");
    Y *= std::sqrt(M[c].budget() / p);
    out.push_back(std::move(Y));
  }
  return out;
}

/// Moves a tangent vector to T_{X_new}M by orthogonal projection at X_new.
inline TangentX transport(const TangentX &eta_prev, const Blocks &X_new,
                          const ProductManifold &M) {
  return project_tangent(X_new, eta_prev, M);
}

inline double metric(const TangentX &xi, const TangentX &eta) { return inner(xi, eta); }

inline Blocks random_point(const ProductManifold &M, std::uint64_t seed) {
  Blocks X;
  X.reserve(M.size());
  for (std::size_t c = 0; c < M.size(); ++c) {
    Rng rng(seed, {static_cast<std::uint64_t>(Stream::InitPoint), c});
    CMat Z(M[c].rows(), M[c].cols());
    for (Eigen::Index j = 0; j < Z.cols(); ++j)
      for (Eigen::Index i = 0; i < Z.rows(); ++i) Z(i, j) = rng.complex_normal();
    Z *= std::sqrt(M[c].budget() / M[c].power(Z));
    X.push_back(std::move(Z));
  }
  return X;
}

/// Scales every factor of an arbitrary nonzero point onto the manifold.
inline Blocks normalize_onto(const Blocks &Z, const ProductManifold &M) {
  return retract(Z, zeros_like(Z), 0.0, M);
}

} // namespace drcg
