#pragma once

// Dense complex linear algebra shared by every other module: Hermitian
// Cholesky factors, HPD solves, log-determinants and Frobenius products.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace drcg {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

enum class ErrorCode {
  NotPositiveDefinite,
  NotHermitian,
  DimensionMismatch,
  NonFinite,
  NonPositiveDistance,
  RankDeficient,
  DegenerateNormal,
  DegenerateDirection,
  BisectionFailed,
  InvalidConfig,
  Io,
};

inline const char *to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
  case ErrorCode::NotHermitian: return "NotHermitian";
  case ErrorCode::DimensionMismatch: return "DimensionMismatch";
  case ErrorCode::NonFinite: return "NonFinite";
  case ErrorCode::NonPositiveDistance: return "NonPositiveDistance";
  case ErrorCode::RankDeficient: return "RankDeficient";
  case ErrorCode::DegenerateNormal: return "DegenerateNormal";
  case ErrorCode::DegenerateDirection: return "DegenerateDirection";
  case ErrorCode::BisectionFailed: return "BisectionFailed";
  case ErrorCode::InvalidConfig: return "InvalidConfig";
  case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Numerical tolerances used across the library.
struct Tolerances {
  double hermitian = 1e-10;       // relative ‖A − Aᴴ‖_F / ‖A‖_F
  double reconstruction = 1e-10;  // relative ‖LLᴴ − A‖_F / ‖A‖_F
  double solve_residual = 1e-9;   // relative ‖AY − B‖_F / ‖B‖_F
  double rank_pivot = 1e-12;      // pivot² < rank_pivot · tr(A) counts as rank loss
};

inline const Tolerances &default_tolerances() {
  static const Tolerances tol{};
  return tol;
}

inline bool all_finite(const CMat &A) { return A.allFinite(); }

inline void require_finite(const CMat &A, const char *where) {
  if (!A.allFinite())
    throw Error(ErrorCode::NonFinite, std::string(where) + ": non-finite entry");
}

inline void require_same_shape(const CMat &A, const CMat &B, const char *where) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw Error(ErrorCode::DimensionMismatch,
                std::string(where) + ": " + std::to_string(A.rows()) + "x" +
                    std::to_string(A.cols()) + " vs " + std::to_string(B.rows()) +
                    "x" + std::to_string(B.cols()));
}

/// Re tr(AᴴB).
inline double frob_inner(const CMat &A, const CMat &B) {
  require_same_shape(A, B, "frob_inner");
  double acc = 0.0;
  const Eigen::Index n = A.size();
  const Complex *a = A.data();
  const Complex *b = B.data();
  for (Eigen::Index i = 0; i < n; ++i)
    acc += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return acc;
}

inline double frob_norm2(const CMat &A) { return A.squaredNorm(); }

/// Relative deviation from Hermitian symmetry.
inline double hermitian_residual(const CMat &A) {
  if (A.rows() != A.cols())
    throw Error(ErrorCode::DimensionMismatch, "hermitian_residual: not square");
  const double scale = A.norm();
  if (scale == 0.0) return 0.0;
  return (A - A.adjoint()).norm() / scale;
}

inline CMat symmetrize(const CMat &A) { return 0.5 * (A + A.adjoint()); }

/// Cholesky factor A = L·Lᴴ of a Hermitian positive-definite matrix.
class HermitianFactor {
public:
  explicit HermitianFactor(const CMat &A,
                           const Tolerances &tol = default_tolerances()) {
    if (A.rows() != A.cols())
      throw Error(ErrorCode::DimensionMismatch, "cholesky: matrix not square");
    require_finite(A, "cholesky");
    if (hermitian_residual(A) > tol.hermitian)
      throw Error(ErrorCode::NotHermitian, "cholesky: input not Hermitian");
    source_ = symmetrize(A);
    factor(tol);
  }

  struct Trusted {};

  /// For matrices Hermitian by construction, e.g. σ²I + ΣMMᴴ built in
  /// place. Only the lower triangle is read; symmetry and reconstruction are
  /// not checked and source() stays empty. Pivots are still checked.
  HermitianFactor(CMat A, Trusted) : lower_(std::move(A)) {
    Eigen::LLT<Eigen::Ref<CMat>> llt(lower_);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorCode::NotPositiveDefinite, "cholesky: non-positive pivot");
    lower_.triangularView<Eigen::StrictlyUpper>().setZero();
    check_pivots();
  }

  const CMat &source() const noexcept { return source_; }
  const CMat &lower() const noexcept { return lower_; }
  Eigen::Index dim() const noexcept { return lower_.rows(); }

  /// Y with A·Y = B.
  CMat solve(const CMat &B) const {
    if (B.rows() != dim())
      throw Error(ErrorCode::DimensionMismatch,
                  "solve_hpd: rhs has " + std::to_string(B.rows()) +
                      " rows, factor dimension " + std::to_string(dim()));
    CMat Y = lower_.triangularView<Eigen::Lower>().solve(B);
    lower_.adjoint().triangularView<Eigen::Upper>().solveInPlace(Y);
    return Y;
  }

  /// log det A in nats.
  double logdet() const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < dim(); ++i) acc += std::log(lower_(i, i).real());
    return 2.0 * acc;
  }

  /// Ratio of the extreme squared pivots; a cheap lower bound on cond(A).
  double condition_estimate() const {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (Eigen::Index i = 0; i < dim(); ++i) {
      const double d = lower_(i, i).real() * lower_(i, i).real();
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    return hi / lo;
  }

  double reconstruction_error() const {
    const double scale = source_.norm();
    const double err = (lower_ * lower_.adjoint() - source_).norm();
    return scale == 0.0 ? err : err / scale;
  }

private:
  void factor(const Tolerances &tol) {
    Eigen::LLT<CMat> llt(source_);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorCode::NotPositiveDefinite, "cholesky: non-positive pivot");
    lower_ = llt.matrixL();
    check_pivots();
    if (reconstruction_error() > tol.reconstruction)
      throw Error(ErrorCode::NotPositiveDefinite,
                  "cholesky: reconstruction error above tolerance");
  }

  void check_pivots() const {
    for (Eigen::Index i = 0; i < dim(); ++i) {
      const double pivot = lower_(i, i).real();
      if (!(pivot > 0.0) || !std::isfinite(pivot))
        throw Error(ErrorCode::NotPositiveDefinite, "cholesky: non-positive pivot");
    }
  }

  CMat source_;
  CMat lower_;
};

inline HermitianFactor cholesky(const CMat &A,
                                const Tolerances &tol = default_tolerances()) {
  return HermitianFactor(A, tol);
}

inline CMat solve_hpd(const HermitianFactor &factor, const CMat &B) {
  return factor.solve(B);
}

inline double logdet_hpd(const CMat &A) { return HermitianFactor(A).logdet(); }

/// True when A (Hermitian PSD) keeps full rank: every squared Cholesky pivot
/// stays above rank_pivot · tr(A).
inline bool full_rank_gram(const CMat &gram,
                           const Tolerances &tol = default_tolerances()) {
  Eigen::LLT<CMat> llt(symmetrize(gram));
  if (llt.info() != Eigen::Success) return false;
  const double threshold = tol.rank_pivot * gram.trace().real();
  const CMat L = llt.matrixL();
  for (Eigen::Index i = 0; i < L.rows(); ++i)
    if (std::norm(L(i, i)) < threshold) return false;
  return true;
}

} // namespace drcg
