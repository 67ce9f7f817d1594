#pragma once

// Dense real-symmetric linear algebra used throughout fermicool: validated
// matrix carriers, the Löwdin-symmetrized generalized eigenproblem, spectral
// matrix functions, chemical-potential bisection and Aitken extrapolation.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <utility>

namespace fermicool {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Largest |M(i,j)| over all entries.
inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Real symmetric dense matrix. The input is symmetrized as (M + M^T)/2 on
/// construction, so entries(i,j) == entries(j,i) holds exactly afterwards.
class HermitianMatrix {
 public:
  explicit HermitianMatrix(const Matrix& m);

  static HermitianMatrix identity(Eigen::Index dim);
  static HermitianMatrix zero(Eigen::Index dim);

  Eigen::Index dim() const noexcept { return m_.rows(); }
  const Matrix& mat() const noexcept { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  double trace() const { return m_.trace(); }

 private:
  Matrix m_;
};

/// Overlap (Gram) matrix of a possibly non-orthonormal basis. Positive
/// definiteness is checked on construction; the inverse and the Löwdin
/// factor S^(-1/2) are computed at the same time and never change.
class OverlapMatrix {
 public:
  /// Throws NotPositiveDefinite naming the smallest eigenvalue when it is <= 0.
  explicit OverlapMatrix(const HermitianMatrix& s);
  explicit OverlapMatrix(const Matrix& s) : OverlapMatrix(HermitianMatrix(s)) {}

  static OverlapMatrix identity(Eigen::Index dim);

  Eigen::Index dim() const noexcept { return base_.dim(); }
  const HermitianMatrix& base() const noexcept { return base_; }
  const Matrix& mat() const noexcept { return base_.mat(); }
  const Matrix& inverse() const noexcept { return inverse_; }
  const Matrix& inverse_sqrt() const noexcept { return inverse_sqrt_; }
  double trace() const { return base_.trace(); }
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }
  bool is_identity() const noexcept { return is_identity_; }

 private:
  HermitianMatrix base_;
  Matrix inverse_;
  Matrix inverse_sqrt_;
  double min_eigenvalue_ = 1.0;
  bool is_identity_ = false;
};

/// Eigenpairs of the pencil (H, S), ascending. Columns of `vectors` are
/// S-orthonormal, so the inverse of `vectors` is vectors^T S, kept in
/// `inverse_vectors`.
struct EigenPair {
  Vector values;
  Matrix vectors;
  Matrix inverse_vectors;

  Eigen::Index dim() const noexcept { return values.size(); }
};

EigenPair generalized_eigendecomposition(const HermitianMatrix& h, const OverlapMatrix& s);

/// Standard symmetric eigendecomposition (S = I).
EigenPair symmetric_eigendecomposition(const HermitianMatrix& h);

/// Returns vectors * diag(f_values) * vectors^-1. Throws SolverAbort if any
/// f value is NaN or infinite.
Matrix apply_spectrum(const EigenPair& eig, const Vector& f_values);

/// f(S^-1 H) evaluated through the eigendecomposition of the pencil. The
/// caller supplies an overflow-safe f.
template <class F>
Matrix matrix_function(const EigenPair& eig, F&& f) {
  Vector f_values(eig.dim());
  for (Eigen::Index k = 0; k < eig.dim(); ++k) f_values(k) = f(eig.values(k));
  return apply_spectrum(eig, f_values);
}

/// Logistic function 1/(1+exp(x)) evaluated without overflow for any finite x.
inline double fermi(double x) {
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

/// Tr[normalization * S * fermi(beta (S^-1 H - mu))] for the decomposed pencil.
double occupation(const EigenPair& eig, const OverlapMatrix& s, double beta, double mu,
                  double normalization);

struct MuSolution {
  double mu = 0.0;
  /// True at beta == 0, where the occupation does not depend on mu.
  bool degenerate = false;
  double residual = 0.0;
  int iterations = 0;
};

/// Bisection for the chemical potential giving Tr[P] == target_ne.
/// Throws InfeasibleEnsemble when the bracket cannot reach the target and
/// SolverAbort when tol is not met within max_iter halvings.
MuSolution find_mu_for_occupation(const EigenPair& eig, const OverlapMatrix& s, double beta,
                                  double target_ne, double normalization, double tol = 1e-10,
                                  int max_iter = 400);

/// Aitken delta-squared extrapolation of x0, x1, x2. Falls back to x2 when
/// the second difference is below 1e-14 in magnitude.
double aitken_accelerate(double x0, double x1, double x2);

/// Entrywise aitken_accelerate over three equally sized matrices.
Matrix aitken_accelerate(const Matrix& x0, const Matrix& x1, const Matrix& x2);

}  // namespace fermicool
