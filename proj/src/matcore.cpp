#include "fermicool/matcore.hpp"

#include "fermicool/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fermicool {

HermitianMatrix::HermitianMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << "matrix is " << m.rows() << "x" << m.cols() << ", expected square";
    throw DimensionMismatch(os.str());
  }
  if (m.rows() < 1) throw DimensionMismatch("matrix dimension must be at least 1");
  m_ = 0.5 * (m + m.transpose());
}

HermitianMatrix HermitianMatrix::identity(Eigen::Index dim) {
  return HermitianMatrix(Matrix::Identity(dim, dim));
}

HermitianMatrix HermitianMatrix::zero(Eigen::Index dim) {
  return HermitianMatrix(Matrix::Zero(dim, dim));
}

OverlapMatrix::OverlapMatrix(const HermitianMatrix& s) : base_(s) {
  const Eigen::Index n = s.dim();
  if (s.mat().isIdentity(0.0)) {
    is_identity_ = true;
    inverse_ = Matrix::Identity(n, n);
    inverse_sqrt_ = Matrix::Identity(n, n);
    min_eigenvalue_ = 1.0;
    return;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.mat());
  if (es.info() != Eigen::Success) throw SolverAbort("eigensolver failed on overlap matrix");
  min_eigenvalue_ = es.eigenvalues().minCoeff();
  if (!(min_eigenvalue_ > 0.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "overlap matrix is not positive definite: smallest eigenvalue " << min_eigenvalue_;
    throw NotPositiveDefinite(os.str(), min_eigenvalue_);
  }
  const Matrix& u = es.eigenvectors();
  const Vector inv = es.eigenvalues().cwiseInverse();
  const Vector inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  inverse_ = u * inv.asDiagonal() * u.transpose();
  inverse_ = 0.5 * (inverse_ + inverse_.transpose()).eval();
  inverse_sqrt_ = u * inv_sqrt.asDiagonal() * u.transpose();
  inverse_sqrt_ = 0.5 * (inverse_sqrt_ + inverse_sqrt_.transpose()).eval();
}

OverlapMatrix OverlapMatrix::identity(Eigen::Index dim) {
  return OverlapMatrix(HermitianMatrix::identity(dim));
}

namespace {

EigenPair symmetric_eig(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success) throw SolverAbort("symmetric eigensolver did not converge");
  EigenPair out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  out.inverse_vectors = out.vectors.transpose();
  return out;
}

}  // namespace

EigenPair generalized_eigendecomposition(const HermitianMatrix& h, const OverlapMatrix& s) {
  if (h.dim() != s.dim()) {
    std::ostringstream os;
    os << "Hamiltonian has dimension " << h.dim() << " but overlap has " << s.dim();
    throw DimensionMismatch(os.str());
  }
  if (s.is_identity()) return symmetric_eig(h.mat());

  // Löwdin route: S^-1/2 H S^-1/2 is symmetric with the spectrum of S^-1 H.
  const Matrix& x = s.inverse_sqrt();
  Matrix m = x * h.mat() * x;
  m = 0.5 * (m + m.transpose()).eval();
  EigenPair out = symmetric_eig(m);
  out.vectors = x * out.vectors;
  out.inverse_vectors = out.vectors.transpose() * s.mat();
  return out;
}

EigenPair symmetric_eigendecomposition(const HermitianMatrix& h) { return symmetric_eig(h.mat()); }

Matrix apply_spectrum(const EigenPair& eig, const Vector& f_values) {
  if (f_values.size() != eig.dim()) throw DimensionMismatch("spectrum length does not match eigenpairs");
  for (Eigen::Index k = 0; k < f_values.size(); ++k) {
    if (!std::isfinite(f_values(k))) {
      std::ostringstream os;
      os.precision(17);
      os << "matrix function is not finite at eigenvalue " << eig.values(k);
      throw SolverAbort(os.str());
    }
  }
  return eig.vectors * f_values.asDiagonal() * eig.inverse_vectors;
}

namespace {

// Tr[S V diag(f) V^-1 S] = sum_k f_k |S v_k|^2.
Vector trace_weights(const EigenPair& eig, const OverlapMatrix& s) {
  if (s.is_identity()) return Vector::Ones(eig.dim());
  return (s.mat() * eig.vectors).colwise().squaredNorm().transpose();
}

double weighted_occupation(const EigenPair& eig, const Vector& weights, double beta, double mu,
                           double normalization) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < eig.dim(); ++k) sum += weights(k) * fermi(beta * (eig.values(k) - mu));
  return normalization * sum;
}

}  // namespace

double occupation(const EigenPair& eig, const OverlapMatrix& s, double beta, double mu,
                  double normalization) {
  return weighted_occupation(eig, trace_weights(eig, s), beta, mu, normalization);
}

MuSolution find_mu_for_occupation(const EigenPair& eig, const OverlapMatrix& s, double beta,
                                  double target_ne, double normalization, double tol, int max_iter) {
  if (beta < 0.0) throw SolverAbort("inverse temperature must be non-negative");
  if (!(target_ne > 0.0) || !(target_ne < normalization * s.trace())) {
    std::ostringstream os;
    os.precision(17);
    os << "target electron count " << target_ne << " outside (0, " << normalization * s.trace() << ")";
    throw InfeasibleEnsemble(os.str());
  }
  const double pad = 10.0 / std::max(beta, 1.0);
  double lo = eig.values.minCoeff() - pad;
  double hi = eig.values.maxCoeff() + pad;
  const Vector weights = trace_weights(eig, s);

  MuSolution out;
  if (beta == 0.0) {
    out.mu = 0.5 * (lo + hi);
    out.degenerate = true;
    out.residual = weighted_occupation(eig, weights, beta, out.mu, normalization) - target_ne;
    return out;
  }

  const double occ_lo = weighted_occupation(eig, weights, beta, lo, normalization);
  const double occ_hi = weighted_occupation(eig, weights, beta, hi, normalization);
  if (target_ne < occ_lo || target_ne > occ_hi) {
    std::ostringstream os;
    os.precision(17);
    os << "target electron count " << target_ne << " outside achievable range [" << occ_lo << ", "
       << occ_hi << "] at beta " << beta;
    throw InfeasibleEnsemble(os.str());
  }

  double residual = occ_hi - target_ne;
  for (int it = 1; it <= max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double occ = weighted_occupation(eig, weights, beta, mid, normalization);
    residual = occ - target_ne;
    out.iterations = it;
    if (std::abs(residual) <= tol) {
      out.mu = mid;
      out.residual = residual;
      return out;
    }
    if (mid == lo || mid == hi) break;
    if (residual < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  std::ostringstream os;
  os.precision(17);
  os << "chemical potential bisection stalled with occupation residual " << residual;
  throw SolverAbort(os.str());
}

double aitken_accelerate(double x0, double x1, double x2) {
  const double d1 = x2 - x1;
  const double denom = d1 - (x1 - x0);
  if (std::abs(denom) <= 1e-14) return x2;
  return x2 - d1 * d1 / denom;
}

Matrix aitken_accelerate(const Matrix& x0, const Matrix& x1, const Matrix& x2) {
  if (x0.rows() != x1.rows() || x0.rows() != x2.rows() || x0.cols() != x1.cols() ||
      x0.cols() != x2.cols()) {
    throw DimensionMismatch("Aitken extrapolation needs equally sized iterates");
  }
  Matrix out(x2.rows(), x2.cols());
  for (Eigen::Index j = 0; j < x2.cols(); ++j)
    for (Eigen::Index i = 0; i < x2.rows(); ++i) out(i, j) = aitken_accelerate(x0(i, j), x1(i, j), x2(i, j));
  return out;
}

}  // namespace fermicool
