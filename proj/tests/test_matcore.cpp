#include "fermicool/errors.hpp"
#include "fermicool/matcore.hpp"
#include "fermicool/models.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace fermicool;
using fermicool::testing::random_spd;
using fermicool::testing::random_symmetric;

TEST_CASE("HermitianMatrix symmetrizes its input") {
  Matrix m(2, 2);
  m << 1, 2, 4, 3;
  HermitianMatrix h(m);
  CHECK(h(0, 1) == 3.0);
  CHECK(h(1, 0) == 3.0);
  CHECK_THROWS_AS(HermitianMatrix(Matrix(2, 3)), DimensionMismatch);
}

TEST_CASE("OverlapMatrix rejects indefinite input and names the eigenvalue") {
  Matrix s(2, 2);
  s << 1.0, 0.0, 0.0, -0.1;
  try {
    OverlapMatrix o{HermitianMatrix(s)};
    FAIL("expected NotPositiveDefinite");
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.eigenvalue() == doctest::Approx(-0.1).epsilon(1e-14));
    CHECK(std::string(e.what()).find("-0.1") != std::string::npos);
  }
}

TEST_CASE("OverlapMatrix inverse is consistent") {
  std::mt19937 rng(11);
  for (int n : {2, 5, 9}) {
    OverlapMatrix s(random_spd(rng, n));
    CHECK(max_abs(s.mat() * s.inverse() - Matrix::Identity(n, n)) < 1e-10);
    CHECK(max_abs(s.inverse_sqrt() * s.mat() * s.inverse_sqrt() - Matrix::Identity(n, n)) < 1e-10);
  }
}

TEST_CASE("generalized eigendecomposition: closed-form cases") {
  SUBCASE("diagonal with identity overlap") {
    Matrix h = Matrix::Zero(2, 2);
    h(1, 1) = 1.0;
    const EigenPair e = generalized_eigendecomposition(HermitianMatrix(h), OverlapMatrix::identity(2));
    CHECK(e.values(0) == doctest::Approx(0.0));
    CHECK(e.values(1) == doctest::Approx(1.0));
    CHECK(max_abs(e.vectors.cwiseAbs() - Matrix::Identity(2, 2)) < 1e-14);
  }
  SUBCASE("2x2 symmetric") {
    const double a = 0.3, g = -0.7;
    Matrix h(2, 2);
    h << a, g, g, a;
    const EigenPair e = generalized_eigendecomposition(HermitianMatrix(h), OverlapMatrix::identity(2));
    CHECK(e.values(0) == doctest::Approx(a - std::abs(g)));
    CHECK(e.values(1) == doctest::Approx(a + std::abs(g)));
    // For g < 0 the lower state is the symmetric combination (1, 1)/sqrt 2.
    CHECK(std::abs(e.vectors(0, 0)) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(e.vectors(0, 0) * e.vectors(1, 0) > 0.0);
    CHECK(e.vectors(0, 1) * e.vectors(1, 1) < 0.0);
  }
  SUBCASE("H = I, S = 2I") {
    // Hand solution of H v = lambda S v: lambda = 1/2, and v^T S v = 1 gives
    // unit vectors scaled by 1/sqrt 2.
    const EigenPair e = generalized_eigendecomposition(HermitianMatrix::identity(2),
                                                       OverlapMatrix(Matrix(2.0 * Matrix::Identity(2, 2))));
    CHECK(e.values(0) == doctest::Approx(0.5));
    CHECK(e.values(1) == doctest::Approx(0.5));
    CHECK(max_abs(e.vectors.transpose() * e.vectors - 0.5 * Matrix::Identity(2, 2)) < 1e-14);
    CHECK(e.vectors.cwiseAbs().colwise().sum().maxCoeff() == doctest::Approx(1.0 / std::sqrt(2.0)));
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(generalized_eigendecomposition(HermitianMatrix::identity(3), OverlapMatrix::identity(2)),
                    DimensionMismatch);
  }
}

TEST_CASE("generalized eigendecomposition properties on random pencils") {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + trial % 11;
    const HermitianMatrix h(random_symmetric(rng, n));
    const OverlapMatrix s(random_spd(rng, n));
    const EigenPair e = generalized_eigendecomposition(h, s);
    // Ascending.
    for (int k = 1; k < n; ++k) CHECK(e.values(k) >= e.values(k - 1));
    // S-orthonormality.
    CHECK(max_abs(e.vectors.transpose() * s.mat() * e.vectors - Matrix::Identity(n, n)) < 1e-10);
    // H V = S V diag(values).
    const Matrix resid = h.mat() * e.vectors - s.mat() * e.vectors * e.values.asDiagonal();
    CHECK(max_abs(resid) < 1e-10 * std::max(1.0, max_abs(h.mat())));
    // Reconstruction of S^-1 H through an LU solve, independent of the Löwdin factor.
    const Matrix sinv_h = s.mat().lu().solve(h.mat());
    const Matrix rebuilt = e.vectors * e.values.asDiagonal() * e.inverse_vectors;
    CHECK((rebuilt - sinv_h).norm() / sinv_h.norm() < 1e-9);
  }
}

TEST_CASE("matrix_function on closed-form spectra") {
  Matrix h = Matrix::Zero(2, 2);
  h(1, 1) = 1.0;
  const EigenPair e = symmetric_eigendecomposition(HermitianMatrix(h));
  CHECK(max_abs(matrix_function(e, [](double x) { return x; }) - h) < 1e-15);

  const Matrix ex = matrix_function(e, [](double x) { return std::exp(-x); });
  CHECK(ex(0, 0) == doctest::Approx(1.0));
  CHECK(ex(1, 1) == doctest::Approx(0.36787944117144233));
  CHECK(std::abs(ex(0, 1)) < 1e-15);

  const Matrix fd = matrix_function(e, [](double x) { return 1.0 / (1.0 + std::exp(2.0 * (x - 0.5))); });
  CHECK(fd(0, 0) == doctest::Approx(0.7310585786300049));
  CHECK(fd(1, 1) == doctest::Approx(0.2689414213699951));

  CHECK_THROWS_AS(matrix_function(e, [](double x) { return std::exp(1000.0 * x); }), SolverAbort);
}

TEST_CASE("matrix_function matches a Taylor-series exponential and composes") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + trial;
    const HermitianMatrix h(random_symmetric(rng, n, 0.4));
    const OverlapMatrix s(random_spd(rng, n));
    const EigenPair e = generalized_eigendecomposition(h, s);
    const Matrix sinv_h = s.mat().lu().solve(h.mat());

    CHECK(max_abs(matrix_function(e, [](double x) { return x; }) - sinv_h) < 1e-10);
    const Matrix via_eig = matrix_function(e, [](double x) { return std::exp(-x); });
    const Matrix via_series = fermicool::testing::taylor_exp(-sinv_h);
    CHECK(max_abs(via_eig - via_series) < 1e-10);

    // (f o g) applied once equals g then f; both steps through the spectrum.
    auto g = [](double x) { return 2.0 * x + 0.25; };
    auto f = [](double x) { return fermi(3.0 * x); };
    const Matrix once = matrix_function(e, [&](double x) { return f(g(x)); });
    const Matrix g_mat = matrix_function(e, g);
    // g(S^-1 H) shares eigenvectors with S^-1 H; re-decompose it in the S metric.
    const EigenPair eg = generalized_eigendecomposition(HermitianMatrix(s.mat() * g_mat), s);
    const Matrix twice = matrix_function(eg, f);
    CHECK(max_abs(once - twice) < 1e-9);
  }
}

TEST_CASE("fermi is overflow safe") {
  CHECK(fermi(0.0) == 0.5);
  CHECK(fermi(800.0) == 0.0);
  CHECK(fermi(-800.0) == 1.0);
  CHECK(fermi(19.8) == doctest::Approx(1.0 / (1.0 + std::exp(19.8))).epsilon(1e-14));
  CHECK(fermi(3.0) + fermi(-3.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("find_mu_for_occupation") {
  SUBCASE("two-level midgap at low temperature") {
    Matrix h = Matrix::Zero(2, 2);
    h(1, 1) = 1.0;
    const OverlapMatrix s = OverlapMatrix::identity(2);
    const EigenPair e = symmetric_eigendecomposition(HermitianMatrix(h));
    const MuSolution r = find_mu_for_occupation(e, s, 200.0, 1.0, 1.0, 1e-12);
    CHECK_FALSE(r.degenerate);
    CHECK(r.mu == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(r.residual) <= 1e-12);
  }
  SUBCASE("beta = 0 is degenerate") {
    std::mt19937 rng(3);
    const HermitianMatrix h(random_symmetric(rng, 6));
    const OverlapMatrix s = OverlapMatrix::identity(6);
    const EigenPair e = symmetric_eigendecomposition(h);
    const MuSolution r = find_mu_for_occupation(e, s, 0.0, 3.0, 1.0);
    CHECK(r.degenerate);
    for (double mu : {-5.0, 0.0, r.mu, 7.0}) CHECK(occupation(e, s, 0.0, mu, 1.0) == doctest::Approx(3.0));
  }
  SUBCASE("Hückel ring at half filling sits at alpha") {
    const SystemSpec sys = build_huckel(50, 0.569, 0.066);
    const EigenPair e = symmetric_eigendecomposition(sys.h_core());
    const MuSolution r = find_mu_for_occupation(e, sys.s(), 300.0, 25.0, 1.0, 1e-12);
    CHECK(r.mu == doctest::Approx(0.569).epsilon(1e-10));
  }
  SUBCASE("unreachable target") {
    const EigenPair e = symmetric_eigendecomposition(HermitianMatrix::identity(2));
    CHECK_THROWS_AS(find_mu_for_occupation(e, OverlapMatrix::identity(2), 1.0, 2.5, 1.0), InfeasibleEnsemble);
    CHECK_THROWS_AS(find_mu_for_occupation(e, OverlapMatrix::identity(2), 1.0, 0.0, 1.0), InfeasibleEnsemble);
  }
  SUBCASE("non-orthogonal trace target") {
    std::mt19937 rng(17);
    const HermitianMatrix h(random_symmetric(rng, 7));
    const OverlapMatrix s(random_spd(rng, 7));
    const EigenPair e = generalized_eigendecomposition(h, s);
    const double norm = 2.0 * 3.0 / s.trace();
    const MuSolution r = find_mu_for_occupation(e, s, 4.0, 3.0, norm, 1e-11);
    const Matrix p = norm * s.mat() * matrix_function(e, [&](double x) { return fermi(4.0 * (x - r.mu)); });
    CHECK(p.trace() == doctest::Approx(3.0).epsilon(1e-11));
  }
}

TEST_CASE("occupation is monotone in mu") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> mu_dist(-3.0, 3.0);
  for (int sys = 0; sys < 5; ++sys) {
    const int n = 3 + 2 * sys;
    const HermitianMatrix h(random_symmetric(rng, n));
    const OverlapMatrix s(random_spd(rng, n));
    const EigenPair e = generalized_eigendecomposition(h, s);
    for (int k = 0; k < 100; ++k) {
      double a = mu_dist(rng), b = mu_dist(rng);
      if (a > b) std::swap(a, b);
      CHECK(occupation(e, s, 2.5, a, 1.0) <= occupation(e, s, 2.5, b, 1.0) + 1e-12);
    }
  }
}

TEST_CASE("aitken_accelerate") {
  CHECK(aitken_accelerate(0.0, 0.5, 0.75) == 1.0);
  CHECK(aitken_accelerate(3.0, 3.0, 3.0) == 3.0);
  CHECK(aitken_accelerate(5.0, 2.6, 2.12) == doctest::Approx(2.0).epsilon(1e-14));

  // Exact on a + b r^k for |r| < 1.
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-0.95, 0.95);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  for (int t = 0; t < 200; ++t) {
    const double a = coef(rng), b = coef(rng), r = u(rng);
    if (std::abs(b) < 0.05 || std::abs(r) < 0.05) continue;
    const double got = aitken_accelerate(a + b, a + b * r, a + b * r * r);
    CHECK(std::abs(got - a) <= 1e-12 * std::max(1.0, std::abs(a)) / std::pow(1.0 - std::abs(r), 2));
  }

  Matrix x0(1, 2), x1(1, 2), x2(1, 2);
  x0 << 0.0, 3.0;
  x1 << 0.5, 3.0;
  x2 << 0.75, 3.0;
  const Matrix acc = aitken_accelerate(x0, x1, x2);
  CHECK(acc(0, 0) == 1.0);
  CHECK(acc(0, 1) == 3.0);
}
