#pragma once

// Cooling integrators. Every ODE here starts at the infinite-temperature
// state and is advanced in inverse temperature beta:
//
//   grand canonical   dP/dbeta = -(T + T^T)/2,  T = P (1 - S^-1 P) (S^-1 H - mu)
//   canonical         dP/dbeta = -(T + T^T)/2,  T = X (S^-1 H - s),
//                     X = P (1 - S^-1 P / N),   s = Tr[X S^-1 H] / Tr[X]
//   chemical pot.     dmu/dbeta = (s - mu) / beta
//   Bloch             drho/dbeta = -(H rho + rho H) / 2
//
// The Kraus schemes write each step as a congruence A P A^T, so a positive
// semidefinite P stays positive semidefinite regardless of step size.

#include "fermicool/matcore.hpp"
#include "fermicool/models.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace fermicool {

enum class Scheme { Kraus1, Kraus2, RK4 };

/// Second-order Kraus variants. SingleCongruence is the default and is
/// second-order accurate. TwoTerm adds K P K^T, which keeps positivity but
/// degrades the global order to one (see docs/second_order_kraus.md).
enum class Kraus2Form { SingleCongruence, TwoTerm };

struct SolverConfig {
  Scheme scheme = Scheme::RK4;
  double beta_final = 1.0;
  double delta_beta = 0.01;
  int record_every = 1;
  double positivity_tol = 1e-10;
  double hermiticity_tol = 1e-10;
  /// Keep every recorded density; otherwise only the final one is kept.
  bool keep_snapshots = true;
  /// Re-evaluate a density-dependent H at every RK4 stage rather than once
  /// per step.
  bool refresh_per_stage = false;

  /// Throws SolverAbort on non-positive or inconsistent settings.
  void validate() const;
  /// round(beta_final / delta_beta), at least 1.
  int step_count() const;
  /// beta_final / step_count(): the step actually taken.
  double snapped_delta_beta() const { return beta_final / step_count(); }
};

struct CanonicalWorkspace {
  Matrix x;
  /// mu + beta dmu/dbeta, the multiplier that keeps Tr[P] fixed.
  double lagrange_scalar = 0.0;
};

struct CanonicalDerivative {
  HermitianMatrix derivative;
  CanonicalWorkspace workspace;
};

struct KrausStepOperators {
  Matrix k;
  /// Empty for first-order steps.
  Matrix a;
  /// max|M - M^T| of the congruence before symmetrization.
  double asymmetry = 0.0;
};

HermitianMatrix grand_rhs(const HermitianMatrix& p, const HermitianMatrix& h, const OverlapMatrix& s, double mu);

/// Throws DegenerateTrace when |Tr[X + X^T]| < 1e-14.
CanonicalDerivative canonical_rhs(const HermitianMatrix& p, const HermitianMatrix& h, const OverlapMatrix& s,
                                  double normalization);

/// d/dbeta of the canonical Lagrange scalar along the flow with derivative
/// `dp`, for a Hamiltonian held fixed.
double lagrange_scalar_rate(const HermitianMatrix& p, const HermitianMatrix& dp, const HermitianMatrix& h,
                            const OverlapMatrix& s, double normalization);

/// (lagrange_scalar - mu) / beta. Throws SolverAbort for beta <= 0.
double mu_rhs(double mu, double beta, const CanonicalWorkspace& workspace);

HermitianMatrix bloch_rhs(const HermitianMatrix& rho, const HermitianMatrix& h);

/// K = -(delta_beta/2)(H S^-1 - shift)(1 - P S^-1 / normalization).
/// shift is mu for the grand canonical flow and the Lagrange scalar for the
/// canonical one.
Matrix kraus_generator(const HermitianMatrix& p, const HermitianMatrix& h, const OverlapMatrix& s, double shift,
                       double delta_beta, double normalization = 1.0);

/// (1 + K) P (1 + K)^T.
std::pair<HermitianMatrix, KrausStepOperators> step_kraus1(const HermitianMatrix& p, const HermitianMatrix& h,
                                                           const OverlapMatrix& s, double shift,
                                                           double delta_beta, double normalization = 1.0);

/// A P A^T with A = 1 + K(1 + K/2) + (delta_beta/4)(H S^-1 - shift)(P K^T + K P) S^-1 / N
///                  + (delta_beta^2 shift_rate / 4)(1 - P S^-1 / N).
/// shift_rate is d(shift)/dbeta, zero in the grand canonical ensemble.
std::pair<HermitianMatrix, KrausStepOperators> step_kraus2(const HermitianMatrix& p, const HermitianMatrix& h,
                                                           const OverlapMatrix& s, double shift,
                                                           double delta_beta, double normalization = 1.0,
                                                           double shift_rate = 0.0,
                                                           Kraus2Form form = Kraus2Form::SingleCongruence);

/// Classic four-stage Runge-Kutta step for any state type closed under
/// addition and scalar multiplication. `rhs(beta, y)` returns dy/dbeta.
template <class State, class Rhs>
State rk4_step(const State& y, double beta, double h, Rhs&& rhs) {
  const State k1 = rhs(beta, y);
  const State k2 = rhs(beta + 0.5 * h, y + (0.5 * h) * k1);
  const State k3 = rhs(beta + 0.5 * h, y + (0.5 * h) * k2);
  const State k4 = rhs(beta + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// RK4 step of a density matrix under an autonomous right-hand side,
/// symmetrized on return.
HermitianMatrix step_rk4(const HermitianMatrix& p, const std::function<HermitianMatrix(const HermitianMatrix&)>& rhs,
                         double delta_beta);

/// Frobenius norm of [H, (H_next - H) / delta_beta].
double commutator_defect(const HermitianMatrix& h, const HermitianMatrix& h_next, double delta_beta);

struct StepDiagnostics {
  double beta = 0.0;
  double min_eigenvalue = 0.0;
  /// max|P - P^T| of the update before it was symmetrized.
  double hermiticity_defect = 0.0;
  double trace = 0.0;
  /// ||[S^-1 P, S^-1 H]||_F at the recorded state.
  double commutator_norm = 0.0;
  /// commutator_defect between the Hamiltonians of the last two steps.
  double commutator_defect = 0.0;
};

struct Trajectory {
  std::vector<double> betas;
  /// One snapshot per recorded beta, or only the final state when snapshots
  /// are not kept.
  std::vector<HermitianMatrix> densities;
  /// Recorded chemical potential; canonical ensemble only.
  std::vector<double> mu_trace;
  std::vector<StepDiagnostics> diagnostics;
  double delta_beta = 0.0;
  int steps = 0;
  double final_mu = 0.0;
  int positivity_violations = 0;
  int hermiticity_violations = 0;
  double max_commutator_defect = 0.0;

  const HermitianMatrix& final_density() const { return densities.back(); }
};

/// Integrates from beta = 0 to config.beta_final. Density-dependent
/// Hamiltonians are refreshed from the current P at the start of each step.
/// Throws SolverAbort (with the last finite beta) if P becomes non-finite.
Trajectory cool(const HamiltonianModel& model, const EnsembleSpec& ensemble, const SolverConfig& config);

}  // namespace fermicool
