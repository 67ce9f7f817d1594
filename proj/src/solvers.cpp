#include "fermicool/solvers.hpp"

#include "fermicool/errors.hpp"

#include <cmath>
#include <sstream>

namespace fermicool {

void SolverConfig::validate() const {
  if (!(beta_final > 0.0) || !std::isfinite(beta_final)) throw SolverAbort("beta_final must be positive and finite");
  if (!(delta_beta > 0.0) || !std::isfinite(delta_beta)) throw SolverAbort("delta_beta must be positive and finite");
  if (delta_beta > beta_final * (1.0 + 1e-12)) throw SolverAbort("delta_beta must not exceed beta_final");
  if (record_every < 1) throw SolverAbort("record_every must be at least 1");
}

int SolverConfig::step_count() const {
  const double n = std::round(beta_final / delta_beta);
  return n < 1.0 ? 1 : static_cast<int>(n);
}

namespace {

void require_same_dim(const HermitianMatrix& p, const HermitianMatrix& h, const OverlapMatrix& s) {
  if (p.dim() != h.dim() || p.dim() != s.dim()) {
    std::ostringstream os;
    os << "dimension mismatch: P " << p.dim() << ", H " << h.dim() << ", S " << s.dim();
    throw DimensionMismatch(os.str());
  }
}

Matrix times_sinv(const Matrix& m, const OverlapMatrix& s) { return s.is_identity() ? m : Matrix(m * s.inverse()); }
Matrix sinv_times(const OverlapMatrix& s, const Matrix& m) { return s.is_identity() ? m : Matrix(s.inverse() * m); }

// Tr[A B] without forming the product.
double trace_of_product(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b.transpose()).sum(); }

Matrix symmetric_part_negated(const Matrix& t) { return -0.5 * (t + t.transpose()); }

}  // namespace

HermitianMatrix grand_rhs(const HermitianMatrix& p, const HermitianMatrix& h, const OverlapMatrix& s, double mu) {
  require_same_dim(p, h, s);
  const Eigen::Index n = p.dim();
  const Matrix id = Matrix::Identity(n, n);
  // The second term of the symmetrized flow is the transpose of the first.
  const Matrix t = p.mat() * (id - sinv_times(s, p.mat())) * (sinv_times(s, h.mat()) - mu * id);
  return HermitianMatrix(symmetric_part_negated(t));
}

CanonicalDerivative canonical_rhs(const HermitianMatrix& p, const HermitianMatrix& h, const OverlapMatrix& s,
                                  double normalization) {
  require_same_dim(p, h, s);
  const Eigen::Index n = p.dim();
  const Matrix sinv_h = sinv_times(s, h.mat());
  Matrix x = p.mat() - p.mat() * sinv_times(s, p.mat()) / normalization;
  const double tr_sym = 2.0 * x.trace();
  if (std::abs(tr_sym) < 1e-14) {
    std::ostringstream os;
    os.precision(3);
    os << "canonical flow is degenerate: Tr[X + X^T] = " << tr_sym;
    throw DegenerateTrace(os.str());
  }
  const double scalar = 2.0 * trace_of_product(x, sinv_h) / tr_sym;
  const Matrix t = x * (sinv_h - scalar * Matrix::Identity(n, n));
  return {HermitianMatrix(symmetric_part_negated(t)), CanonicalWorkspace{std::move(x), scalar}};
}

double lagrange_scalar_rate(const HermitianMatrix& p, const HermitianMatrix& dp, const HermitianMatrix& h,
                            const OverlapMatrix& s, double normalization) {
  require_same_dim(p, h, s);
  const Matrix sinv_h = sinv_times(s, h.mat());
  const Matrix sinv_p = sinv_times(s, p.mat());
  const Matrix sinv_dp = sinv_times(s, dp.mat());
  const Matrix x = p.mat() - p.mat() * sinv_p / normalization;
  const Matrix dx = dp.mat() - (dp.mat() * sinv_p + p.mat() * sinv_dp) / normalization;
  const double a = trace_of_product(x, sinv_h);
  const double b = x.trace();
  const double da = trace_of_product(dx, sinv_h);
  const double db = dx.trace();
  if (std::abs(b) < 1e-14) throw DegenerateTrace("canonical flow is degenerate: Tr[X] vanishes");
  return (da * b - a * db) / (b * b);
}

double mu_rhs(double mu, double beta, const CanonicalWorkspace& workspace) {
  if (!(beta > 0.0)) throw SolverAbort("chemical potential rate is singular at beta <= 0");
  return (workspace.lagrange_scalar - mu) / beta;
}

HermitianMatrix bloch_rhs(const HermitianMatrix& rho, const HermitianMatrix& h) {
  if (rho.dim() != h.dim()) throw DimensionMismatch("density and Hamiltonian dimensions differ");
  return HermitianMatrix(symmetric_part_negated(h.mat() * rho.mat()));
}

Matrix kraus_generator(const HermitianMatrix& p, const HermitianMatrix& h, const OverlapMatrix& s, double shift,
                       double delta_beta, double normalization) {
  require_same_dim(p, h, s);
  const Eigen::Index n = p.dim();
  const Matrix id = Matrix::Identity(n, n);
  return (-0.5 * delta_beta) * (times_sinv(h.mat(), s) - shift * id) * (id - times_sinv(p.mat(), s) / normalization);
}

std::pair<HermitianMatrix, KrausStepOperators> step_kraus1(const HermitianMatrix& p, const HermitianMatrix& h,
                                                           const OverlapMatrix& s, double shift,
                                                           double delta_beta, double normalization) {
  Matrix k = kraus_generator(p, h, s, shift, delta_beta, normalization);
  const Matrix a = Matrix::Identity(p.dim(), p.dim()) + k;
  Matrix next = a * p.mat() * a.transpose();
  const double asym = max_abs(next - next.transpose());
  return {HermitianMatrix(next), KrausStepOperators{std::move(k), Matrix(), asym}};
}

std::pair<HermitianMatrix, KrausStepOperators> step_kraus2(const HermitianMatrix& p, const HermitianMatrix& h,
                                                           const OverlapMatrix& s, double shift,
                                                           double delta_beta, double normalization,
                                                           double shift_rate, Kraus2Form form) {
  Matrix k = kraus_generator(p, h, s, shift, delta_beta, normalization);
  const Eigen::Index n = p.dim();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix& pm = p.mat();
  const Matrix shifted_h = times_sinv(h.mat(), s) - shift * id;
  Matrix a = id + k * (id + 0.5 * k) +
             (0.25 * delta_beta / normalization) * shifted_h * times_sinv(pm * k.transpose() + k * pm, s);
  if (shift_rate != 0.0) {
    a += (0.25 * delta_beta * delta_beta * shift_rate) * (id - times_sinv(pm, s) / normalization);
  }
  Matrix next = a * pm * a.transpose();
  if (form == Kraus2Form::TwoTerm) next += k * pm * k.transpose();
  const double asym = max_abs(next - next.transpose());
  return {HermitianMatrix(next), KrausStepOperators{std::move(k), std::move(a), asym}};
}

HermitianMatrix step_rk4(const HermitianMatrix& p, const std::function<HermitianMatrix(const HermitianMatrix&)>& rhs,
                         double delta_beta) {
  const Matrix next = rk4_step<Matrix>(p.mat(), 0.0, delta_beta, [&](double, const Matrix& y) -> Matrix {
    return rhs(HermitianMatrix(y)).mat();
  });
  return HermitianMatrix(next);
}

double commutator_defect(const HermitianMatrix& h, const HermitianMatrix& h_next, double delta_beta) {
  if (h.dim() != h_next.dim()) throw DimensionMismatch("Hamiltonian dimensions differ");
  if (!(delta_beta > 0.0)) throw SolverAbort("commutator defect needs delta_beta > 0");
  const Matrix rate = (h_next.mat() - h.mat()) / delta_beta;
  return (h.mat() * rate - rate * h.mat()).norm();
}

namespace {

// (P, mu) as one RK4 state for the canonical coupled system.
struct CoupledState {
  Matrix p;
  double mu = 0.0;
};

CoupledState operator+(const CoupledState& a, const CoupledState& b) { return {a.p + b.p, a.mu + b.mu}; }
CoupledState operator*(double c, const CoupledState& a) { return {c * a.p, c * a.mu}; }

// dmu/dbeta, using the beta -> 0 limit s'(0)/2 at the initial state, where
// beta mu(beta) = integral of the Lagrange scalar.
double chemical_potential_rate(double mu, double beta, const CanonicalDerivative& d, const HermitianMatrix& p,
                               const HermitianMatrix& h, const OverlapMatrix& s, double normalization) {
  if (beta > 0.0) return mu_rhs(mu, beta, d.workspace);
  return 0.5 * lagrange_scalar_rate(p, d.derivative, h, s, normalization);
}

class Recorder {
 public:
  Recorder(const HamiltonianModel& model, const SolverConfig& config, double normalization, bool canonical,
           Trajectory& traj)
      : model_(model), config_(config), normalization_(normalization), canonical_(canonical), traj_(traj) {}

  void record(double beta, const HermitianMatrix& p, double mu, double hermiticity_defect, double defect) {
    const OverlapMatrix& s = model_.system.s();
    StepDiagnostics d;
    d.beta = beta;
    Eigen::SelfAdjointEigenSolver<Matrix> es(p.mat(), Eigen::EigenvaluesOnly);
    d.min_eigenvalue = es.eigenvalues()(0);
    d.hermiticity_defect = hermiticity_defect;
    d.trace = p.trace();
    const HermitianMatrix h = effective_hamiltonian(model_, p, normalization_);
    const Matrix a = sinv_times(s, p.mat());
    const Matrix b = sinv_times(s, h.mat());
    d.commutator_norm = (a * b - b * a).norm();
    d.commutator_defect = defect;
    if (d.min_eigenvalue < -config_.positivity_tol) ++traj_.positivity_violations;
    if (hermiticity_defect > config_.hermiticity_tol) ++traj_.hermiticity_violations;

    traj_.betas.push_back(beta);
    traj_.diagnostics.push_back(d);
    if (canonical_) traj_.mu_trace.push_back(mu);
    if (config_.keep_snapshots || traj_.densities.empty()) {
      traj_.densities.push_back(p);
    } else {
      traj_.densities.back() = p;
    }
  }

 private:
  const HamiltonianModel& model_;
  const SolverConfig& config_;
  double normalization_;
  bool canonical_;
  Trajectory& traj_;
};

}  // namespace

Trajectory cool(const HamiltonianModel& model, const EnsembleSpec& ensemble, const SolverConfig& config) {
  config.validate();
  const SystemSpec& sys = model.system;
  validate_ensemble(sys, ensemble);
  const OverlapMatrix& s = sys.s();
  const bool canonical = is_canonical(ensemble);
  const double norm = normalization_for(sys, ensemble);
  const int steps = config.step_count();
  const double h = config.snapped_delta_beta();
  const bool nonlinear = !model.is_linear();

  Trajectory traj;
  traj.delta_beta = h;
  traj.steps = steps;
  Recorder recorder(model, config, norm, canonical, traj);

  HermitianMatrix p = initial_density(sys, ensemble);
  HermitianMatrix ham = effective_hamiltonian(model, p, norm);
  double mu = canonical ? ham.trace() / s.trace() : std::get<GrandCanonical>(ensemble).mu;
  recorder.record(0.0, p, mu, 0.0, 0.0);

  auto stage_hamiltonian = [&](const Matrix& y) {
    return nonlinear && config.refresh_per_stage ? effective_hamiltonian(model, HermitianMatrix(y), norm) : ham;
  };

  double defect = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double beta = i * h;
    if (nonlinear) {
      HermitianMatrix fresh = effective_hamiltonian(model, p, norm);
      if (i > 0) defect = commutator_defect(ham, fresh, h);
      traj.max_commutator_defect = std::max(traj.max_commutator_defect, defect);
      ham = std::move(fresh);
    }

    Matrix next;
    double herm = 0.0;
    switch (config.scheme) {
      case Scheme::RK4:
        if (canonical) {
          const CoupledState y = rk4_step<CoupledState>(
              CoupledState{p.mat(), mu}, beta, h, [&](double b, const CoupledState& st) -> CoupledState {
                const HermitianMatrix ps(st.p);
                const HermitianMatrix hs = stage_hamiltonian(st.p);
                const CanonicalDerivative d = canonical_rhs(ps, hs, s, norm);
                return {d.derivative.mat(), chemical_potential_rate(st.mu, b, d, ps, hs, s, norm)};
              });
          next = y.p;
          mu = y.mu;
        } else {
          next = rk4_step<Matrix>(p.mat(), beta, h, [&](double, const Matrix& y) -> Matrix {
            return grand_rhs(HermitianMatrix(y), stage_hamiltonian(y), s, mu).mat();
          });
        }
        break;
      case Scheme::Kraus1:
        if (canonical) {
          const CanonicalDerivative d = canonical_rhs(p, ham, s, norm);
          const double rate = chemical_potential_rate(mu, beta, d, p, ham, s, norm);
          auto [stepped, ops] = step_kraus1(p, ham, s, d.workspace.lagrange_scalar, h, norm);
          next = stepped.mat();
          herm = ops.asymmetry;
          mu += h * rate;
        } else {
          auto [stepped, ops] = step_kraus1(p, ham, s, mu, h);
          next = stepped.mat();
          herm = ops.asymmetry;
        }
        break;
      case Scheme::Kraus2:
        if (canonical) {
          const CanonicalDerivative d = canonical_rhs(p, ham, s, norm);
          const double shift_rate = lagrange_scalar_rate(p, d.derivative, ham, s, norm);
          auto [stepped, ops] = step_kraus2(p, ham, s, d.workspace.lagrange_scalar, h, norm, shift_rate);
          herm = ops.asymmetry;
          // Heun for the chemical potential.
          const double rate0 = chemical_potential_rate(mu, beta, d, p, ham, s, norm);
          const double predicted = mu + h * rate0;
          const CanonicalDerivative d1 = canonical_rhs(stepped, ham, s, norm);
          const double rate1 = mu_rhs(predicted, beta + h, d1.workspace);
          mu += 0.5 * h * (rate0 + rate1);
          next = stepped.mat();
        } else {
          auto [stepped, ops] = step_kraus2(p, ham, s, mu, h);
          next = stepped.mat();
          herm = ops.asymmetry;
        }
        break;
    }

    if (!next.allFinite() || !std::isfinite(mu)) {
      std::ostringstream os;
      os.precision(17);
      os << "density became non-finite; last finite state at beta " << beta;
      throw SolverAbort(os.str());
    }
    if (config.scheme == Scheme::RK4) herm = max_abs(next - next.transpose());
    p = HermitianMatrix(next);
    if ((i + 1) % config.record_every == 0 || i + 1 == steps) {
      const double b = (i + 1 == steps) ? config.beta_final : (i + 1) * h;
      recorder.record(b, p, mu, herm, defect);
    }
  }
  traj.final_mu = mu;
  return traj;
}

}  // namespace fermicool
