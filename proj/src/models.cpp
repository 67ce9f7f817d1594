#include "fermicool/models.hpp"

#include "fermicool/errors.hpp"
#include "fermicool/matrix_io.hpp"

#include <cmath>
#include <sstream>

namespace fermicool {

SystemSpec::SystemSpec(HermitianMatrix h_core, OverlapMatrix s) : h_core_(std::move(h_core)), s_(std::move(s)) {
  if (h_core_.dim() != s_.dim()) {
    std::ostringstream os;
    os << "core Hamiltonian has dimension " << h_core_.dim() << " but overlap has " << s_.dim();
    throw DimensionMismatch(os.str());
  }
}

void validate_ensemble(const SystemSpec& system, const EnsembleSpec& ensemble) {
  if (const auto* c = std::get_if<Canonical>(&ensemble)) {
    const double full = system.s().trace();
    if (!(c->n_electrons > 0.0) || !(c->n_electrons < full)) {
      std::ostringstream os;
      os.precision(17);
      os << "electron count " << c->n_electrons << " must lie strictly inside (0, Tr[S] = " << full << ")";
      throw InfeasibleEnsemble(os.str());
    }
  } else if (!std::isfinite(std::get<GrandCanonical>(ensemble).mu)) {
    throw InfeasibleEnsemble("chemical potential must be finite");
  }
}

double normalization_for(const SystemSpec& system, const EnsembleSpec& ensemble) {
  if (const auto* c = std::get_if<Canonical>(&ensemble))
    return CanonicalNormalization(c->n_electrons, system.s()).value();
  return 1.0;
}

HermitianMatrix initial_density(const SystemSpec& system, const EnsembleSpec& ensemble) {
  return HermitianMatrix(0.5 * normalization_for(system, ensemble) * system.s().mat());
}

HermitianMatrix effective_hamiltonian(const HamiltonianModel& model, const HermitianMatrix& p,
                                      double normalization) {
  const SystemSpec& sys = model.system;
  if (p.dim() != sys.dim()) {
    std::ostringstream os;
    os << "density has dimension " << p.dim() << " but system has " << sys.dim();
    throw DimensionMismatch(os.str());
  }
  if (const auto* toy = std::get_if<ToyNonlinear>(&model.kind)) {
    return HermitianMatrix(sys.h_core().mat() +
                           toy->coupling_u * (p.mat() - 0.5 * normalization * sys.s().mat()));
  }
  return sys.h_core();
}

SystemSpec build_huckel(int n, double alpha, double gamma) {
  if (n < 3) throw DimensionMismatch("Hückel ring needs at least 3 sites");
  Matrix h = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    h(i, i) = alpha;
    const int j = (i + 1) % n;
    h(i, j) = gamma;
    h(j, i) = gamma;
  }
  return SystemSpec(HermitianMatrix(h), OverlapMatrix::identity(n));
}

namespace {

HermitianMatrix symmetrized_with_warning(const Matrix& m, const std::string& label, const WarningSink& warn) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << label << " is " << m.rows() << "x" << m.cols() << ", expected square";
    throw DimensionMismatch(os.str());
  }
  const double asym = max_abs(m - m.transpose());
  if (asym > 1e-8 && warn) {
    std::ostringstream os;
    os.precision(3);
    os << "warning: " << label << " asymmetry " << asym << " exceeds 1e-8; symmetrized";
    warn(os.str());
  }
  return HermitianMatrix(m);
}

}  // namespace

SystemSpec load_system(const std::filesystem::path& h_path, const std::optional<std::filesystem::path>& s_path,
                       const WarningSink& warn) {
  HermitianMatrix h = symmetrized_with_warning(read_dense_matrix(h_path), h_path.string(), warn);
  if (!s_path) {
    const Eigen::Index n = h.dim();
    return SystemSpec(std::move(h), OverlapMatrix::identity(n));
  }
  HermitianMatrix s = symmetrized_with_warning(read_dense_matrix(*s_path), s_path->string(), warn);
  return SystemSpec(std::move(h), OverlapMatrix(s));
}

double middle_eigenvalue_mu(const SystemSpec& system, MuSource source) {
  const Vector values = source == MuSource::Pencil
                            ? generalized_eigendecomposition(system.h_core(), system.s()).values
                            : symmetric_eigendecomposition(system.h_core()).values;
  const Eigen::Index n = values.size();
  return 0.5 * (values((n - 1) / 2) + values(n / 2));
}

Vector occupation_numbers(const HermitianMatrix& p, const OverlapMatrix& s) {
  return generalized_eigendecomposition(p, s).values;
}

HermitianMatrix exact_grand_fd(const HermitianMatrix& h, const OverlapMatrix& s, double mu, double beta) {
  if (!std::isfinite(beta)) throw SolverAbort("inverse temperature must be finite");
  if (h.dim() != s.dim()) throw DimensionMismatch("Hamiltonian and overlap dimensions differ");
  if (beta == 0.0) return HermitianMatrix(0.5 * s.mat());
  const EigenPair eig = generalized_eigendecomposition(h, s);
  const Matrix f = matrix_function(eig, [&](double e) { return fermi(beta * (e - mu)); });
  return HermitianMatrix(s.mat() * f);
}

HermitianMatrix exact_grand_fd(const SystemSpec& system, double mu, double beta) {
  return exact_grand_fd(system.h_core(), system.s(), mu, beta);
}

CanonicalExact exact_canonical_fd(const HermitianMatrix& h, const OverlapMatrix& s, double n_electrons,
                                  double beta, double mu_tol) {
  if (!(n_electrons > 0.0) || !(n_electrons < s.trace())) {
    std::ostringstream os;
    os.precision(17);
    os << "electron count " << n_electrons << " must lie strictly inside (0, Tr[S] = " << s.trace() << ")";
    throw InfeasibleEnsemble(os.str());
  }
  if (beta < 0.0 || !std::isfinite(beta)) throw SolverAbort("inverse temperature must be finite and >= 0");
  const double norm = CanonicalNormalization(n_electrons, s).value();
  const EigenPair eig = generalized_eigendecomposition(h, s);
  if (beta == 0.0) {
    // Occupation is mu-independent here; report the beta -> 0+ limit Tr[H]/Tr[S].
    MuSolution solve = find_mu_for_occupation(eig, s, 0.0, n_electrons, norm, mu_tol);
    return {HermitianMatrix(0.5 * norm * s.mat()), h.trace() / s.trace(), solve};
  }
  MuSolution solve = find_mu_for_occupation(eig, s, beta, n_electrons, norm, mu_tol);
  const double mu = solve.mu;
  const Matrix f = matrix_function(eig, [&](double e) { return fermi(beta * (e - mu)); });
  return {HermitianMatrix(norm * s.mat() * f), mu, solve};
}

CanonicalExact exact_canonical_fd(const SystemSpec& system, double n_electrons, double beta, double mu_tol) {
  return exact_canonical_fd(system.h_core(), system.s(), n_electrons, beta, mu_tol);
}

HermitianMatrix exact_gibbs(const HermitianMatrix& h, double beta) {
  const EigenPair eig = symmetric_eigendecomposition(h);
  return HermitianMatrix(matrix_function(eig, [&](double e) { return std::exp(-beta * e); }));
}

ScfResult scf_fixed_point(const HamiltonianModel& model, const EnsembleSpec& ensemble, double beta,
                          const ScfOptions& options) {
  const SystemSpec& sys = model.system;
  validate_ensemble(sys, ensemble);
  const double norm = normalization_for(sys, ensemble);

  auto map = [&](const HermitianMatrix& p) -> std::pair<HermitianMatrix, double> {
    const HermitianMatrix h = effective_hamiltonian(model, p, norm);
    if (const auto* c = std::get_if<Canonical>(&ensemble)) {
      CanonicalExact r = exact_canonical_fd(h, sys.s(), c->n_electrons, beta);
      return {std::move(r.density), r.mu};
    }
    const double mu = std::get<GrandCanonical>(ensemble).mu;
    return {exact_grand_fd(h, sys.s(), mu, beta), mu};
  };

  HermitianMatrix p = initial_density(sys, ensemble);
  const auto* toy = std::get_if<ToyNonlinear>(&model.kind);
  if (toy == nullptr || toy->coupling_u == 0.0) {
    auto [next, mu] = map(p);
    return {std::move(next), mu, 1, 0.0, {0.0}};
  }

  std::vector<Matrix> window{p.mat()};
  std::vector<double> history;
  int stalled = 0;
  for (int it = 1; it <= options.max_iter; ++it) {
    auto [next, mu] = map(p);
    const double residual = max_abs(next.mat() - p.mat());
    if (!std::isfinite(residual)) throw ScfNotConverged("self-consistent iteration produced non-finite density", residual, it);
    if (!history.empty() && residual >= history.back()) {
      ++stalled;
    } else {
      stalled = 0;
    }
    history.push_back(residual);
    if (residual < options.tol) return {std::move(next), mu, it, residual, std::move(history)};
    if (stalled >= options.stall_window) {
      std::ostringstream os;
      os.precision(3);
      os << "self-consistent iteration oscillates; residual " << residual << " after " << it << " iterations";
      throw ScfNotConverged(os.str(), residual, it);
    }

    if (options.use_aitken) {
      window.push_back(next.mat());
      if (window.size() == 3) {
        // Extrapolate only once the iteration looks linear, i.e. the last two
        // residual ratios agree. Earlier transients make Aitken overshoot.
        const std::size_t k = history.size();
        const bool linear_regime = k >= 3 && std::abs(history[k - 1] / history[k - 2] -
                                                      history[k - 2] / history[k - 3]) <=
                                                 0.25 * history[k - 1] / history[k - 2];
        if (linear_regime) {
          Matrix extrapolated = aitken_accelerate(window[0], window[1], window[2]);
          window.assign(1, extrapolated);
          p = HermitianMatrix(extrapolated);
          continue;
        }
        window.erase(window.begin());
      }
    }
    p = std::move(next);
  }
  std::ostringstream os;
  os.precision(3);
  os << "self-consistent iteration did not converge in " << options.max_iter << " iterations; residual "
     << history.back();
  throw ScfNotConverged(os.str(), history.back(), options.max_iter);
}

}  // namespace fermicool
