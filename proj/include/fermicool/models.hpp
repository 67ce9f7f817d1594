#pragma once

// Problem statement types, exact Fermi-Dirac / Gibbs oracles and the
// self-consistent loop used as the reference for density-dependent
// Hamiltonians.

#include "fermicool/matcore.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fermicool {

/// Core Hamiltonian and overlap of the physical problem.
class SystemSpec {
 public:
  SystemSpec(HermitianMatrix h_core, OverlapMatrix s);

  const HermitianMatrix& h_core() const noexcept { return h_core_; }
  const OverlapMatrix& s() const noexcept { return s_; }
  Eigen::Index dim() const noexcept { return h_core_.dim(); }

 private:
  HermitianMatrix h_core_;
  OverlapMatrix s_;
};

struct GrandCanonical {
  double mu = 0.0;
};

struct Canonical {
  double n_electrons = 0.0;
};

using EnsembleSpec = std::variant<GrandCanonical, Canonical>;

inline bool is_canonical(const EnsembleSpec& e) { return std::holds_alternative<Canonical>(e); }

/// Throws InfeasibleEnsemble unless 0 < n_electrons < Tr[S], i.e. the
/// canonical normalization stays below full (unit) occupation of every
/// orbital at beta = 0.
void validate_ensemble(const SystemSpec& system, const EnsembleSpec& ensemble);

/// 2 N_e / Tr[S]; the factor that makes Tr[P(0)] == N_e.
class CanonicalNormalization {
 public:
  CanonicalNormalization(double n_electrons, const OverlapMatrix& s)
      : value_(2.0 * n_electrons / s.trace()) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// 1 for the grand canonical ensemble, CanonicalNormalization otherwise.
double normalization_for(const SystemSpec& system, const EnsembleSpec& ensemble);

/// normalization * S / 2: the infinite-temperature state.
HermitianMatrix initial_density(const SystemSpec& system, const EnsembleSpec& ensemble);

struct Linear {};

/// H = H_core + u (P - N S / 2). Vanishes at the infinite-temperature state.
struct ToyNonlinear {
  double coupling_u = 0.0;
};

struct HamiltonianModel {
  std::variant<Linear, ToyNonlinear> kind;
  SystemSpec system;

  bool is_linear() const { return std::holds_alternative<Linear>(kind); }
};

HermitianMatrix effective_hamiltonian(const HamiltonianModel& model, const HermitianMatrix& p,
                                      double normalization = 1.0);

/// Periodic tight-binding ring: alpha on the diagonal, gamma between
/// neighbours including the (1,n)/(n,1) corners. S = I.
SystemSpec build_huckel(int n, double alpha, double gamma);

using WarningSink = std::function<void(std::string_view)>;

/// Reads H (and optionally S, identity otherwise) in the dense matrix
/// format. Inputs with asymmetry above 1e-8 are symmetrized with a warning.
SystemSpec load_system(const std::filesystem::path& h_path,
                       const std::optional<std::filesystem::path>& s_path = std::nullopt,
                       const WarningSink& warn = {});

enum class MuSource {
  /// Ascending eigenvalues of the H_core matrix itself.
  Matrix,
  /// Eigenvalues of the pencil (H_core, S).
  Pencil,
};

/// Mean of the two middle ascending eigenvalues (the middle one for odd dim).
double middle_eigenvalue_mu(const SystemSpec& system, MuSource source = MuSource::Matrix);

/// Ascending eigenvalues of S^-1 P, i.e. orbital occupations.
Vector occupation_numbers(const HermitianMatrix& p, const OverlapMatrix& s);

/// S fermi(beta (S^-1 H - mu)). Returns S/2 exactly at beta == 0.
HermitianMatrix exact_grand_fd(const HermitianMatrix& h, const OverlapMatrix& s, double mu, double beta);
HermitianMatrix exact_grand_fd(const SystemSpec& system, double mu, double beta);

struct CanonicalExact {
  HermitianMatrix density;
  double mu;
  MuSolution solve;
};

/// N S fermi(beta (S^-1 H - mu(beta))) with mu(beta) chosen so Tr[P] == N_e.
CanonicalExact exact_canonical_fd(const HermitianMatrix& h, const OverlapMatrix& s, double n_electrons,
                                  double beta, double mu_tol = 1e-10);
CanonicalExact exact_canonical_fd(const SystemSpec& system, double n_electrons, double beta,
                                  double mu_tol = 1e-10);

/// exp(-beta H), orthonormal basis.
HermitianMatrix exact_gibbs(const HermitianMatrix& h, double beta);

struct ScfOptions {
  double tol = 1e-10;
  int max_iter = 500;
  bool use_aitken = false;
  /// Consecutive non-decreasing residuals that count as oscillation.
  int stall_window = 10;
};

struct ScfResult {
  HermitianMatrix density;
  double mu;
  int iterations;
  double residual;
  std::vector<double> residual_history;
};

/// Fixed point of P -> ExactFD(H(P)) starting from the infinite-temperature
/// state. Convergence is measured as max|ExactFD(H(P)) - P|. With
/// use_aitken, the last three iterates are replaced by their entrywise Aitken
/// extrapolation (Steffensen cadence) whenever the last two residual ratios
/// agree within 25%; otherwise the window slides by one plain step.
ScfResult scf_fixed_point(const HamiltonianModel& model, const EnsembleSpec& ensemble, double beta,
                          const ScfOptions& options = {});

}  // namespace fermicool
