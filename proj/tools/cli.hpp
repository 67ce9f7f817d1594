#pragma once

// Command-line front end for fermicool. Kept as a library so the test suite
// can drive the real argument parser and file writers.

#include "fermicool/models.hpp"
#include "fermicool/solvers.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace fermicool::cli {

enum ExitCode : int {
  kOk = 0,
  kArgumentError = 2,
  kParseError = 3,
  kInfeasibleEnsemble = 4,
  kSolverAbort = 5,
  kScfNotConverged = 6,
  kOutputError = 7,
};

struct HuckelSource {
  int n = 0;
  double alpha = 0.0;
  double gamma = 0.0;
};

struct FileSource {
  std::filesystem::path h_path;
  std::optional<std::filesystem::path> s_path;
};

struct MuChoice {
  /// Empty means "auto": mean of the two middle eigenvalues.
  std::optional<double> value;
  bool use_pencil = false;
};

struct RunRequest {
  std::variant<HuckelSource, FileSource> source;
  bool canonical = false;
  double n_electrons = 0.0;
  MuChoice mu;
  std::variant<Linear, ToyNonlinear> model = Linear{};
  SolverConfig config;
  ScfOptions scf;
  std::filesystem::path output_path = "fermicool.csv";
  bool emit_oracle = false;
  bool emit_mu_trace = false;
  /// Step sizes for the convergence study, halving.
  std::vector<double> dbeta_list;
};

/// Sibling output file: `<out without .csv>.<suffix>`.
std::filesystem::path sibling_path(const std::filesystem::path& out, const std::string& suffix);

int cmd_run(const RunRequest& request, std::ostream& out, std::ostream& err);
int cmd_oracle(const RunRequest& request, std::ostream& out, std::ostream& err);
int cmd_convergence(const RunRequest& request, std::ostream& out, std::ostream& err);

/// Parses argv, dispatches to a command and maps errors to exit codes.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fermicool::cli
