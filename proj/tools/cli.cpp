#include "cli.hpp"

#include "fermicool/errors.hpp"
#include "fermicool/matrix_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fermicool::cli {

namespace {

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Kraus1: return "kraus1";
    case Scheme::Kraus2: return "kraus2";
    case Scheme::RK4: return "rk4";
  }
  return "?";
}

SystemSpec build_system(const RunRequest& req, std::ostream& err) {
  if (const auto* h = std::get_if<HuckelSource>(&req.source)) return build_huckel(h->n, h->alpha, h->gamma);
  const auto& f = std::get<FileSource>(req.source);
  return load_system(f.h_path, f.s_path, [&](std::string_view msg) { err << msg << '\n'; });
}

EnsembleSpec build_ensemble(const RunRequest& req, const SystemSpec& sys) {
  if (req.canonical) return Canonical{req.n_electrons};
  if (req.mu.value) return GrandCanonical{*req.mu.value};
  return GrandCanonical{middle_eigenvalue_mu(sys, req.mu.use_pencil ? MuSource::Pencil : MuSource::Matrix)};
}

struct Oracle {
  HermitianMatrix density;
  double mu;
  std::optional<ScfResult> scf;
};

Oracle compute_oracle(const HamiltonianModel& model, const EnsembleSpec& ensemble, double beta,
                      const ScfOptions& scf) {
  if (!model.is_linear()) {
    ScfResult r = scf_fixed_point(model, ensemble, beta, scf);
    HermitianMatrix p = r.density;
    const double mu = r.mu;
    return {std::move(p), mu, std::move(r)};
  }
  if (const auto* c = std::get_if<Canonical>(&ensemble)) {
    CanonicalExact r = exact_canonical_fd(model.system, c->n_electrons, beta);
    return {std::move(r.density), r.mu, std::nullopt};
  }
  const double mu = std::get<GrandCanonical>(ensemble).mu;
  return {exact_grand_fd(model.system, mu, beta), mu, std::nullopt};
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::ios_base::failure("write failed for " + path.string());
}

void write_spectra(const std::filesystem::path& path, const Vector& dmm, const Vector& exact) {
  std::ofstream out = open_output(path);
  out << "index,dmm_eigenvalue,exact_eigenvalue,abs_error\n";
  for (Eigen::Index k = 0; k < dmm.size(); ++k) {
    out << k << ',' << format_double(dmm(k)) << ',' << format_double(exact(k)) << ','
        << format_double(std::abs(dmm(k) - exact(k))) << '\n';
  }
  finish(out, path);
}

void write_diagnostics(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out = open_output(path);
  out << "beta,min_eig,hermiticity_defect,trace,commutator_norm\n";
  for (const StepDiagnostics& d : traj.diagnostics) {
    out << format_double(d.beta) << ',' << format_double(d.min_eigenvalue) << ','
        << format_double(d.hermiticity_defect) << ',' << format_double(d.trace) << ','
        << format_double(d.commutator_norm) << '\n';
  }
  finish(out, path);
}

// Oracle chemical potential along the recorded grid. Linear models reuse one
// eigendecomposition; density-dependent models need an SCF solve per point.
std::vector<double> oracle_mu_trace(const HamiltonianModel& model, double n_electrons,
                                    const std::vector<double>& betas, const ScfOptions& scf) {
  std::vector<double> out;
  out.reserve(betas.size());
  const SystemSpec& sys = model.system;
  const double norm = CanonicalNormalization(n_electrons, sys.s()).value();
  const double mu0 = sys.h_core().trace() / sys.s().trace();
  const EigenPair eig = generalized_eigendecomposition(sys.h_core(), sys.s());
  for (double beta : betas) {
    if (beta == 0.0) {
      out.push_back(mu0);
    } else if (model.is_linear()) {
      out.push_back(find_mu_for_occupation(eig, sys.s(), beta, n_electrons, norm).mu);
    } else {
      out.push_back(scf_fixed_point(model, Canonical{n_electrons}, beta, scf).mu);
    }
  }
  return out;
}

struct MetaWriter {
  std::ostringstream body;

  template <class T>
  MetaWriter& kv(const std::string& key, const T& value) {
    body << key << '=' << value << '\n';
    return *this;
  }
  MetaWriter& kvd(const std::string& key, double value) { return kv(key, format_double(value)); }

  void write(const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    const std::time_t now = std::time(nullptr);
    out << "generated_utc=" << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << '\n' << body.str();
    finish(out, path);
  }
};

void describe_request(MetaWriter& meta, const RunRequest& req, const SystemSpec& sys, const EnsembleSpec& ens) {
  if (const auto* h = std::get_if<HuckelSource>(&req.source)) {
    meta.kv("source", "huckel").kv("n", h->n).kvd("alpha", h->alpha).kvd("gamma", h->gamma);
  } else {
    const auto& f = std::get<FileSource>(req.source);
    meta.kv("source", "files").kv("h_path", f.h_path.string()).kv("s_path", f.s_path ? f.s_path->string() : "");
  }
  meta.kv("dim", sys.dim());
  if (const auto* c = std::get_if<Canonical>(&ens)) {
    meta.kv("ensemble", "canonical").kvd("n_electrons", c->n_electrons);
  } else {
    meta.kv("ensemble", "grand").kvd("mu", std::get<GrandCanonical>(ens).mu);
    meta.kv("mu_source", req.mu.value ? "value" : (req.mu.use_pencil ? "auto-pencil" : "auto"));
  }
  if (const auto* t = std::get_if<ToyNonlinear>(&req.model)) {
    meta.kv("model", "toy-nonlinear").kvd("coupling_u", t->coupling_u);
  } else {
    meta.kv("model", "linear");
  }
}

}  // namespace

std::filesystem::path sibling_path(const std::filesystem::path& out, const std::string& suffix) {
  std::filesystem::path p = out;
  if (p.extension() == ".csv") p.replace_extension();
  p += "." + suffix;
  return p;
}

int cmd_run(const RunRequest& req, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const SystemSpec sys = build_system(req, err);
  const EnsembleSpec ensemble = build_ensemble(req, sys);
  validate_ensemble(sys, ensemble);
  const HamiltonianModel model{req.model, sys};

  SolverConfig config = req.config;
  config.keep_snapshots = false;
  const Trajectory traj = cool(model, ensemble, config);
  const Oracle oracle = compute_oracle(model, ensemble, config.beta_final, req.scf);

  const Vector dmm = occupation_numbers(traj.final_density(), sys.s());
  const Vector exact = occupation_numbers(oracle.density, sys.s());
  const double max_err = (dmm - exact).cwiseAbs().maxCoeff();

  write_spectra(req.output_path, dmm, exact);
  write_diagnostics(sibling_path(req.output_path, "diagnostics.csv"), traj);
  if (req.emit_oracle) write_dense_matrix(sibling_path(req.output_path, "oracle.mat"), oracle.density.mat());

  const bool canonical = is_canonical(ensemble);
  if (req.emit_mu_trace && canonical) {
    const auto mu_oracle = oracle_mu_trace(model, std::get<Canonical>(ensemble).n_electrons, traj.betas, req.scf);
    const auto path = sibling_path(req.output_path, "mu.csv");
    std::ofstream mu_out = open_output(path);
    mu_out << "beta,mu_integrated,mu_oracle\n";
    for (std::size_t i = 0; i < traj.betas.size(); ++i) {
      mu_out << format_double(traj.betas[i]) << ',' << format_double(traj.mu_trace[i]) << ','
             << format_double(mu_oracle[i]) << '\n';
    }
    finish(mu_out, path);
  }

  double trace_drift = 0.0;
  if (canonical) {
    const double ne = std::get<Canonical>(ensemble).n_electrons;
    for (const auto& d : traj.diagnostics) trace_drift = std::max(trace_drift, std::abs(d.trace - ne));
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  MetaWriter meta;
  meta.kv("command", "run");
  describe_request(meta, req, sys, ensemble);
  meta.kv("scheme", scheme_name(config.scheme))
      .kvd("beta_final", config.beta_final)
      .kvd("delta_beta_requested", config.delta_beta)
      .kvd("delta_beta", traj.delta_beta)
      .kv("steps", traj.steps)
      .kv("record_every", config.record_every)
      .kvd("final_mu", traj.final_mu)
      .kvd("oracle_mu", oracle.mu)
      .kvd("max_abs_error", max_err)
      .kvd("max_trace_drift", trace_drift)
      .kv("positivity_violations", traj.positivity_violations)
      .kv("hermiticity_violations", traj.hermiticity_violations)
      .kvd("max_commutator_defect", traj.max_commutator_defect);
  if (oracle.scf) meta.kv("scf_iterations", oracle.scf->iterations).kv("scf_aitken", req.scf.use_aitken);
  meta.kvd("elapsed_seconds", elapsed);
  meta.write(sibling_path(req.output_path, "meta"));

  if (traj.positivity_violations > 0) {
    err << "warning: " << traj.positivity_violations << " recorded states had min eigenvalue below -"
        << req.config.positivity_tol << '\n';
  }
  out << "run scheme=" << scheme_name(config.scheme) << " dim=" << sys.dim() << " steps=" << traj.steps
      << " max_abs_error=" << format_double(max_err);
  if (canonical) out << " final_mu=" << format_double(traj.final_mu) << " oracle_mu=" << format_double(oracle.mu)
                     << " max_trace_drift=" << format_double(trace_drift);
  out << " out=" << req.output_path.string() << '\n';
  return kOk;
}

int cmd_oracle(const RunRequest& req, std::ostream& out, std::ostream& err) {
  const SystemSpec sys = build_system(req, err);
  const EnsembleSpec ensemble = build_ensemble(req, sys);
  validate_ensemble(sys, ensemble);
  const HamiltonianModel model{req.model, sys};
  const double beta = req.config.beta_final;
  const Oracle oracle = compute_oracle(model, ensemble, beta, req.scf);
  const Vector exact = occupation_numbers(oracle.density, sys.s());

  {
    std::ofstream csv = open_output(req.output_path);
    csv << "index,exact_eigenvalue\n";
    for (Eigen::Index k = 0; k < exact.size(); ++k) csv << k << ',' << format_double(exact(k)) << '\n';
    finish(csv, req.output_path);
  }
  if (req.emit_oracle) write_dense_matrix(sibling_path(req.output_path, "oracle.mat"), oracle.density.mat());

  MetaWriter meta;
  meta.kv("command", "oracle");
  describe_request(meta, req, sys, ensemble);
  meta.kvd("beta", beta).kvd("oracle_mu", oracle.mu).kvd("trace", oracle.density.trace());
  if (oracle.scf) {
    meta.kv("scf_iterations", oracle.scf->iterations)
        .kv("scf_aitken", req.scf.use_aitken)
        .kvd("scf_residual", oracle.scf->residual);
  }
  meta.write(sibling_path(req.output_path, "meta"));

  out << "oracle dim=" << sys.dim() << " beta=" << format_double(beta) << " mu=" << format_double(oracle.mu)
      << " trace=" << format_double(oracle.density.trace());
  if (oracle.scf) {
    out << " scf_iterations=" << oracle.scf->iterations << " aitken=" << (req.scf.use_aitken ? "on" : "off");
  }
  out << " out=" << req.output_path.string() << '\n';
  return kOk;
}

int cmd_convergence(const RunRequest& req, std::ostream& out, std::ostream& err) {
  const auto& list = req.dbeta_list;
  if (list.size() < 3) throw CLI::ValidationError("--dbeta-list", "needs at least 3 step sizes");
  for (std::size_t i = 1; i < list.size(); ++i) {
    if (std::abs(list[i - 1] / list[i] - 2.0) > 1e-9)
      throw CLI::ValidationError("--dbeta-list", "step sizes must halve successively");
  }
  const SystemSpec sys = build_system(req, err);
  const EnsembleSpec ensemble = build_ensemble(req, sys);
  validate_ensemble(sys, ensemble);
  const HamiltonianModel model{req.model, sys};
  const double beta = req.config.beta_final;
  const Oracle oracle = compute_oracle(model, ensemble, beta, req.scf);
  const Vector exact = occupation_numbers(oracle.density, sys.s());

  std::ofstream csv = open_output(req.output_path);
  csv << "dbeta,global_error,observed_order\n";
  double previous = 0.0;
  out << "convergence scheme=" << scheme_name(req.config.scheme);
  for (std::size_t i = 0; i < list.size(); ++i) {
    SolverConfig config = req.config;
    config.delta_beta = list[i];
    config.keep_snapshots = false;
    config.record_every = config.step_count();
    const Trajectory traj = cool(model, ensemble, config);
    const double error = (occupation_numbers(traj.final_density(), sys.s()) - exact).cwiseAbs().maxCoeff();
    csv << format_double(list[i]) << ',' << format_double(error) << ',';
    if (i > 0) {
      const double order = std::log2(previous / error);
      csv << format_double(order);
      out << " order[" << i << "]=" << format_double(order);
    }
    csv << '\n';
    previous = error;
  }
  finish(csv, req.output_path);
  out << " out=" << req.output_path.string() << '\n';
  return kOk;
}

namespace {

struct RawOptions {
  std::vector<std::string> huckel;
  std::vector<std::string> files;
  bool grand = false;
  std::optional<double> canonical;
  std::string mu = "auto";
  bool mu_pencil = false;
  std::string scheme = "rk4";
  double beta = 1.0;
  double dbeta = 0.01;
  std::optional<double> nonlinear;
  bool aitken = true;
  int record_every = 1;
  std::string out;
  bool emit_oracle = false;
  bool mu_trace = false;
  bool per_stage = false;
  double positivity_tol = 1e-10;
  double hermiticity_tol = 1e-10;
  double scf_tol = 1e-10;
  int scf_max_iter = 500;
  std::vector<double> dbeta_list{0.5, 0.25, 0.125, 0.0625};
};

void add_common_options(CLI::App* cmd, RawOptions& o) {
  auto* huckel = cmd->add_option("--huckel", o.huckel, "Hückel ring: N ALPHA GAMMA")->expected(3);
  auto* files = cmd->add_option("--files", o.files, "dense matrix files: HPATH [SPATH]")->expected(1, 2);
  huckel->excludes(files);
  auto* grand = cmd->add_flag("--grand", o.grand, "grand canonical ensemble (fixed mu)");
  auto* canonical = cmd->add_option("--canonical", o.canonical, "canonical ensemble with NE electrons");
  grand->excludes(canonical);
  cmd->add_option("--mu", o.mu, "chemical potential: auto | VALUE")->capture_default_str();
  cmd->add_flag("--mu-pencil", o.mu_pencil, "--mu auto uses eigenvalues of the pencil (H, S)");
  cmd->add_option("--scheme", o.scheme, "kraus1 | kraus2 | rk4")
      ->check(CLI::IsMember({"kraus1", "kraus2", "rk4"}))
      ->capture_default_str();
  cmd->add_option("--beta", o.beta, "final inverse temperature")->capture_default_str();
  cmd->add_option("--dbeta", o.dbeta, "step size (snapped to divide --beta)")->capture_default_str();
  cmd->add_option("--nonlinear", o.nonlinear, "toy density-dependent Hamiltonian with coupling U");
  cmd->add_flag("--aitken,!--no-aitken", o.aitken, "Aitken acceleration of the SCF oracle (default on)");
  cmd->add_option("--record-every", o.record_every, "record diagnostics every K steps")->capture_default_str();
  cmd->add_option("--out", o.out, "output CSV path");
  cmd->add_flag("--emit-oracle", o.emit_oracle, "also write the oracle density matrix (.oracle.mat)");
  cmd->add_flag("--mu-trace", o.mu_trace, "canonical: write beta, mu_integrated, mu_oracle (.mu.csv)");
  cmd->add_flag("--refresh-per-stage", o.per_stage, "refresh a density-dependent H at every RK4 stage");
  cmd->add_option("--positivity-tol", o.positivity_tol)->capture_default_str();
  cmd->add_option("--hermiticity-tol", o.hermiticity_tol)->capture_default_str();
  cmd->add_option("--scf-tol", o.scf_tol)->capture_default_str();
  cmd->add_option("--scf-max-iter", o.scf_max_iter)->capture_default_str();
}

double to_double(const std::string& flag, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw CLI::ValidationError(flag, "'" + text + "' is not a number");
}

RunRequest to_request(const RawOptions& o, const std::string& command) {
  RunRequest req;
  if (!o.huckel.empty()) {
    const double n = to_double("--huckel", o.huckel[0]);
    if (n != std::floor(n)) throw CLI::ValidationError("--huckel", "N must be an integer");
    req.source = HuckelSource{static_cast<int>(n), to_double("--huckel", o.huckel[1]), to_double("--huckel", o.huckel[2])};
  } else if (!o.files.empty()) {
    FileSource f{o.files[0], std::nullopt};
    if (o.files.size() > 1) f.s_path = o.files[1];
    req.source = f;
  } else {
    throw CLI::ValidationError("--huckel/--files", "one system source is required");
  }
  if (!o.grand && !o.canonical) throw CLI::ValidationError("--grand/--canonical", "one ensemble is required");
  if (o.canonical) {
    req.canonical = true;
    req.n_electrons = *o.canonical;
  }
  if (o.mu != "auto") req.mu.value = to_double("--mu", o.mu);
  req.mu.use_pencil = o.mu_pencil;
  if (o.nonlinear) req.model = ToyNonlinear{*o.nonlinear};

  req.config.scheme = o.scheme == "kraus1" ? Scheme::Kraus1 : o.scheme == "kraus2" ? Scheme::Kraus2 : Scheme::RK4;
  req.config.beta_final = o.beta;
  req.config.delta_beta = o.dbeta;
  req.config.record_every = o.record_every;
  req.config.positivity_tol = o.positivity_tol;
  req.config.hermiticity_tol = o.hermiticity_tol;
  req.config.refresh_per_stage = o.per_stage;
  if (command == "oracle" || command == "convergence") {
    if (!(o.beta >= 0.0)) throw CLI::ValidationError("--beta", "must be non-negative");
  } else {
    try {
      req.config.validate();
    } catch (const SolverAbort& e) {
      throw CLI::ValidationError("--beta/--dbeta/--record-every", e.what());
    }
  }
  req.scf.tol = o.scf_tol;
  req.scf.max_iter = o.scf_max_iter;
  req.scf.use_aitken = o.aitken;
  req.output_path = o.out.empty() ? std::filesystem::path("fermicool_" + command + ".csv") : std::filesystem::path(o.out);
  req.emit_oracle = o.emit_oracle;
  req.emit_mu_trace = o.mu_trace;
  req.dbeta_list = o.dbeta_list;
  return req;
}

void report(std::ostream& err, int code, const char* kind, const std::string& message) {
  std::string flat = message;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  std::replace(flat.begin(), flat.end(), '"', '\'');
  err << "error: code=" << code << " kind=" << kind << " message=\"" << flat << "\"\n";
}

}  // namespace

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fermicool: finite-temperature Fermi-Dirac density matrices by positivity-preserving cooling"};
  app.name("fermicool");
  app.footer(
      "Exit codes: 0 success, 2 argument error, 3 input parse error (including a non-SPD overlap), "
      "4 infeasible ensemble, 5 solver abort, 6 SCF non-convergence, 7 output write failure.");
  app.require_subcommand(1);
  RawOptions opts;
  auto* run = app.add_subcommand("run", "cool from beta = 0 and compare with the exact oracle");
  auto* oracle = app.add_subcommand("oracle", "evaluate the exact Fermi-Dirac density (SCF for --nonlinear)");
  auto* conv = app.add_subcommand("convergence", "Richardson order study over --dbeta-list");
  for (auto* cmd : {run, oracle, conv}) add_common_options(cmd, opts);
  conv->add_option("--dbeta-list", opts.dbeta_list, "halving step sizes")->delimiter(',')->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    report(err, kArgumentError, "argument", e.what());
    return kArgumentError;
  }

  const std::string command = run->parsed() ? "run" : oracle->parsed() ? "oracle" : "convergence";
  try {
    const RunRequest req = to_request(opts, command);
    if (command == "run") return cmd_run(req, out, err);
    if (command == "oracle") return cmd_oracle(req, out, err);
    return cmd_convergence(req, out, err);
  } catch (const CLI::ParseError& e) {
    report(err, kArgumentError, "argument", e.what());
    return kArgumentError;
  } catch (const ParseError& e) {
    report(err, kParseError, "parse", e.what());
    return kParseError;
  } catch (const NotPositiveDefinite& e) {
    report(err, kParseError, "not-positive-definite", e.what());
    return kParseError;
  } catch (const DimensionMismatch& e) {
    report(err, kParseError, "dimension", e.what());
    return kParseError;
  } catch (const InfeasibleEnsemble& e) {
    report(err, kInfeasibleEnsemble, "infeasible-ensemble", e.what());
    return kInfeasibleEnsemble;
  } catch (const ScfNotConverged& e) {
    report(err, kScfNotConverged, "scf-not-converged", e.what());
    return kScfNotConverged;
  } catch (const SolverAbort& e) {
    report(err, kSolverAbort, "solver-abort", e.what());
    return kSolverAbort;
  } catch (const std::ios_base::failure& e) {
    report(err, kOutputError, "io", e.what());
    return kOutputError;
  } catch (const Error& e) {
    // Unreadable input files.
    report(err, kParseError, "input", e.what());
    return kParseError;
  }
}

}  // namespace fermicool::cli
