#include "../tools/cli.hpp"
#include "fermicool/matrix_io.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace fermicool;
using fermicool::cli::main_entry;

namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = main_entry(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fermicool_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string data(const char* name) { return (fermicool::testing::data_dir() / name).string(); }

}  // namespace

TEST_CASE("sibling_path") {
  CHECK(cli::sibling_path("out/ring.csv", "meta") == fs::path("out/ring.meta"));
  CHECK(cli::sibling_path("ring", "mu.csv") == fs::path("ring.mu.csv"));
}

TEST_CASE("help documents the exit codes") {
  const Result r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("6 SCF non-convergence") != std::string::npos);
}

TEST_CASE("run: Hückel grand canonical at low temperature") {
  const fs::path out = scratch("huckel_grand.csv");
  const Result r = run({"run", "--huckel", "50", "0.569", "0.066", "--grand", "--mu", "auto", "--scheme", "rk4",
                        "--beta", "300", "--dbeta", "0.03", "--record-every", "1000", "--out", out.string()});
  REQUIRE(r.code == 0);
  const auto rows = read_csv(out);
  REQUIRE(rows.size() == 51);
  CHECK(rows[0] == std::vector<std::string>{"index", "dmm_eigenvalue", "exact_eigenvalue", "abs_error"});
  double worst = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) worst = std::max(worst, std::stod(rows[i][3]));
  CHECK(worst <= 1e-4);

  const auto diag = read_csv(cli::sibling_path(out, "diagnostics.csv"));
  CHECK(diag[0] == std::vector<std::string>{"beta", "min_eig", "hermiticity_defect", "trace", "commutator_norm"});
  CHECK(std::stod(diag.back()[0]) == 300.0);
  CHECK(fs::exists(cli::sibling_path(out, "meta")));
  CHECK(slurp(out).find("generated_utc") == std::string::npos);
}

TEST_CASE("run: canonical trace and mu trace") {
  const fs::path out = scratch("huckel_canonical.csv");
  const Result r = run({"run", "--huckel", "20", "0.569", "0.066", "--canonical", "10", "--beta", "50", "--dbeta",
                        "0.05", "--record-every", "100", "--mu-trace", "--out", out.string()});
  REQUIRE(r.code == 0);
  const auto diag = read_csv(cli::sibling_path(out, "diagnostics.csv"));
  for (std::size_t i = 1; i < diag.size(); ++i) CHECK(std::abs(std::stod(diag[i][3]) - 10.0) <= 1e-6);
  const auto mu = read_csv(cli::sibling_path(out, "mu.csv"));
  CHECK(mu[0] == std::vector<std::string>{"beta", "mu_integrated", "mu_oracle"});
  for (std::size_t i = 1; i < mu.size(); ++i) CHECK(std::abs(std::stod(mu[i][1]) - std::stod(mu[i][2])) < 1e-3);
}

TEST_CASE("run is deterministic") {
  const fs::path a = scratch("det_a.csv"), b = scratch("det_b.csv");
  for (const auto& p : {a, b}) {
    REQUIRE(run({"run", "--files", data("h2o_sto3g_hcore.mat"), data("h2o_sto3g_overlap.mat"), "--grand", "--beta",
                 "1", "--dbeta", "0.01", "--scheme", "kraus2", "--out", p.string()})
                .code == 0);
  }
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(cli::sibling_path(a, "diagnostics.csv")) == slurp(cli::sibling_path(b, "diagnostics.csv")));
}

TEST_CASE("run: shipped non-orthogonal fixtures") {
  const fs::path out = scratch("hf_grand.csv");
  const Result r = run({"run", "--files", data("hf_631g_hcore.mat"), data("hf_631g_overlap.mat"), "--grand", "--mu",
                        "auto", "--beta", "3", "--dbeta", "0.003", "--record-every", "100", "--emit-oracle", "--out",
                        out.string()});
  REQUIRE(r.code == 0);
  const Matrix oracle = read_dense_matrix(cli::sibling_path(out, "oracle.mat"));
  CHECK(oracle.rows() == 11);
}

TEST_CASE("oracle command") {
  SUBCASE("beta = 0 gives half occupation") {
    const fs::path out = scratch("oracle0.csv");
    REQUIRE(run({"oracle", "--huckel", "50", "0.569", "0.066", "--grand", "--beta", "0", "--out", out.string()})
                .code == 0);
    const auto rows = read_csv(out);
    CHECK(rows[0] == std::vector<std::string>{"index", "exact_eigenvalue"});
    REQUIRE(rows.size() == 51);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][1]) == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("two-level fixture") {
    const fs::path out = scratch("oracle2.csv");
    REQUIRE(run({"oracle", "--files", data("two_level.mat"), "--grand", "--mu", "0.5", "--beta", "2", "--out",
                 out.string()})
                .code == 0);
    const auto rows = read_csv(out);
    CHECK(std::stod(rows[1][1]) == doctest::Approx(0.268941).epsilon(1e-5));
    CHECK(std::stod(rows[2][1]) == doctest::Approx(0.731059).epsilon(1e-5));
  }
  SUBCASE("SCF with and without Aitken") {
    const fs::path a = scratch("scf_a.csv"), b = scratch("scf_b.csv");
    const Result ra = run({"oracle", "--huckel", "6", "0.569", "0.066", "--grand", "--beta", "1", "--nonlinear", "0.1",
                           "--aitken", "--out", a.string()});
    const Result rb = run({"oracle", "--huckel", "6", "0.569", "0.066", "--grand", "--beta", "1", "--nonlinear", "0.1",
                           "--no-aitken", "--out", b.string()});
    REQUIRE(ra.code == 0);
    REQUIRE(rb.code == 0);
    CHECK(ra.out.find("aitken=on") != std::string::npos);
    CHECK(rb.out.find("aitken=off") != std::string::npos);
    CHECK(ra.out.find("scf_iterations=") != std::string::npos);
    const auto x = read_csv(a), y = read_csv(b);
    for (std::size_t i = 1; i < x.size(); ++i) CHECK(std::abs(std::stod(x[i][1]) - std::stod(y[i][1])) < 1e-9);
  }
}

TEST_CASE("convergence command") {
  const fs::path out = scratch("conv.csv");
  const Result r = run({"convergence", "--huckel", "6", "0.569", "0.066", "--grand", "--mu", "0.6", "--scheme",
                        "kraus2", "--beta", "1", "--dbeta-list", "0.1,0.05,0.025", "--out", out.string()});
  REQUIRE(r.code == 0);
  const auto rows = read_csv(out);
  CHECK(rows[0] == std::vector<std::string>{"dbeta", "global_error", "observed_order"});
  REQUIRE(rows.size() == 4);
  CHECK(std::stod(rows[3][2]) == doctest::Approx(2.0).epsilon(0.1));

  CHECK(run({"convergence", "--huckel", "6", "0", "1", "--grand", "--dbeta-list", "0.1,0.05", "--out", out.string()})
            .code == cli::kArgumentError);
  CHECK(run({"convergence", "--huckel", "6", "0", "1", "--grand", "--dbeta-list", "0.1,0.04,0.02", "--out",
             out.string()})
            .code == cli::kArgumentError);
}

TEST_CASE("exit codes") {
  const std::string out = scratch("codes.csv").string();
  SUBCASE("argument errors") {
    CHECK(run({}).code == cli::kArgumentError);
    CHECK(run({"run", "--grand"}).code == cli::kArgumentError);
    CHECK(run({"run", "--huckel", "6", "0", "1"}).code == cli::kArgumentError);
    CHECK(run({"run", "--huckel", "6", "0", "1", "--grand", "--canonical", "3"}).code == cli::kArgumentError);
    CHECK(run({"run", "--huckel", "6", "0", "1", "--grand", "--scheme", "euler"}).code == cli::kArgumentError);
    const Result r = run({"run", "--huckel", "6", "0", "1", "--grand", "--beta", "0", "--out", out});
    CHECK(r.code == cli::kArgumentError);
  }
  SUBCASE("parse errors") {
    const fs::path bad = scratch("bad.mat");
    std::ofstream(bad) << "2 2\n1 0\n0 x\n";
    const Result r = run({"run", "--files", bad.string(), "--grand", "--out", out});
    CHECK(r.code == cli::kParseError);
    CHECK(r.err.rfind("error: code=3 kind=parse message=\"", 0) == 0);
    CHECK(r.err.find(":3:") != std::string::npos);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

    const fs::path neg = scratch("neg_s.mat");
    std::ofstream(neg) << "2 2\n1 0\n0 -0.1\n";
    CHECK(run({"run", "--files", data("two_level.mat"), neg.string(), "--grand", "--out", out}).code ==
          cli::kParseError);
    CHECK(run({"run", "--files", "/nonexistent.mat", "--grand", "--out", out}).code == cli::kParseError);
  }
  SUBCASE("infeasible ensemble") {
    const Result r = run({"run", "--huckel", "6", "0", "1", "--canonical", "6", "--out", out});
    CHECK(r.code == cli::kInfeasibleEnsemble);
    CHECK(r.err.find("kind=infeasible-ensemble") != std::string::npos);
  }
  SUBCASE("solver abort") {
    CHECK(run({"run", "--huckel", "4", "1000", "1", "--grand", "--mu", "0", "--beta", "50", "--dbeta", "1", "--out",
               out})
              .code == cli::kSolverAbort);
  }
  SUBCASE("SCF non-convergence") {
    CHECK(run({"oracle", "--huckel", "6", "0.569", "0.066", "--grand", "--beta", "1", "--nonlinear", "0.1",
               "--scf-max-iter", "2", "--scf-tol", "1e-14", "--out", out})
              .code == cli::kScfNotConverged);
  }
  SUBCASE("unwritable output") {
    const fs::path blocker = scratch("not_a_dir");
    std::ofstream(blocker) << "x";
    const Result r =
        run({"oracle", "--huckel", "6", "0", "1", "--grand", "--beta", "1", "--out", (blocker / "x.csv").string()});
    CHECK(r.code == cli::kOutputError);
    CHECK(r.err.find("kind=io") != std::string::npos);
  }
}
