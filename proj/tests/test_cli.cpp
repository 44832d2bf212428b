// Exercises the installed command line binary end to end. The binary path
// arrives through the CSTAR_CLI environment variable set by ctest.
#include <doctest.h>

#include <cstdlib>
#include <random>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cstar/io.hpp"

using namespace cstar;

namespace {

std::string cli() {
  const char* p = std::getenv("CSTAR_CLI");
  REQUIRE(p != nullptr);
  return p;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / ("cstar_cli_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_stable_params(const std::string& path) {
  std::ofstream out(path);
  out << R"({"Psi": [[0.7,0.2],[0.1,0.7]], "Pi": [[0.05,0.05],[0.10,0.05]],
             "B": [[1,2],[-2,1],[3,-2]], "sigma2": 1.0, "intercept": true})";
}

}  // namespace

TEST_CASE("help exists and unknown flags are hard errors") {
  CHECK(run("--help") == 0);
  CHECK(run("fit --help") == 0);
  CHECK(run("fit --panel x.csv --definitely-not-a-flag") != 0);
  CHECK(run("") != 0);  // a subcommand is required
}

TEST_CASE("weights rook emits 48 directed edges for side 4") {
  TempDir dir;
  CHECK(run("weights --kind rook --side 4 --output " + dir.file("w.csv")) == 0);
  std::ifstream in(dir.file("w.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "i,j,w");
  int edges = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++edges;
  CHECK(edges == 48);
}

TEST_CASE("transform then inverse reproduces the shares") {
  TempDir dir;
  const std::string panel = dir.file("panel.csv");
  {
    std::ofstream out(panel);
    out << "region_id,time,part,value\n";
    const double vals[2][3][3] = {{{2, 3, 5}, {1, 1, 8}, {4, 4, 2}}, {{1, 2, 7}, {3, 3, 4}, {5, 1, 4}}};
    for (int t = 0; t < 2; ++t)
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          out << "u" << r << ',' << t + 1 << ",p" << c << ',' << vals[t][r][c] << "\n";
  }
  CHECK(run("transform --input " + panel + " --output " + dir.file("coords.csv")) == 0);
  CHECK(run("transform --inverse --input " + dir.file("coords.csv") + " --output " + dir.file("back.csv")) == 0);

  const LoadedPanel orig = load_panel(panel);
  const LoadedPanel back = load_panel(dir.file("back.csv"));
  CHECK((orig.data.Y0 - back.data.Y0).cwiseAbs().maxCoeff() < 1e-9);
  for (std::size_t t = 0; t < orig.data.Y.size(); ++t)
    CHECK((orig.data.Y[t] - back.data.Y[t]).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("basis choice changes coordinates but not distances") {
  TempDir dir;
  const std::string panel = dir.file("panel.csv");
  {
    std::ofstream out(panel);
    out << "region_id,time,part,value\n";
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.5, 4.0);
    for (int t = 1; t <= 3; ++t)
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) out << "u" << r << ',' << t << ",p" << c << ',' << u(gen) << "\n";
  }
  CHECK(run("transform --basis helmert --input " + panel + " --output " + dir.file("h.csv")) == 0);
  CHECK(run("transform --basis pivot --input " + panel + " --output " + dir.file("p.csv")) == 0);
  const CoordinatePanel h = load_coordinate_panel(dir.file("h.csv"));
  const CoordinatePanel p = load_coordinate_panel(dir.file("p.csv"));
  CHECK((h.coords[0] - p.coords[0]).cwiseAbs().maxCoeff() > 1e-6);  // rotated coordinates
  for (std::size_t t = 0; t < h.coords.size(); ++t)
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) {
        const double dh = (h.coords[t].row(i) - h.coords[t].row(j)).norm();
        const double dp = (p.coords[t].row(i) - p.coords[t].row(j)).norm();
        CHECK(dh == doctest::Approx(dp).epsilon(1e-10));
      }
}

TEST_CASE("simulate -> fit pipeline recovers a stable design") {
  TempDir dir;
  write_stable_params(dir.file("params.json"));
  CHECK(run("simulate --side 4 --T 60 --burnin 50 --seed 5 --params " + dir.file("params.json") +
            " --output " + dir.file("panel.csv") + " --regressors-out " + dir.file("x.csv")) == 0);
  CHECK(run("fit --panel " + dir.file("panel.csv") + " --rook-side 4 --regressors " + dir.file("x.csv") +
            " --intercept --output " + dir.file("fit.csv") + " --json") == 0);
  const std::string fit_text = slurp(dir.file("fit.csv"));
  CHECK(fit_text.find("psi_1_1") != std::string::npos);

  // estimates should be in the neighbourhood of the generating values
  std::istringstream in(fit_text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string block, coef, est;
    std::getline(ss, block, ',');
    std::getline(ss, coef, ',');
    std::getline(ss, est, ',');
    if (coef == "psi_1_1") CHECK(std::abs(parse_double(est) - 0.7) < 0.2);
    if (coef == "pi_2_1") CHECK(std::abs(parse_double(est) - 0.10) < 0.1);
    if (coef == "beta_1_1") CHECK(std::abs(parse_double(est) - (-2.0)) < 0.3);
  }
}

TEST_CASE("simulate with sigma2 0 refits to machine-zero residual variance") {
  TempDir dir;
  write_stable_params(dir.file("params.json"));
  CHECK(run("simulate --side 3 --T 30 --burnin 20 --seed 2 --sigma2 0 --params " + dir.file("params.json") +
            " --output " + dir.file("panel.csv") + " --regressors-out " + dir.file("x.csv")) == 0);
  CHECK(run("fit --panel " + dir.file("panel.csv") + " --rook-side 3 --regressors " + dir.file("x.csv") +
            " --intercept --output " + dir.file("fit.csv")) == 0);
  std::istringstream in(slurp(dir.file("fit.csv")));
  std::string line;
  bool seen = false;
  while (std::getline(in, line)) {
    if (line.rfind("sigma,", 0) != 0) continue;
    std::istringstream ss(line);
    std::string block, coef, est;
    std::getline(ss, block, ',');
    std::getline(ss, coef, ',');
    std::getline(ss, est, ',');
    const double sigma_eps = parse_double(est);
    // total refit RSS = sigma2 * T * n * p
    CHECK(sigma_eps * sigma_eps * 30 * 9 * 2 < 1e-12);
    seen = true;
  }
  CHECK(seen);
}

TEST_CASE("psi-zero restriction zeroes the psi block") {
  TempDir dir;
  write_stable_params(dir.file("params.json"));
  CHECK(run("simulate --side 3 --T 40 --burnin 30 --seed 6 --params " + dir.file("params.json") +
            " --output " + dir.file("panel.csv") + " --regressors-out " + dir.file("x.csv")) == 0);
  CHECK(run("fit --panel " + dir.file("panel.csv") + " --rook-side 3 --regressors " + dir.file("x.csv") +
            " --intercept --psi-zero --output " + dir.file("fit.csv")) == 0);
  std::istringstream in(slurp(dir.file("fit.csv")));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.rfind("psi,", 0) != 0) continue;
    std::istringstream ss(line);
    std::string block, coef, est, se;
    std::getline(ss, block, ',');
    std::getline(ss, coef, ',');
    std::getline(ss, est, ',');
    std::getline(ss, se, ',');
    CHECK(parse_double(est) == 0.0);
    CHECK(se.empty());
  }
}

TEST_CASE("identical seeds give identical output bytes") {
  TempDir dir;
  write_stable_params(dir.file("params.json"));
  for (int run_idx = 0; run_idx < 2; ++run_idx) {
    const std::string suffix = std::to_string(run_idx);
    CHECK(run("simulate --side 3 --T 20 --burnin 10 --seed 9 --params " + dir.file("params.json") +
              " --output " + dir.file("panel" + suffix + ".csv") + " --regressors-out " +
              dir.file("x" + suffix + ".csv")) == 0);
  }
  CHECK(slurp(dir.file("panel0.csv")) == slurp(dir.file("panel1.csv")));
  CHECK(slurp(dir.file("x0.csv")) == slurp(dir.file("x1.csv")));
}

TEST_CASE("exit codes follow the error taxonomy") {
  TempDir dir;
  // io error: missing file
  CHECK(run("fit --panel " + dir.file("nope.csv") + " --rook-side 3") == 4);
  // validation error: malformed panel
  {
    std::ofstream out(dir.file("bad.csv"));
    out << "region_id,time,part,value\na,1,x,1\n";  // single part
  }
  CHECK(run("fit --panel " + dir.file("bad.csv") + " --rook-side 3") == 2);
  // validation: bad flag value
  CHECK(run("transform --input x --output y --basis nosuchbasis") == 2);
}

TEST_CASE("mc quick preset on a reduced grid emits the table and manifest") {
  TempDir dir;
  // tiny config to keep the unit suite fast; the full quick preset runs in
  // the acceptance suite
  {
    std::ofstream out(dir.file("cfg.json"));
    out << R"({"grid_sides": [3], "horizons": [8], "replications": 2,
               "Psi": [[0.7,0.2],[0.1,0.7]], "Pi": [[0.05,0.05],[0.10,0.05]],
               "B": [[1,2],[-2,1],[3,-2]], "sigma2": 1.0, "intercept": true})";
  }
  CHECK(run("mc --config " + dir.file("cfg.json") + " --seed 3 --output " + dir.file("study")) == 0);
  const std::string csv = slurp(dir.file("study_rmse.csv"));
  CHECK(csv.find("param_group,param,side,n,T,rmse,bias,n_fail") != std::string::npos);
  CHECK(csv.find("group_avg") != std::string::npos);
  const std::string manifest = slurp(dir.file("study_manifest.json"));
  CHECK(manifest.find("\"seed\": 3") != std::string::npos);
}
