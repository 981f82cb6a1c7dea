#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Fresh scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("wyflow_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

int wyflow(const std::string& args, const fs::path& dir) {
  const std::string cmd = "cd '" + dir.string() + "' && '" WYFLOW_CLI_PATH "' " + args + " > out.txt 2> err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

double last_column(const std::string& line, int from_end) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  return std::stod(cells.at(cells.size() - 1 - from_end));
}

const char* kHeader =
    "step,t,dt,volume,r,dr_dt_residual,min_R,max_R,l1,l2,lp_small,lp_big,sup_R_minus_r,energy,w_min,w_max";

const char* kStationary = R"({"geometry": {"kind": "sphere", "n": 3, "grid_points": 64}, "m": 1, "w0": 1,
                               "time": {"t_end": 1}})";
const char* kPerturbed = R"({"geometry": {"kind": "sphere", "n": 3, "grid_points": 64}, "m": 1,
                              "w0": {"constant": 0.9, "poly_cos": [0, 0, 0.2]},
                              "time": {"t_end": 10, "diagnostics_stride": 50}})";

}  // namespace

TEST_CASE("run on a stationary state") {
  TempDir dir;
  write(dir.path() / "c.json", kStationary);
  REQUIRE(wyflow("run --config c.json", dir.path()) == 0);
  const auto rows = lines(slurp(dir.path() / "diagnostics.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == kHeader);
  CHECK(rows[1].starts_with("0,0,"));
  const json snap = json::parse(slurp(dir.path() / "snapshot.json"));
  CHECK(snap["termination"] == "converged");
  CHECK(snap["w"].size() == 64);
}

TEST_CASE("run times out at t_end = 0") {
  TempDir dir;
  write(dir.path() / "c.json", R"({"geometry": {"kind": "sphere", "n": 3, "grid_points": 64}, "m": 1,
                                   "w0": {"constant": 1, "poly_cos": [0, 0.1]}, "time": {"t_end": 0}})");
  CHECK(wyflow("run --config c.json", dir.path()) == 2);
  CHECK(json::parse(slurp(dir.path() / "snapshot.json"))["termination"] == "time-out");
}

TEST_CASE("full pipeline on a perturbed sphere") {
  TempDir dir;
  write(dir.path() / "c.json", kPerturbed);
  REQUIRE(wyflow("run --config c.json --out a", dir.path()) == 0);
  const auto rows = lines(slurp(dir.path() / "a/diagnostics.csv"));
  REQUIRE(rows.size() > 2);
  CHECK(last_column(rows.back(), 3) < 1e-6);  // sup_R_minus_r

  REQUIRE(wyflow("run --config c.json --out b", dir.path()) == 0);
  CHECK(slurp(dir.path() / "a/diagnostics.csv") == slurp(dir.path() / "b/diagnostics.csv"));
  CHECK(slurp(dir.path() / "a/snapshot.json") == slurp(dir.path() / "b/snapshot.json"));

  REQUIRE(wyflow("spectrum --snapshot a/snapshot.json --out a", dir.path()) == 0);
  const json report = json::parse(slurp(dir.path() / "a/spectral_report.json"));
  const auto scaled = report["background_scale"]["eigenvalues"];
  const double expected[] = {6.0, 24.0, 54.0};
  for (int l = 0; l < 3; ++l) CHECK(std::abs(scaled[l].get<double>() - expected[l]) <= 3e-2 * expected[l]);
  CHECK(report["A"] == json::array({0}));
  CHECK(report["gram_defect"].get<double>() <= 1e-8);

  REQUIRE(wyflow("lojasiewicz --trajectory a/trajectory.json --report a/spectral_report.json", dir.path()) == 0);
  const json fitted = json::parse(slurp(dir.path() / "a/spectral_report.json"));
  CHECK(fitted["worst_violation"].get<double>() <= 1.05);
  CHECK(fitted["gamma_fit"].get<double>() > 0.0);
  CHECK(fitted["gamma_fit"].get<double>() < 1.0);
  CHECK(fitted.contains("decay_exponent"));
}

TEST_CASE("spectrum on the weighted torus") {
  TempDir dir;
  write(dir.path() / "c.json", R"({"geometry": {"kind": "torus", "n": 3, "grid_points": 32}, "m": 2,
                                   "phi0": {"terms": [{"amplitude": 0.3}]}, "time": {"t_end": 20}})");
  REQUIRE(wyflow("run --config c.json --quiet", dir.path()) == 0);
  CHECK(slurp(dir.path() / "out.txt").empty());
  REQUIRE(wyflow("spectrum --snapshot snapshot.json", dir.path()) == 0);
  const json report = json::parse(slurp(dir.path() / "spectral_report.json"));
  CHECK(report["r_inf"].get<double>() < 0.0);
  CHECK(report["A"].empty());
  CHECK(report["eigenvalues"][0].get<double>() == doctest::Approx(report["r_inf"].get<double>()).epsilon(1e-6));
}

TEST_CASE("error exits") {
  TempDir dir;
  CHECK(wyflow("spectrum --snapshot missing.json", dir.path()) == 1);
  CHECK(slurp(dir.path() / "err.txt").find("missing.json") != std::string::npos);
  write(dir.path() / "bad.json", R"({"geometry": {"kind": "sphere", "n": 2, "grid_points": 64}, "time": {"t_end": 1}})");
  CHECK(wyflow("run --config bad.json", dir.path()) == 1);
  CHECK(slurp(dir.path() / "err.txt").find("config.geometry.n") != std::string::npos);
  CHECK(wyflow("frobnicate", dir.path()) == 1);
  CHECK(wyflow("run", dir.path()) == 1);
  CHECK(wyflow("--help", dir.path()) == 0);
}

TEST_CASE("verify table") {
  TempDir dir;
  CHECK(wyflow("verify", dir.path()) == 0);
  const std::string out = slurp(dir.path() / "out.txt");
  CHECK(out.find("all checks passed") != std::string::npos);
  CHECK(out.find("FAIL") == std::string::npos);
  CHECK(wyflow("verify --break-stencil", dir.path()) == 1);
  CHECK(slurp(dir.path() / "out.txt").find("FAIL") != std::string::npos);
  write(dir.path() / "c.json", R"({"geometry": {"kind": "sphere", "n": 3, "grid_points": 64}, "m": 0,
                                   "w0": {"constant": 0.9, "poly_cos": [0, 0, 0.2]}, "time": {"t_end": 10}})");
  CHECK(wyflow("verify --config c.json", dir.path()) == 0);
}

TEST_CASE("lojasiewicz without signal and on a synthetic file") {
  TempDir dir;
  write(dir.path() / "c.json", kStationary);
  REQUIRE(wyflow("run --config c.json", dir.path()) == 0);
  REQUIRE(wyflow("spectrum --snapshot snapshot.json", dir.path()) == 0);
  CHECK(wyflow("lojasiewicz --trajectory trajectory.json --report spectral_report.json", dir.path()) == 3);

  // w = w_inf (1 + eps cos 2 theta) moves R - r_inf linearly in eps, so gaps 0.3 eps^{1.5}
  // give a log-log slope of 1.5, i.e. gamma = 0.5.
  const json snap = json::parse(slurp(dir.path() / "snapshot.json"));
  const std::vector<double> w_inf = snap["w"].get<std::vector<double>>();
  const double r_inf = json::parse(slurp(dir.path() / "spectral_report.json"))["r_inf"].get<double>();
  json traj = json::parse(slurp(dir.path() / "trajectory.json"));
  json samples = json::array();
  for (int k = 0; k < 25; ++k) {
    const double eps = 0.05 * std::pow(0.8, k);
    std::vector<double> w(w_inf.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double theta = M_PI * (i + 0.5) / w.size();
      w[i] = w_inf[i] * (1.0 + eps * std::cos(2.0 * theta));
    }
    samples.push_back({{"t", 0.1 * k}, {"r", r_inf + 0.3 * std::pow(eps, 1.5)}, {"w", w}});
  }
  traj["samples"] = samples;
  write(dir.path() / "traj2.json", traj.dump());
  REQUIRE(wyflow("lojasiewicz --trajectory traj2.json --report spectral_report.json", dir.path()) == 0);
  const json fit = json::parse(slurp(dir.path() / "spectral_report.json"));
  CHECK(fit["gamma_fit"].get<double>() == doctest::Approx(0.5).epsilon(0.1));
  CHECK_FALSE(fit["lojasiewicz"]["clamped"].get<bool>());
}
