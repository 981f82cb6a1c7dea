#include "wyflow/commands.hpp"

#include <cmath>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "wyflow/io.hpp"

namespace wyflow {

using nlohmann::json;

namespace {

Background build_background(const RunConfig& config, const GeometryPtr& geom) {
  return make_background(geom, build_field(config.phi0, geom, config.seed, 0));
}

std::filesystem::path output_path(const CommandOptions& options, const std::string& name) {
  return options.out_dir / name;
}

json to_json_array(const std::vector<double>& v) { return json(v); }

}  // namespace

int cmd_run(const RunConfig& config, const CommandOptions& options, std::ostream& log) {
  const GeometryPtr geom = build_geometry(config);
  const Background bg = build_background(config, geom);
  const Field w0 = build_field(config.w0, geom, config.seed, 1);
  std::filesystem::create_directories(options.out_dir);

  FlowEngine engine(bg, FlowOptions{.diagnostics_stride = config.time.diagnostics_stride});
  TrajectoryRecorder recorder;
  CsvSink sink(output_path(options, config.output.diagnostics), &recorder);
  RunResult result = engine.run(engine.initialize(w0), config.time.t_end, config.time.stop_tol, sink, config.time.dt_max);
  recorder.finish(result.state);

  const FlowState& s = result.state;
  write_snapshot(output_path(options, config.output.snapshot),
                 Snapshot{.config = config,
                          .step = s.step,
                          .t = s.t,
                          .r = s.r,
                          .termination = to_string(result.reason),
                          .w = std::vector<double>(s.w.values().begin(), s.w.values().end())});
  write_trajectory(output_path(options, config.output.trajectory), config, recorder.samples, recorder.history);
  if (!options.quiet) {
    log << to_string(result.reason) << " after " << s.step << " steps, t = " << format_double(s.t)
        << ", r = " << format_double(s.r)
        << ", sup|R - r| = " << format_double((s.curvature - s.r).abs().maxCoeff()) << '\n';
  }
  return result.reason == Termination::Converged ? kExitOk : kExitTimeOut;
}

int cmd_spectrum(const std::optional<RunConfig>& config, const std::filesystem::path& snapshot_path,
                 const CommandOptions& options, std::ostream& log) {
  const Snapshot snap = read_snapshot(snapshot_path);
  const RunConfig cfg = config ? *config : snap.config;
  const GeometryPtr geom = build_geometry(cfg);
  if (static_cast<Eigen::Index>(snap.w.size()) != geom->size()) {
    throw GeometryMismatch("snapshot has " + std::to_string(snap.w.size()) + " values but the grid has " +
                           std::to_string(geom->size()));
  }
  const Background bg = build_background(cfg, geom);
  const Field w(geom, Eigen::Map<const Eigen::ArrayXd>(snap.w.data(), geom->size()));

  const LimitProfile limit =
      solve_limit_profile(bg, w, snap.r, NewtonOptions{.tolerance = cfg.spectral.newton_tol, .max_iterations = 50});
  const int count = static_cast<int>(std::min<Eigen::Index>(cfg.spectral.eigen_count, geom->size()));
  const SpectralBasis basis = build_spectral_basis(bg, limit.w, limit.r_inf, count);

  // Unit scale: the factor that turns eigenvalues at the unit-volume limit into
  // eigenvalues at the volume of the background measure (where w = 1 on S^n).
  const auto& ex = geom->exponents();
  const double background_volume = DivergenceStencil(*geom, bg.phi0.values()).density().sum();
  const double unit_scale = std::pow(background_volume, -2.0 / ex.total_dim);

  json report;
  report["r_inf"] = limit.r_inf;
  report["threshold"] = basis.threshold;
  report["eigenvalues"] = to_json_array(basis.eigenvalues);
  std::vector<double> scaled;
  for (double l : basis.eigenvalues) scaled.push_back(l * unit_scale);
  report["background_scale"] = {{"factor", unit_scale}, {"r_inf", limit.r_inf * unit_scale}, {"eigenvalues", scaled}};
  if (limit.r_inf != 0.0) {
    std::vector<double> ratio;
    for (double l : basis.eigenvalues) ratio.push_back(l / limit.r_inf);
    report["eigenvalues_over_r_inf"] = ratio;
  } else {
    report["eigenvalues_over_r_inf"] = nullptr;
  }
  report["A"] = basis.low_modes;
  double worst_residual = 0.0;
  for (std::size_t a = 0; a < basis.eigenvalues.size(); ++a) {
    worst_residual = std::max(worst_residual, basis.eigen_residual(a) / (1.0 + std::abs(basis.eigenvalues[a])));
  }
  report["gram_defect"] = basis.gram_defect();
  report["eigen_residual_relative"] = worst_residual;
  report["newton"] = {{"iterations", limit.iterations},
                      {"residual", limit.residual},
                      {"distance_to_snapshot", (limit.w.values() - w.values()).abs().maxCoeff()}};

  std::filesystem::create_directories(options.out_dir);
  const auto path = output_path(options, cfg.output.report);
  write_text_file(path, report.dump(2) + "\n");
  if (!options.quiet) {
    log << "r_inf = " << format_double(limit.r_inf) << ", |A| = " << basis.low_modes.size() << ", lowest eigenvalues:";
    for (std::size_t a = 0; a < std::min<std::size_t>(4, basis.eigenvalues.size()); ++a) {
      log << ' ' << format_double(basis.eigenvalues[a]);
    }
    log << "\nreport: " << path.string() << '\n';
  }
  return kExitOk;
}

int cmd_lojasiewicz(const std::filesystem::path& trajectory_path, const std::filesystem::path& report_path,
                    const CommandOptions& options, std::ostream& log) {
  const TrajectoryFile traj = read_trajectory(trajectory_path);
  json report;
  try {
    report = json::parse(read_text_file(report_path));
  } catch (const json::exception& e) {
    throw IoError(report_path.string() + ": " + e.what());
  }
  if (!report.contains("r_inf") || !report["r_inf"].is_number()) throw IoError(report_path.string() + ": missing r_inf");
  const double r_inf = report["r_inf"].get<double>();

  const GeometryPtr geom = build_geometry(traj.config);
  const Background bg = build_background(traj.config, geom);
  std::vector<TrajectorySample> samples;
  for (std::size_t i = 0; i < traj.w.size(); ++i) {
    if (static_cast<Eigen::Index>(traj.w[i].size()) != geom->size()) {
      throw GeometryMismatch("trajectory sample " + std::to_string(i) + " does not match the grid");
    }
    samples.push_back({traj.t[i], Field(geom, Eigen::Map<const Eigen::ArrayXd>(traj.w[i].data(), geom->size())), traj.r[i]});
  }
  const LojasiewiczFit fit =
      lojasiewicz_check(bg, r_inf, samples, static_cast<std::size_t>(traj.config.spectral.lojasiewicz_window));
  report["gamma_fit"] = fit.gamma;
  report["C_fit"] = fit.C;
  report["worst_violation"] = fit.worst_violation;
  report["lojasiewicz"] = {{"slope", fit.slope}, {"clamped", fit.clamped}, {"samples_used", fit.samples_used}};

  std::vector<DiagnosticsRow> history;
  for (const auto& [t, r] : traj.history) history.push_back(DiagnosticsRow{.t = t, .r = r});
  try {
    const DecayFit decay = decay_rate_fit(history, r_inf);
    report["decay_exponent"] = decay.exponent;
    report["decay"] = {{"gamma", decay.gamma},
                       {"exponential", decay.exponential},
                       {"exponential_rate", decay.exponential_rate},
                       {"r2_power", decay.r2_power},
                       {"r2_exponential", decay.r2_exponential},
                       {"rows_used", decay.rows_used}};
  } catch (const InsufficientSignal& e) {
    report["decay_exponent"] = nullptr;
    report["decay"] = {{"error", e.what()}};
  }
  write_text_file(report_path, report.dump(2) + "\n");
  if (!options.quiet) {
    log << "gamma = " << format_double(fit.gamma) << ", C = " << format_double(fit.C)
        << ", worst violation = " << format_double(fit.worst_violation) << (fit.clamped ? " (gamma clamped)" : "")
        << '\n';
  }
  return kExitOk;
}

int cmd_verify(const RunConfig& config, const VerifyOptions& verify, const CommandOptions& options, std::ostream& log) {
  const std::vector<CheckResult> results = run_verification(config, verify);
  std::size_t width = 0;
  for (const auto& r : results) width = std::max(width, r.name.size());
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    if (options.quiet && r.passed) continue;
    log << (r.passed ? "PASS  " : "FAIL  ") << r.name << std::string(width - r.name.size() + 2, ' ') << r.detail << '\n';
  }
  log << (all ? "all checks passed" : "some checks FAILED") << '\n';
  return all ? kExitOk : kExitError;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weighted Yamabe flow laboratory"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = ".";
  bool quiet = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--quiet", quiet, "suppress progress output");

  auto* run = app.add_subcommand("run", "integrate the flow and write diagnostics, snapshot and trajectory");
  auto* spectrum = app.add_subcommand("spectrum", "limit profile and spectral report from a snapshot");
  std::string snapshot_path;
  spectrum->add_option("--snapshot", snapshot_path, "snapshot written by run")->required();
  auto* verify = app.add_subcommand("verify", "run the property suite and print a pass/fail table");
  bool break_stencil = false;
  verify->add_flag("--break-stencil", break_stencil, "negative control: use an asymmetric stencil");
  auto* loj = app.add_subcommand("lojasiewicz", "fit the gradient inequality along a trajectory");
  std::string trajectory_path;
  std::string report_path;
  loj->add_option("--trajectory", trajectory_path, "trajectory written by run")->required();
  loj->add_option("--report", report_path, "spectral report written by spectrum")->required();
  for (auto* sub : {run, spectrum, verify, loj}) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--quiet", quiet, "suppress progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }

  const CommandOptions options{.out_dir = out_dir, .quiet = quiet};
  auto load_config = [&]() -> std::optional<RunConfig> {
    if (config_path.empty()) return std::nullopt;
    return parse_config(read_text_file(config_path));
  };
  try {
    if (run->parsed()) {
      const auto cfg = load_config();
      if (!cfg) throw ConfigError("config: --config is required for run");
      return cmd_run(*cfg, options, out);
    }
    if (spectrum->parsed()) return cmd_spectrum(load_config(), snapshot_path, options, out);
    if (verify->parsed()) {
      const auto cfg = load_config();
      return cmd_verify(cfg ? *cfg : default_config(), VerifyOptions{.break_stencil = break_stencil}, options, out);
    }
    return cmd_lojasiewicz(trajectory_path, report_path, options, out);
  } catch (const InsufficientSignal& e) {
    err << "insufficient signal: " << e.what() << '\n';
    return loj->parsed() ? kExitNoSignal : kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace wyflow
