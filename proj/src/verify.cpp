#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <optional>
#include <sstream>
#include <thread>

#include "wyflow/commands.hpp"
#include "wyflow/io.hpp"
#include "wyflow/stats.hpp"

namespace wyflow {

namespace {

using Checks = std::vector<CheckResult>;

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << std::scientific << v;
  return ss.str();
}

void add(Checks& out, std::string name, bool passed, std::string detail) {
  out.push_back({std::move(name), passed, std::move(detail)});
}

/// Smooth seeded random field c + a * (random modes), even about the sphere poles.
Field random_field(const GeometryPtr& geom, std::uint64_t seed, std::uint64_t stream, double c, double a) {
  FieldSpec spec{.constant = c, .random_amplitude = a, .random_modes = 4};
  return build_field(spec, geom, seed, stream);
}

/// Self-adjointness and negativity of the weighted Laplacian.
Checks operator_checks(const RunConfig& config, bool break_stencil) {
  Checks out;
  GeometryPtr geom = build_geometry(config);
  if (break_stencil) geom = geom->with_stencil_defect(1e-3);
  const Field phi0 = build_field(config.phi0, geom, config.seed, 0);
  double worst = 0.0, worst_negativity = -std::numeric_limits<double>::infinity();
  for (std::uint64_t trial = 0; trial < 8; ++trial) {
    const Field u = random_field(geom, config.seed, 100 + 2 * trial, 0.3, 1.0);
    const Field v = random_field(geom, config.seed, 101 + 2 * trial, -0.2, 1.0);
    const double lhs = weighted_inner(*geom, phi0, weighted_laplacian(*geom, phi0, u), v);
    const double rhs = weighted_inner(*geom, phi0, u, weighted_laplacian(*geom, phi0, v));
    const double scale = std::sqrt(weighted_inner(*geom, phi0, u, u) * weighted_inner(*geom, phi0, v, v));
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
    worst_negativity = std::max(worst_negativity, weighted_inner(*geom, phi0, weighted_laplacian(*geom, phi0, u), u));
  }
  add(out, "stencil self-adjointness", worst <= 1e-10, "max relative asymmetry " + fmt(worst) + " (bound 1e-10)");
  add(out, "stencil negativity", worst_negativity <= 1e-12, "max <Lap u, u> " + fmt(worst_negativity));
  return out;
}

/// Agreement of the two curvature code paths on random (w, phi0), order in h.
Checks conformal_law_checks(const RunConfig& config) {
  Checks out;
  const int pairs = 5;
  double worst_order = std::numeric_limits<double>::infinity();
  double worst_fine = 0.0;
  for (int p = 0; p < pairs; ++p) {
    std::vector<double> errors;
    for (int points : {64, 128, 256}) {
      const GeometryPtr geom = config.geometry.kind == ManifoldKind::SphereSym
                                   ? Geometry::sphere(config.geometry.n, config.m, points)
                                   : Geometry::torus(config.geometry.n, config.m, 1, points);
      const Field w = random_field(geom, config.seed, 200 + 2 * p, 1.0, 0.15);
      const Field phi0 = config.m > 0.0 ? random_field(geom, config.seed, 201 + 2 * p, 0.0, 0.3) : Field::zero(geom);
      const Background bg = make_background(geom, phi0);
      const ConformalData data = make_conformal_data(bg, w);
      const Field via_law = curvature_via_conformal_law(*geom, data);
      Eigen::ArrayXd f = (2.0 / (geom->exponents().total_dim - 2.0)) * w.values().log();
      const Field direct = weighted_scalar_curvature_conformal_metric(*geom, w.with_values(std::move(f)), data.phi);
      errors.push_back((via_law.values() - direct.values()).abs().maxCoeff());
    }
    worst_order = std::min({worst_order, observed_order(errors[0], errors[1]), observed_order(errors[1], errors[2])});
    worst_fine = std::max(worst_fine, errors[2]);
  }
  add(out, "conformal-law cross-check", worst_order >= 1.8,
      "min observed order " + fmt(worst_order) + " over N = 64, 128, 256; max error at N = 256 " + fmt(worst_fine));
  return out;
}

/// Flow, limit profile and everything built on the limit.
Checks flow_and_spectral_checks(const RunConfig& config) {
  Checks out;
  const GeometryPtr geom = build_geometry(config);
  const Background bg = make_background(geom, build_field(config.phi0, geom, config.seed, 0));
  const Field w0 = build_field(config.w0, geom, config.seed, 1);
  FlowEngine engine(bg, FlowOptions{.diagnostics_stride = config.time.diagnostics_stride});

  FlowState s = engine.initialize(w0);
  std::vector<DiagnosticsRow> history{engine.diagnostics(s)};
  TrajectoryRecorder recorder;
  recorder.offer(history.back(), s);
  double volume_defect = std::abs(s.volume - 1.0), r_increase = -std::numeric_limits<double>::infinity();
  double rate = 0.0, sigma_defect = std::numeric_limits<double>::infinity(), w_min = s.w.min();
  bool converged = false;
  for (;;) {
    const double sup = (s.curvature - s.r).abs().maxCoeff();
    if (sup < config.time.stop_tol) {
      converged = true;
      break;
    }
    if (s.t >= config.time.t_end) break;
    const double r_old = s.r;
    s = engine.step(s, std::min(config.time.dt_max, config.time.t_end - s.t));
    volume_defect = std::max(volume_defect, std::abs(s.volume - 1.0));
    r_increase = std::max(r_increase, s.r - r_old);
    rate = std::max(rate, std::abs(s.rate_residual));
    sigma_defect = std::min(sigma_defect, (s.curvature + s.sigma).minCoeff() - 1.0);
    w_min = std::min(w_min, s.w.min());
    DiagnosticsRow row;
    row.t = s.t;
    row.r = s.r;
    row.min_R = s.curvature.minCoeff();
    row.sup_R_minus_r = (s.curvature - s.r).abs().maxCoeff();
    history.push_back(row);
    if (s.step % config.time.diagnostics_stride == 0) recorder.offer(engine.diagnostics(s), s);
  }
  recorder.finish(s);
  const long steps = s.step;
  const bool stepped = steps > 0;

  add(out, "volume normalisation", volume_defect <= 1e-12, "max |vol - 1| " + fmt(volume_defect) + " over " +
                                                               std::to_string(steps) + " steps");
  add(out, "monotone r", !stepped || r_increase <= 1e-10, stepped ? "max r increase " + fmt(r_increase) : "no steps taken");
  add(out, "rate identity", !stepped || rate <= 1e-3, stepped ? "max dr/dt residual " + fmt(rate) : "no steps taken");
  add(out, "maximum principle", max_principle_check(history),
      "min_R(0) = " + fmt(history.front().min_R) + ", min over run " +
          fmt(std::min_element(history.begin(), history.end(), [](auto& a, auto& b) { return a.min_R < b.min_R; })->min_R));
  add(out, "sigma shift", !stepped || sigma_defect >= -1e-8, stepped ? "min (R + sigma - 1) " + fmt(sigma_defect) : "no steps taken");
  add(out, "positivity", w_min > 0.0, "min w " + fmt(w_min));
  add(out, "convergence", converged,
      (converged ? "converged" : "time-out") + std::string(" at t = ") + fmt(s.t) + ", r = " + format_double(s.r));
  if (!converged) return out;

  std::optional<LimitProfile> solved;
  try {
    solved = solve_limit_profile(bg, s.w, s.r, NewtonOptions{.tolerance = config.spectral.newton_tol});
  } catch (const Error& e) {
    add(out, "limit profile", false, e.what());
    return out;
  }
  const LimitProfile& limit = *solved;
  const double to_flow = (limit.w.values() - s.w.values()).abs().maxCoeff();
  add(out, "limit profile", limit.residual <= config.spectral.newton_tol,
      "residual " + fmt(limit.residual) + " in " + std::to_string(limit.iterations) +
          " iterations, sup distance to flow limit " + fmt(to_flow));

  {
    FlowState fixed = engine.initialize(limit.w);
    const Eigen::ArrayXd start = fixed.w.values();
    for (int i = 0; i < 1000; ++i) fixed = engine.step(fixed, std::numeric_limits<double>::infinity());
    const double change = (fixed.w.values() - start).abs().maxCoeff();
    add(out, "stationarity", change <= 1e-10, "sup change over 1000 steps from the limit " + fmt(change));
  }

  if (geom->size() > 2048) {
    add(out, "spectral suite", true, "skipped: dense eigensolve limited to 2048 nodes");
    return out;
  }
  const int count = static_cast<int>(std::min<Eigen::Index>(config.spectral.eigen_count, geom->size()));
  std::optional<SpectralBasis> built;
  try {
    built = build_spectral_basis(bg, limit.w, limit.r_inf, count);
  } catch (const Error& e) {
    add(out, "spectral basis", false, e.what());
    return out;
  }
  const SpectralBasis& basis = *built;
  add(out, "orthonormality", basis.gram_defect() <= 1e-8, "Gram defect " + fmt(basis.gram_defect()));
  double worst_res = 0.0;
  for (std::size_t a = 0; a < basis.eigenvalues.size(); ++a) {
    worst_res = std::max(worst_res, basis.eigen_residual(a) / (1e-7 * (1.0 + std::abs(basis.eigenvalues[a]))));
  }
  add(out, "eigen-residual", worst_res <= 1.0, "max residual / (1e-7 (1 + |lambda|)) = " + fmt(worst_res));

  // Analytic spectrum when the limit is the constant factor of a model background.
  if (config.phi0.is_identically_zero() && (limit.w.max() - limit.w.min()) <= 1e-10 * limit.w.max()) {
    const auto& ex = geom->exponents();
    const double scale = std::pow(limit.w.max(), ex.metric);  // eigenvalues at w = 1
    const int n = geom->n();
    const double h = geom->spacing();
    std::vector<double> oracle;
    std::string what;
    double tol = 0.0;
    if (geom->kind() == ManifoldKind::SphereSym) {
      for (int l = 0; l < std::min(4, count); ++l) oracle.push_back(n * (n - 1.0) + ex.laplacian_coefficient * l * (l + n - 1.0));
      tol = 1e-3 * std::pow(256.0 / geom->grid_points(), 2);
      what = "zonal harmonics";
    } else if (geom->active_dims() == 1) {
      oracle.push_back(0.0);
      for (int j = 1; static_cast<int>(oracle.size()) < std::min(5, count); ++j) {
        const double symbol = ex.laplacian_coefficient * 4.0 / (h * h) * std::pow(std::sin(0.5 * j * h), 2);
        oracle.push_back(symbol);
        oracle.push_back(symbol);
      }
      oracle.resize(std::min<std::size_t>(oracle.size(), count));
      tol = 1e-9;
      what = "discrete Fourier symbol";
    }
    if (!oracle.empty()) {
      double worst = 0.0;
      for (std::size_t a = 0; a < oracle.size(); ++a) {
        const double lambda = basis.eigenvalues[a] * scale;
        worst = std::max(worst, std::abs(lambda - oracle[a]) / std::max(1.0, std::abs(oracle[a])));
      }
      add(out, "spectrum oracle", worst <= tol, what + ": max relative error " + fmt(worst) + " (bound " + fmt(tol) + ")");
    }
  }

  // Projection.
  {
    const Field f = random_field(geom, config.seed, 300, 0.5, 1.0);
    const Field pf = project_high_modes(basis, f);
    const double idem = (project_high_modes(basis, pf).values() - pf.values()).abs().maxCoeff();
    double annihilate = 0.0, pairing = 0.0, fixes = 0.0;
    for (std::size_t a = 0; a < basis.eigenfields.size(); ++a) {
      const Field mode = basis.w_inf.with_values(basis.mode_weight * basis.eigenfields[a].values());
      const Field pm = project_high_modes(basis, mode);
      const bool low = std::find(basis.low_modes.begin(), basis.low_modes.end(), static_cast<int>(a)) != basis.low_modes.end();
      const double scale = mode.values().abs().maxCoeff();
      if (low) {
        annihilate = std::max(annihilate, pm.values().abs().maxCoeff() / scale);
        pairing = std::max(pairing, std::abs((pf.values() * basis.eigenfields[a].values() * basis.density).sum()));
      } else {
        fixes = std::max(fixes, (pm.values() - mode.values()).abs().maxCoeff() / scale);
      }
    }
    const bool ok = idem <= 1e-8 && annihilate <= 1e-8 && fixes <= 1e-8 && pairing <= 1e-8;
    add(out, "projection", ok,
        "idempotence " + fmt(idem) + ", A-modes " + fmt(annihilate) + ", high modes " + fmt(fixes) + ", pairing " + fmt(pairing));
  }

  const Eigen::Index nA = static_cast<Eigen::Index>(basis.low_modes.size());
  if (nA == 0) {
    add(out, "Lyapunov-Schmidt", true, "A is empty: the linearisation is coercive, no reduced family");
  } else {
    try {
      const LyapunovSchmidtPoint p0 = solve_lyapunov_schmidt(basis, Eigen::VectorXd::Zero(nA));
      const double base = (p0.w_bar.values() - limit.w.values()).abs().maxCoeff();
      add(out, "Lyapunov-Schmidt base point", base <= 1e-9, "sup |w_0 - w_inf| " + fmt(base));

      const Eigen::Index a = nA - 1;  // the highest low mode; beyond the scaling ray when |A| > 1
      const Eigen::ArrayXd& psi = basis.eigenfields[basis.low_modes[a]].values();
      std::vector<double> dev;
      double moments = 0.0;
      for (double eps : {1e-3, 5e-4}) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(nA);
        z[a] = eps;
        const LyapunovSchmidtPoint p = solve_lyapunov_schmidt(basis, z);
        moments = std::max(moments, p.moment_residual);
        const Eigen::ArrayXd d = p.w_bar.values() - limit.w.values() - eps * psi;
        dev.push_back(std::sqrt((d.square() * basis.density).sum()));
      }
      add(out, "Lyapunov-Schmidt moments", moments <= 1e-9, "max |moment - z| " + fmt(moments));
      if (dev[0] > 1e-12) {
        const double ratio = dev[0] / dev[1];
        add(out, "Lyapunov-Schmidt contact", std::abs(ratio - 4.0) <= 0.5, "quadratic-contact ratio " + fmt(ratio));
      } else {
        add(out, "Lyapunov-Schmidt contact", true, "family is linear to round-off (deviation " + fmt(dev[0]) + ")");
      }

      Eigen::VectorXd z = Eigen::VectorXd::Zero(nA);
      z[a] = 1e-2;
      const EnergyGradientCheck g1 = energy_gradient_check(basis, z, 1e-4);
      const EnergyGradientCheck g2 = energy_gradient_check(basis, z, 5e-5);
      const bool resolved = g1.mismatch > 1e-13;
      const double ratio = resolved ? g1.mismatch / g2.mismatch : 0.0;
      add(out, "energy gradient", g1.mismatch <= 1e-6 && (!resolved || (ratio >= 3.0 && ratio <= 5.0)),
          "mismatch " + fmt(g1.mismatch) + " at eps = 1e-4" +
              (resolved ? ", halving ratio " + fmt(ratio) : std::string(", below resolution")));
    } catch (const Error& e) {
      add(out, "Lyapunov-Schmidt", false, e.what());
    }
  }

  try {
    const LojasiewiczFit fit = lojasiewicz_check(bg, limit.r_inf, recorder.samples,
                                                 static_cast<std::size_t>(config.spectral.lojasiewicz_window));
    add(out, "Lojasiewicz inequality", fit.worst_violation <= 1.05 && fit.gamma > 0.0 && fit.gamma < 1.0,
        "gamma " + fmt(fit.gamma) + (fit.clamped ? " (clamped)" : "") + ", worst violation " + fmt(fit.worst_violation) +
            " over " + std::to_string(fit.samples_used) + " samples");
  } catch (const InsufficientSignal& e) {
    add(out, "Lojasiewicz inequality", true, std::string("skipped: ") + e.what());
  }
  return out;
}

int thread_cap(int requested) {
  int cap = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("WYFLOW_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) cap = std::min(cap, v);
  }
  return cap;
}

}  // namespace

std::vector<CheckResult> run_verification(const RunConfig& config, const VerifyOptions& options) {
  const std::vector<std::function<Checks()>> tasks = {
      [&] { return operator_checks(config, options.break_stencil); },
      [&] { return conformal_law_checks(config); },
      [&] { return flow_and_spectral_checks(config); },
  };
  std::vector<Checks> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < tasks.size();) {
      try {
        results[i] = tasks[i]();
      } catch (const std::exception& e) {
        results[i] = {CheckResult{"task " + std::to_string(i), false, e.what()}};
      }
    }
  };
  const int workers = std::min<int>(thread_cap(options.threads), static_cast<int>(tasks.size()));
  std::vector<std::thread> pool;
  for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<CheckResult> all;
  for (auto& r : results) all.insert(all.end(), r.begin(), r.end());
  return all;
}

}  // namespace wyflow
