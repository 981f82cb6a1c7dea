#include "wyflow/flow.hpp"

#include <algorithm>
#include <cmath>

#include "wyflow/stats.hpp"

namespace wyflow {

std::string to_string(Termination t) { return t == Termination::Converged ? "converged" : "time-out"; }

FlowEngine::FlowEngine(Background background, FlowOptions options)
    : evaluator_(std::move(background)), options_(options) {
  stencil_bound_ = evaluator_.stencil().spectral_radius_bound();
  if (options_.diagnostics_stride < 1) options_.diagnostics_stride = 1;
}

Eigen::ArrayXd FlowEngine::rhs(const Eigen::ArrayXd& w, const CurvatureEvaluator::Evaluation& e) const {
  return -evaluator_.exponents().flow_rate * (e.curvature - e.mean) * w;
}

void FlowEngine::refresh(FlowState& state) const {
  CurvatureEvaluator::Evaluation e;
  evaluator_.evaluate(state.w.values(), e);
  state.curvature = std::move(e.curvature);
  state.density = std::move(e.density);
  state.volume = e.volume;
  state.r = e.mean;
  state.dissipation = ((state.curvature - state.r).square() * state.density).sum();
}

FlowState FlowEngine::initialize(const Field& w0) const {
  const Geometry& geom = background().geom();
  require_same_grid(geom, w0, "w0");
  require_finite(w0.values(), "w0");
  if (!(w0.values() > 0.0).all()) throw DomainError("initial conformal factor must be strictly positive");
  const double B = evaluator_.volume(w0.values());
  FlowState state{.w = w0.with_values(w0.values() * std::pow(B, -1.0 / geom.exponents().volume))};
  refresh(state);
  state.sigma = std::max((1.0 - state.curvature).maxCoeff(), 1.0);
  state.r_infinity_estimate = state.r;
  return state;
}

double FlowEngine::stable_dt(const FlowState& state) const {
  const auto& ex = evaluator_.exponents();
  // Diffusivity of the linearised flow is (N-1) w^{-4/(N-2)}; the factor 4/(N-2)
  // coefficient dominates for N <= 6.  The bound 4 / stencil_bound equals h^2 on a
  // one-dimensional uniform periodic grid.
  const double diffusivity = std::max(ex.laplacian_coefficient, ex.total_dim - 1.0);
  const double wmin = state.w.values().minCoeff();
  return options_.safety * 4.0 * std::pow(wmin, ex.metric) / (diffusivity * stencil_bound_);
}

FlowState FlowEngine::step(const FlowState& state, double dt_max) const {
  double dt = std::min(dt_max, stable_dt(state));
  if (!(dt > 0.0)) throw DomainError("step size must be positive");
  const auto& ex = evaluator_.exponents();
  const Eigen::ArrayXd& w = state.w.values();

  CurvatureEvaluator::Evaluation e0;
  e0.curvature = state.curvature;
  e0.mean = state.r;
  const Eigen::ArrayXd k1 = rhs(w, e0);

  Eigen::ArrayXd next;
  CurvatureEvaluator::Evaluation stage;
  int halvings = 0;
  for (;; ++halvings) {
    if (halvings > options_.max_halvings) {
      throw BlowUp("conformal factor lost positivity at t = " + std::to_string(state.t) + " after " +
                   std::to_string(options_.max_halvings) + " step halvings");
    }
    const Eigen::ArrayXd w1 = w + dt * k1;
    if ((w1 > 0.0).all()) {
      evaluator_.evaluate(w1, stage);
      next = w + 0.5 * dt * (k1 + rhs(w1, stage));
      if ((next > 0.0).all() && next.allFinite()) break;
    }
    dt *= 0.5;
  }

  const double B = evaluator_.volume(next);
  FlowState out{.step = state.step + 1,
                .t = state.t + dt,
                .w = state.w.with_values(next * std::pow(B, -1.0 / ex.volume)),
                .sigma = state.sigma};
  refresh(out);
  out.r_infinity_estimate = out.r;
  out.last_dt = dt;
  out.volume_drift = B - 1.0;
  out.halvings = halvings;
  // The dissipation is averaged over the step ends: the identity is then checked at the
  // step midpoint and the residual is second order in dt.
  out.rate_residual = (out.r - state.r) / dt + ex.flow_rate * (state.dissipation + out.dissipation);
  return out;
}

double FlowEngine::lp_norm_R_minus_r(const FlowState& state, double p) const {
  if (!(p >= 1.0)) throw DomainError("L^p norm needs p >= 1");
  const double integral = ((state.curvature - state.r).abs().pow(p) * state.density).sum();
  return std::pow(integral, 1.0 / p);
}

DiagnosticsRow FlowEngine::diagnostics(const FlowState& state) const {
  const auto& ex = evaluator_.exponents();
  DiagnosticsRow row;
  row.step = state.step;
  row.t = state.t;
  row.dt = state.last_dt;
  row.volume = state.volume;
  row.r = state.r;
  row.dr_dt_residual = state.rate_residual;
  row.min_R = state.curvature.minCoeff();
  row.max_R = state.curvature.maxCoeff();
  row.l1 = lp_norm_R_minus_r(state, 1.0);
  row.l2 = lp_norm_R_minus_r(state, 2.0);
  row.lp_small = lp_norm_R_minus_r(state, ex.curvature_p_small);
  row.lp_big = lp_norm_R_minus_r(state, std::max(std::ceil(0.5 * ex.total_dim), 2.0) + 0.5);
  row.sup_R_minus_r = (state.curvature - state.r).abs().maxCoeff();
  row.energy = evaluator_.energy(state.w.values());
  row.w_min = state.w.min();
  row.w_max = state.w.max();
  row.volume_drift = state.volume_drift;
  row.sigma_margin = row.min_R + state.sigma;
  return row;
}

RunResult FlowEngine::run(FlowState state, double t_end, double stop_tol, DiagnosticsSink& sink,
                          double dt_max) const {
  long last_emitted = state.step;
  sink.consume(diagnostics(state), state);
  Termination reason;
  for (;;) {
    const double sup = (state.curvature - state.r).abs().maxCoeff();
    if (sup < stop_tol) {
      reason = Termination::Converged;
      break;
    }
    if (state.t >= t_end) {
      reason = Termination::TimeOut;
      break;
    }
    state = step(state, std::min(dt_max, t_end - state.t));
    if (state.step % options_.diagnostics_stride == 0) {
      sink.consume(diagnostics(state), state);
      last_emitted = state.step;
    }
  }
  if (last_emitted != state.step) sink.consume(diagnostics(state), state);
  state.r_infinity_estimate = state.r;
  return RunResult{std::move(state), reason};
}

bool max_principle_check(std::span<const DiagnosticsRow> history) {
  if (history.empty()) return false;
  const double floor = std::min(history.front().min_R, 0.0) - 1e-6;
  return std::all_of(history.begin(), history.end(), [floor](const DiagnosticsRow& r) { return r.min_R >= floor; });
}

DecayFit decay_rate_fit(std::span<const DiagnosticsRow> history, double r_inf) {
  std::vector<double> t, gap;
  for (const auto& row : history) {
    const double g = row.r - r_inf;
    if (row.t > 0.0 && g > 1e-13) {
      t.push_back(row.t);
      gap.push_back(g);
    }
  }
  if (t.size() < 10) {
    throw InsufficientSignal("decay fit needs at least 10 rows with r > r_inf, got " + std::to_string(t.size()));
  }
  const std::size_t start = t.size() / 2;
  std::vector<double> log_t, lin_t, log_gap;
  for (std::size_t i = start; i < t.size(); ++i) {
    log_t.push_back(std::log(t[i]));
    lin_t.push_back(t[i]);
    log_gap.push_back(std::log(gap[i]));
  }
  const LinearFit power = least_squares(log_t, log_gap);
  const LinearFit expo = least_squares(lin_t, log_gap);
  DecayFit fit;
  fit.exponent = power.slope;
  fit.gamma = (1.0 + power.slope) / (1.0 - power.slope);
  fit.exponential_rate = -expo.slope;
  fit.r2_power = power.r2;
  fit.r2_exponential = expo.r2;
  fit.exponential = expo.r2 > power.r2;
  fit.rows_used = log_t.size();
  return fit;
}

}  // namespace wyflow
