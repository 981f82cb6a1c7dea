#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wyflow/curvature.hpp"

namespace wyflow {

/// One instant of the normalized weighted Yamabe flow in the conformal-factor form.
struct FlowState {
  long step = 0;
  double t = 0.0;
  Field w;
  double r = 0.0;                    ///< current mean weighted curvature
  double sigma = 1.0;                ///< max{sup(1 - R(0)), 1}, so R(t) + sigma >= 1
  double r_infinity_estimate = 0.0;  ///< latest r; r is nonincreasing so this bounds r_inf from above

  Eigen::ArrayXd curvature;  ///< R^m_phi(t)
  Eigen::ArrayXd density;    ///< node mass of e^{-phi} dvol_g
  double volume = 1.0;       ///< sum of density after normalisation

  // Bookkeeping of the step that produced this state.
  double last_dt = 0.0;
  double volume_drift = 0.0;       ///< volume - 1 before renormalisation
  double rate_residual = 0.0;      ///< (r_new - r_old)/dt + ((N-2)/4) (D_old + D_new), D = int (R - r)^2
  double dissipation = 0.0;        ///< int (R - r)^2 e^{-phi} dvol_g at this state
  int halvings = 0;
};

/// Monitored quantities at one time step.  Column names match the CSV schema.
struct DiagnosticsRow {
  long step = 0;
  double t = 0.0;
  double dt = 0.0;
  double volume = 1.0;
  double r = 0.0;
  double dr_dt_residual = 0.0;
  double min_R = 0.0;
  double max_R = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double lp_small = 0.0;  ///< p = 2N/(N+2)
  double lp_big = 0.0;    ///< p = max(ceil(N/2), 2) + 1/2
  double sup_R_minus_r = 0.0;
  double energy = 0.0;
  double w_min = 0.0;
  double w_max = 0.0;
  // Not part of the CSV schema.
  double volume_drift = 0.0;
  double sigma_margin = 0.0;  ///< min_R + sigma
};

/// Receives rows sequentially during a run.  The state is passed so that a consumer
/// can take trajectory snapshots.
class DiagnosticsSink {
 public:
  virtual ~DiagnosticsSink() = default;
  virtual void consume(const DiagnosticsRow& row, const FlowState& state) = 0;
};

class CollectingSink : public DiagnosticsSink {
 public:
  void consume(const DiagnosticsRow& row, const FlowState&) override { rows.push_back(row); }
  std::vector<DiagnosticsRow> rows;
};

class NullSink : public DiagnosticsSink {
 public:
  void consume(const DiagnosticsRow&, const FlowState&) override {}
};

enum class Termination { Converged, TimeOut };
std::string to_string(Termination t);

struct RunResult {
  FlowState state;
  Termination reason = Termination::TimeOut;
};

struct FlowOptions {
  double safety = 0.2;
  int max_halvings = 20;
  long diagnostics_stride = 10;
};

/// Explicit Heun integration of dw/dt = -((N-2)/4)(R - r) w with unit weighted volume.
class FlowEngine {
 public:
  explicit FlowEngine(Background background, FlowOptions options = {});

  /// Rescales w0 to unit weighted volume and caches R(0), r(0), sigma.
  FlowState initialize(const Field& w0) const;

  /// Conservative explicit step bound for the current factor.
  double stable_dt(const FlowState& state) const;

  /// One Heun step of size min(dt_max, stable_dt), halving on loss of positivity.
  FlowState step(const FlowState& state, double dt_max) const;

  /// Steps until sup|R - r| < stop_tol (converged) or t >= t_end (time-out).
  RunResult run(FlowState state, double t_end, double stop_tol, DiagnosticsSink& sink,
                double dt_max = std::numeric_limits<double>::infinity()) const;

  DiagnosticsRow diagnostics(const FlowState& state) const;

  /// (int |R - r|^p e^{-phi} dvol_g)^{1/p}.
  double lp_norm_R_minus_r(const FlowState& state, double p) const;

  const Background& background() const { return evaluator_.background(); }
  const CurvatureEvaluator& evaluator() const { return evaluator_; }
  const FlowOptions& options() const { return options_; }

 private:
  void refresh(FlowState& state) const;
  Eigen::ArrayXd rhs(const Eigen::ArrayXd& w, const CurvatureEvaluator::Evaluation& e) const;

  CurvatureEvaluator evaluator_;
  FlowOptions options_;
  double stencil_bound_ = 0.0;
};

/// inf R(t) >= min{inf R(0), 0} - 1e-6 on every row.
bool max_principle_check(std::span<const DiagnosticsRow> history);

struct DecayFit {
  double exponent = 0.0;          ///< slope of log(r - r_inf) against log t
  double gamma = 0.0;             ///< solves exponent = -(1 - gamma)/(1 + gamma)
  double exponential_rate = 0.0;  ///< minus the slope of log(r - r_inf) against t
  double r2_power = 0.0;
  double r2_exponential = 0.0;
  bool exponential = false;       ///< exponential regression fits better
  std::size_t rows_used = 0;
};

/// Least-squares decay fit over the trailing half of the usable rows.
DecayFit decay_rate_fit(std::span<const DiagnosticsRow> history, double r_inf);

}  // namespace wyflow
