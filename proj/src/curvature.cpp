#include "wyflow/curvature.hpp"

#include <cmath>
#include <string>

namespace wyflow {

namespace {

void require_positive(const Eigen::ArrayXd& w, const char* what) {
  require_finite(w, what);
  if (!(w > 0.0).all()) throw DomainError(std::string(what) + " must be strictly positive");
}

void require_phi_admissible(const Geometry& geom, const Field& phi) {
  if (geom.m() == 0.0 && !phi.is_identically_zero()) {
    throw InvalidConfiguration("weight phi must vanish identically when m = 0");
  }
}

}  // namespace

Background make_background(const GeometryPtr& geometry, const Field& phi0) {
  require_same_grid(*geometry, phi0, "phi0");
  require_phi_admissible(*geometry, phi0);
  Field curvature = weighted_scalar_curvature_direct(*geometry, phi0, geometry->background_scalar_curvature());
  return Background{geometry, phi0, std::move(curvature)};
}

Background make_background(const GeometryPtr& geometry) { return make_background(geometry, Field::zero(geometry)); }

ConformalData make_conformal_data(const Background& background, const Field& w) {
  const Geometry& geom = background.geom();
  require_same_grid(geom, w, "w");
  require_positive(w.values(), "conformal factor w");
  Eigen::ArrayXd phi = background.phi0.values();
  if (geom.m() > 0.0) phi -= geom.exponents().weight * w.values().log();
  return ConformalData{background.phi0, background.curvature, w, w.with_values(std::move(phi))};
}

Field weighted_scalar_curvature_direct(const Geometry& geom, const Field& phi, double R_background) {
  require_same_grid(geom, phi, "phi");
  require_phi_admissible(geom, phi);
  if (geom.m() == 0.0) return Field::constant(phi.geometry_ptr(), R_background);
  const double m = geom.m();
  Eigen::ArrayXd R = R_background + 2.0 * laplacian(geom, phi).values() -
                     ((m + 1.0) / m) * gradient_norm_sq(geom, phi).values();
  return phi.with_values(std::move(R));
}

Field weighted_scalar_curvature_conformal_metric(const Geometry& geom, const Field& log_factor, const Field& phi) {
  require_same_grid(geom, log_factor, "log_factor");
  require_same_grid(geom, phi, "phi");
  require_phi_admissible(geom, phi);
  const double n = geom.n();
  const double m = geom.m();
  const auto& f = log_factor;
  // Scalar curvature of e^{2f} g0, before the e^{-2f} factor.
  Eigen::ArrayXd bracket = geom.background_scalar_curvature() - 2.0 * (n - 1.0) * laplacian(geom, f).values() -
                           (n - 2.0) * (n - 1.0) * gradient_norm_sq(geom, f).values();
  if (m > 0.0) {
    bracket += 2.0 * (laplacian(geom, phi).values() + (n - 2.0) * gradient_dot(geom, f, phi).values());
    bracket -= ((m + 1.0) / m) * gradient_norm_sq(geom, phi).values();
  }
  return phi.with_values((-2.0 * f.values()).exp() * bracket);
}

Field conformal_laplacian_apply(const Geometry& geom, const Field& phi0, const Field& R_phi0, const Field& u) {
  require_same_grid(geom, R_phi0, "R_phi0");
  Field lap = weighted_laplacian(geom, phi0, u);
  return u.with_values(-lap.values() + geom.exponents().coupling * R_phi0.values() * u.values());
}

Field curvature_via_conformal_law(const Geometry& geom, const ConformalData& data) {
  require_positive(data.w.values(), "conformal factor w");
  const auto& ex = geom.exponents();
  Field Lw = conformal_laplacian_apply(geom, data.phi0, data.R_phi0, data.w);
  return data.w.with_values(ex.laplacian_coefficient * data.w.values().pow(-ex.conformal_law) * Lw.values());
}

double mean_weighted_curvature(const Geometry& geom, const ConformalData& data) {
  Field R = curvature_via_conformal_law(geom, data);
  const Eigen::ArrayXd mass = data.w.values().pow(geom.exponents().volume) * (-data.phi0.values()).exp() *
                              geom.measure_weight();
  return (R.values() * mass).sum() / mass.sum();
}

double energy(const Geometry& geom, const ConformalData& data) {
  require_positive(data.w.values(), "conformal factor w");
  const auto& ex = geom.exponents();
  Field Lw = conformal_laplacian_apply(geom, data.phi0, data.R_phi0, data.w);
  const Eigen::ArrayXd e = (-data.phi0.values()).exp() * geom.measure_weight();
  const double numerator = ex.laplacian_coefficient * (Lw.values() * data.w.values() * e).sum();
  const double volume = (data.w.values().pow(ex.volume) * e).sum();
  return numerator / std::pow(volume, (ex.total_dim - 2.0) / ex.total_dim);
}

double yamabe_quotient_estimate(const Geometry& geom, const Field& phi0, const Field& R_phi0,
                                std::span<const Field> trial_ws) {
  if (trial_ws.empty()) throw DomainError("yamabe quotient estimate needs at least one trial factor");
  double best = 0.0;
  bool first = true;
  for (const Field& w : trial_ws) {
    require_positive(w.values(), "trial factor");
    ConformalData data{phi0, R_phi0, w, phi0};
    const double e = energy(geom, data);
    if (first || e < best) best = e;
    first = false;
  }
  return best;
}

CurvatureEvaluator::CurvatureEvaluator(const Background& background)
    : background_(background), stencil_(background.geom(), background.phi0.values()) {}

Eigen::ArrayXd CurvatureEvaluator::conformal_laplacian(const Eigen::ArrayXd& u) const {
  return -stencil_.apply(u) + exponents().coupling * background_.curvature.values() * u;
}

void CurvatureEvaluator::evaluate(const Eigen::ArrayXd& w, Evaluation& out) const {
  const auto& ex = exponents();
  // One pow per node: s = w^{4/(N-2)}, w^{-(N+2)/(N-2)} = 1/(s w), w^{2N/(N-2)} = s w^2.
  const Eigen::ArrayXd s = w.pow(ex.metric);
  stencil_.apply(w, out.curvature);
  out.curvature = ex.laplacian_coefficient *
                  (-out.curvature + ex.coupling * background_.curvature.values() * w) / (s * w);
  out.density = s * w.square() * stencil_.density();
  out.volume = out.density.sum();
  out.mean = (out.curvature * out.density).sum() / out.volume;
}

CurvatureEvaluator::Evaluation CurvatureEvaluator::evaluate(const Eigen::ArrayXd& w) const {
  Evaluation e;
  evaluate(w, e);
  return e;
}

Eigen::ArrayXd CurvatureEvaluator::stationary_residual(const Eigen::ArrayXd& w, double r) const {
  const auto& ex = exponents();
  return ex.laplacian_coefficient * stencil_.apply(w) - background_.curvature.values() * w +
         r * w.pow(ex.conformal_law);
}

double CurvatureEvaluator::energy(const Eigen::ArrayXd& w) const {
  const auto& ex = exponents();
  const double numerator = ex.laplacian_coefficient * (conformal_laplacian(w) * w * stencil_.density()).sum();
  return numerator / std::pow(volume(w), (ex.total_dim - 2.0) / ex.total_dim);
}

double CurvatureEvaluator::volume(const Eigen::ArrayXd& w) const {
  return (w.pow(exponents().volume) * stencil_.density()).sum();
}

}  // namespace wyflow
