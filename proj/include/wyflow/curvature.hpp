#pragma once

#include <span>

#include "wyflow/geometry.hpp"

namespace wyflow {

/// Background pair (g0, phi0) together with its weighted scalar curvature R^m_{phi0}.
struct Background {
  GeometryPtr geometry;
  Field phi0;
  Field curvature;

  const Geometry& geom() const { return *geometry; }
};

/// Builds the background; enforces phi0 = 0 when m = 0.
Background make_background(const GeometryPtr& geometry, const Field& phi0);
Background make_background(const GeometryPtr& geometry);

/// A conformal factor w over a background, with the transformed weight
/// phi = phi0 - (2m / (N - 2)) log w.
struct ConformalData {
  Field phi0;
  Field R_phi0;
  Field w;
  Field phi;
};

ConformalData make_conformal_data(const Background& background, const Field& w);

/// R^m_phi = R + 2 Delta phi - ((m+1)/m) |grad phi|^2 on the background metric g0,
/// with R the constant scalar curvature of g0.
Field weighted_scalar_curvature_direct(const Geometry& geom, const Field& phi, double R_background);

/// The same quantity for the metric g = e^{2f} g0, computed from the classical
/// conformal change of R, Delta and |grad|^2 rather than the weighted transformation law.
Field weighted_scalar_curvature_conformal_metric(const Geometry& geom, const Field& log_factor, const Field& phi);

/// L^m_{phi0} u = -Delta_{phi0} u + (N-2)/(4(N-1)) R^m_{phi0} u.
Field conformal_laplacian_apply(const Geometry& geom, const Field& phi0, const Field& R_phi0, const Field& u);

/// R^m_phi = (4(N-1)/(N-2)) w^{-(N+2)/(N-2)} L^m_{phi0} w.
Field curvature_via_conformal_law(const Geometry& geom, const ConformalData& data);

/// Mean of R^m_phi against e^{-phi} dvol_g = w^{2N/(N-2)} e^{-phi0} dvol_g0.
double mean_weighted_curvature(const Geometry& geom, const ConformalData& data);

/// Normalised energy: (4(N-1)/(N-2)) <L w, w> / (int w^{2N/(N-2)})^{(N-2)/N}.
double energy(const Geometry& geom, const ConformalData& data);

/// Minimum energy over the trial factors, an upper bound for the weighted Yamabe invariant.
double yamabe_quotient_estimate(const Geometry& geom, const Field& phi0, const Field& R_phi0,
                                std::span<const Field> trial_ws);

/// Repeated curvature evaluation for one background, used by the flow and the
/// Newton solvers.  Works on raw arrays to avoid per-call validation.
class CurvatureEvaluator {
 public:
  explicit CurvatureEvaluator(const Background& background);

  struct Evaluation {
    Eigen::ArrayXd curvature;  ///< R^m_phi at each node
    Eigen::ArrayXd density;    ///< w^{2N/(N-2)} e^{-phi0} measure, the node mass of e^{-phi} dvol_g
    double volume = 0.0;       ///< sum of density
    double mean = 0.0;         ///< r^m_phi
  };

  void evaluate(const Eigen::ArrayXd& w, Evaluation& out) const;
  Evaluation evaluate(const Eigen::ArrayXd& w) const;

  /// -Delta_{phi0} u + c R^m_{phi0} u.
  Eigen::ArrayXd conformal_laplacian(const Eigen::ArrayXd& u) const;
  /// (4(N-1)/(N-2)) Delta_{phi0} w - R^m_{phi0} w + r w^{(N+2)/(N-2)}.
  Eigen::ArrayXd stationary_residual(const Eigen::ArrayXd& w, double r) const;
  double energy(const Eigen::ArrayXd& w) const;
  double volume(const Eigen::ArrayXd& w) const;

  const DivergenceStencil& stencil() const { return stencil_; }
  const Background& background() const { return background_; }
  const Exponents& exponents() const { return background_.geom().exponents(); }

 private:
  Background background_;
  DivergenceStencil stencil_;
};

}  // namespace wyflow
