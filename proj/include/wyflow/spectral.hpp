#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

#include "wyflow/curvature.hpp"

namespace wyflow {

struct NewtonOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
};

/// Solution of (4(N-1)/(N-2)) Delta_{phi0} w - R^m_{phi0} w + r w^{(N+2)/(N-2)} = 0
/// with unit weighted volume.
struct LimitProfile {
  Field w;
  double r_inf = 0.0;
  int iterations = 0;
  double residual = 0.0;  ///< sup norm of the stationary residual
};

/// Damped Newton on the stationary equation bordered by the volume constraint;
/// r is the extra unknown.  The guess is rescaled to unit volume first.
LimitProfile solve_limit_profile(const Background& background, const Field& w_guess, double r_guess,
                                 NewtonOptions options = {});

/// Eigenpairs of psi -> w^{-4/(N-2)} ((4(N-1)/(N-2)) Delta_{phi0} psi - R^m_{phi0} psi)
/// in the sign convention
///   (4(N-1)/(N-2)) Delta_{phi0} psi_a - R^m_{phi0} psi_a + lambda_a w^{4/(N-2)} psi_a = 0,
/// equivalently lambda_a is the Rayleigh quotient
///   int ((4(N-1)/(N-2)) |grad psi|^2 + R psi^2) e^{-phi0} / int w^{4/(N-2)} psi^2 e^{-phi0}.
struct SpectralBasis {
  Background background;
  Field w_inf;
  double r_inf = 0.0;
  double threshold = 0.0;                ///< ((N+2)/(N-2)) r_inf
  std::vector<double> eigenvalues;       ///< ascending
  std::vector<Field> eigenfields;        ///< orthonormal in int w^{4/(N-2)} psi_a psi_b e^{-phi0}
  std::vector<int> low_modes;            ///< A = {a : lambda_a <= threshold}
  Eigen::ArrayXd mode_weight;            ///< w_inf^{4/(N-2)}
  Eigen::ArrayXd density;                ///< e^{-phi0} measure

  const Geometry& geom() const { return background.geom(); }

  /// max |<psi_a, psi_b>_w - delta_ab| over the returned pairs.
  double gram_defect() const;
  /// Sup-norm eigen-residual of mode a.
  double eigen_residual(std::size_t a) const;
};

SpectralBasis build_spectral_basis(const Background& background, const Field& w_inf, double r_inf, int count);

/// Pi f = f - sum_{a in A} (int psi_a f e^{-phi0}) w_inf^{4/(N-2)} psi_a.
Field project_high_modes(const SpectralBasis& basis, const Field& f);

/// Point w_z of the Lyapunov-Schmidt family: Pi(stationary residual of w_z) = 0 and
/// int w_inf^{4/(N-2)} psi_a (w_z - w_inf) e^{-phi0} = z_a for a in A.
struct LyapunovSchmidtPoint {
  Eigen::VectorXd z;
  Field w_bar;
  Eigen::VectorXd multipliers;
  double newton_residual = 0.0;      ///< sup norm of the bordered system residual
  double projected_residual = 0.0;   ///< weighted L2 norm of Pi(residual)
  double moment_residual = 0.0;      ///< max |moment_a - z_a|
  int iterations = 0;
};

/// Newton radius xi = 0.1 * ||w_inf||_2 (weighted L2).
double lyapunov_schmidt_radius(const SpectralBasis& basis);

LyapunovSchmidtPoint solve_lyapunov_schmidt(const SpectralBasis& basis, const Eigen::VectorXd& z,
                                            NewtonOptions options = {.tolerance = 1e-11, .max_iterations = 50});

/// Moments int w_inf^{4/(N-2)} psi_a (w - w_inf) e^{-phi0} for a in A.
Eigen::VectorXd low_mode_moments(const SpectralBasis& basis, const Field& w);

struct EnergyGradientCheck {
  double mismatch = 0.0;
  Eigen::VectorXd finite_difference;
  Eigen::VectorXd formula;
};

/// Compares the centred difference of z -> E(w_z) with the closed-form partial derivatives
///   -2 int F(w_z) psi~ / V^{(N-2)/N} - 2 (E~(w_z) - r_inf) int w_z^{(N+2)/(N-2)} psi~ / V^{(N-2)/N},
/// F the stationary residual and psi~ = (w_{z+eps e_a} - w_{z-eps e_a}) / (2 eps).
EnergyGradientCheck energy_gradient_check(const SpectralBasis& basis, const Eigen::VectorXd& z, double eps);

struct TrajectorySample {
  double t = 0.0;
  Field w;
  double r = 0.0;
};

struct LojasiewiczFit {
  double gamma = 0.0;
  double C = 0.0;
  double worst_violation = 0.0;  ///< max over the tail of lhs / (C rhs^{1+gamma})
  double slope = 0.0;            ///< unconstrained log-log slope (1 + gamma before clamping)
  bool clamped = false;          ///< the free slope fell outside (1, 2) and gamma was clamped
  std::size_t samples_used = 0;
};

/// Fits r - r_inf <= C (int w^{2N/(N-2)} |R - r_inf|^{2N/(N+2)} e^{-phi0})^{((N+2)/(2N))(1+gamma)}
/// over the last `window` samples whose gap r - r_inf is resolvable.
LojasiewiczFit lojasiewicz_check(const Background& background, double r_inf,
                                 std::span<const TrajectorySample> trajectory, std::size_t window = 40);
LojasiewiczFit lojasiewicz_check(const SpectralBasis& basis, std::span<const TrajectorySample> trajectory,
                                 std::size_t window = 40);

}  // namespace wyflow
