#include "wyflow/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>

#include "wyflow/stats.hpp"

namespace wyflow {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

/// Appends scale * Delta_{phi0} (as assembled by the stencil) to a triplet list.
void append_laplacian(const DivergenceStencil& stencil, double scale, Triplets& out) {
  const auto& F = stencil.faces();
  const auto& a = stencil.face_coefficients();
  const auto& den = stencil.density();
  for (std::size_t f = 0; f < F.area.size(); ++f) {
    const auto lo = F.lower[f];
    const auto hi = F.upper[f];
    const double c = scale * a[static_cast<Eigen::Index>(f)];
    out.emplace_back(lo, hi, c / den[lo]);
    out.emplace_back(lo, lo, -c / den[lo]);
    out.emplace_back(hi, lo, c / den[hi]);
    out.emplace_back(hi, hi, -c / den[hi]);
  }
}

void append_diagonal(const Eigen::ArrayXd& diag, Triplets& out) {
  for (Eigen::Index i = 0; i < diag.size(); ++i) out.emplace_back(i, i, diag[i]);
}

Eigen::VectorXd solve_sparse(Eigen::Index size, const Triplets& triplets, const Eigen::VectorXd& rhs) {
  Eigen::SparseMatrix<double> J(size, size);
  J.setFromTriplets(triplets.begin(), triplets.end());
  J.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(J);
  if (lu.info() != Eigen::Success) throw NoConvergence("Newton Jacobian factorisation failed");
  Eigen::VectorXd dx = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !dx.allFinite()) throw NoConvergence("Newton linear solve failed");
  return dx;
}


/// Long-double evaluation of the stationary residual and of the energy for the
/// finite-difference gradient check, where the cancellation in E(w+) - E(w-) would
/// otherwise sit at the double round-off floor.  The Dirichlet form is summed over
/// face differences, so no large stencil terms cancel.
struct ExtendedEnergy {
  const DivergenceStencil& stencil;
  const Eigen::ArrayXd& curvature;
  const Exponents& ex;

  std::vector<long double> residual(const Eigen::ArrayXd& w, double r) const {
    const auto& F = stencil.faces();
    const auto& a = stencil.face_coefficients();
    const auto& den = stencil.density();
    std::vector<long double> flux(w.size(), 0.0L);
    for (std::size_t f = 0; f < F.area.size(); ++f) {
      const long double q = static_cast<long double>(a[static_cast<Eigen::Index>(f)]) * (w[F.upper[f]] - w[F.lower[f]]);
      flux[F.lower[f]] += q;
      flux[F.upper[f]] -= q;
    }
    std::vector<long double> out(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const long double wi = w[i];
      out[i] = ex.laplacian_coefficient * flux[i] / den[i] - curvature[i] * wi +
               static_cast<long double>(r) * std::pow(wi, static_cast<long double>(ex.conformal_law));
    }
    return out;
  }

  /// Returns {V, c' <L w, w>} for the weighted volume V.
  std::pair<long double, long double> parts(const Eigen::ArrayXd& w) const {
    const auto& F = stencil.faces();
    const auto& a = stencil.face_coefficients();
    const auto& den = stencil.density();
    long double dirichlet = 0.0L;
    for (std::size_t f = 0; f < F.area.size(); ++f) {
      const long double d = w[F.upper[f]] - w[F.lower[f]];
      dirichlet += static_cast<long double>(a[static_cast<Eigen::Index>(f)]) * d * d;
    }
    long double potential = 0.0L, volume = 0.0L;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const long double wi = w[i];
      potential += static_cast<long double>(curvature[i]) * den[i] * wi * wi;
      volume += den[i] * std::pow(wi, static_cast<long double>(ex.volume));
    }
    return {volume, ex.laplacian_coefficient * dirichlet + potential};
  }

  long double energy(const Eigen::ArrayXd& w) const {
    const auto [V, form] = parts(w);
    return form / std::pow(V, static_cast<long double>((ex.total_dim - 2.0) / ex.total_dim));
  }
};

}  // namespace

LimitProfile solve_limit_profile(const Background& background, const Field& w_guess, double r_guess,
                                 NewtonOptions options) {
  const Geometry& geom = background.geom();
  require_same_grid(geom, w_guess, "w_guess");
  if (!(w_guess.values() > 0.0).all()) throw DomainError("limit profile guess must be strictly positive");
  const CurvatureEvaluator eval(background);
  const auto& ex = geom.exponents();
  const Eigen::ArrayXd& den = eval.stencil().density();
  const Eigen::Index M = geom.size();

  Eigen::ArrayXd w = w_guess.values() * std::pow(eval.volume(w_guess.values()), -1.0 / ex.volume);
  double r = std::isfinite(r_guess) ? r_guess : eval.evaluate(w).mean;

  auto residuals = [&](const Eigen::ArrayXd& v, double rv, Eigen::ArrayXd& F, double& G) {
    F = eval.stationary_residual(v, rv);
    G = (v.pow(ex.volume) * den).sum() - 1.0;
  };
  auto merit = [](const Eigen::ArrayXd& F, double G) { return std::max(F.abs().maxCoeff(), std::abs(G)); };

  Eigen::ArrayXd F;
  double G = 0.0;
  residuals(w, r, F, G);
  double current = merit(F, G);
  int it = 0;
  double best = current;
  int stalled = 0;
  for (; it < options.max_iterations; ++it) {
    if (F.abs().maxCoeff() <= options.tolerance && std::abs(G) <= 1e-13) break;
    Triplets trip;
    append_laplacian(eval.stencil(), ex.laplacian_coefficient, trip);
    append_diagonal(-background.curvature.values() + ex.conformal_law * r * w.pow(ex.conformal_law - 1.0), trip);
    const Eigen::ArrayXd wp = w.pow(ex.conformal_law);
    const Eigen::ArrayXd dG = ex.volume * den * w.pow(ex.volume - 1.0);
    for (Eigen::Index i = 0; i < M; ++i) {
      trip.emplace_back(i, M, wp[i]);
      trip.emplace_back(M, i, dG[i]);
    }
    Eigen::VectorXd rhs(M + 1);
    rhs.head(M) = -F.matrix();
    rhs[M] = -G;
    const Eigen::VectorXd dx = solve_sparse(M + 1, trip, rhs);

    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
      const Eigen::ArrayXd trial = w + lambda * dx.head(M).array();
      if (!(trial > 0.0).all()) continue;
      const double trial_r = r + lambda * dx[M];
      Eigen::ArrayXd Ft;
      double Gt = 0.0;
      residuals(trial, trial_r, Ft, Gt);
      const double mt = merit(Ft, Gt);
      if (mt < current || ls == 29 || lambda * dx.norm() < 1e-15 * w.matrix().norm()) {
        w = trial;
        r = trial_r;
        F = std::move(Ft);
        G = Gt;
        current = mt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if (current < 0.5 * best) {
      best = current;
      stalled = 0;
    } else if (++stalled >= 5) {
      break;
    }
  }
  const double residual = F.abs().maxCoeff();
  if (!(residual <= options.tolerance) || std::abs(G) > 1e-12) {
    std::ostringstream msg;
    msg << "limit profile Newton stalled after " << it << " iterations, residual " << residual;
    throw NoConvergence(msg.str());
  }
  return LimitProfile{w_guess.with_values(std::move(w)), r, it, residual};
}

double SpectralBasis::gram_defect() const {
  double worst = 0.0;
  const Eigen::ArrayXd weight = mode_weight * density;
  for (std::size_t a = 0; a < eigenfields.size(); ++a) {
    for (std::size_t b = a; b < eigenfields.size(); ++b) {
      const double g = (weight * eigenfields[a].values() * eigenfields[b].values()).sum();
      worst = std::max(worst, std::abs(g - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

double SpectralBasis::eigen_residual(std::size_t a) const {
  const CurvatureEvaluator eval(background);
  const auto& ex = geom().exponents();
  const Eigen::ArrayXd& psi = eigenfields.at(a).values();
  const Eigen::ArrayXd res = ex.laplacian_coefficient * eval.stencil().apply(psi) -
                             background.curvature.values() * psi + eigenvalues.at(a) * mode_weight * psi;
  return res.abs().maxCoeff();
}

SpectralBasis build_spectral_basis(const Background& background, const Field& w_inf, double r_inf, int count) {
  const Geometry& geom = background.geom();
  require_same_grid(geom, w_inf, "w_inf");
  if (!(w_inf.values() > 0.0).all()) throw DomainError("limit factor must be strictly positive");
  const Eigen::Index M = geom.size();
  if (count < 1 || count > M) {
    throw DomainError("eigen count " + std::to_string(count) + " exceeds grid size " + std::to_string(M));
  }
  const auto& ex = geom.exponents();
  const DivergenceStencil stencil(geom, background.phi0.values());
  const Eigen::ArrayXd& den = stencil.density();
  const Eigen::ArrayXd weight = w_inf.values().pow(ex.metric);

  // H = -c S + diag(den R): the symmetric form, with Delta_{phi0} = den^{-1} S.
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(M, M);
  const auto& F = stencil.faces();
  const auto& coef = stencil.face_coefficients();
  for (std::size_t f = 0; f < F.area.size(); ++f) {
    const auto lo = F.lower[f];
    const auto hi = F.upper[f];
    const double c = ex.laplacian_coefficient * coef[static_cast<Eigen::Index>(f)];
    H(lo, lo) += c;
    H(hi, hi) += c;
    H(lo, hi) -= c;
    H(hi, lo) -= c;
  }
  H.diagonal().array() += den * background.curvature.values();
  const Eigen::ArrayXd d = weight * den;
  const Eigen::ArrayXd inv_sqrt_d = d.rsqrt();
  const Eigen::MatrixXd Msym = inv_sqrt_d.matrix().asDiagonal() * H * inv_sqrt_d.matrix().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Msym);
  if (solver.info() != Eigen::Success) throw NoConvergence("dense symmetric eigensolver failed");

  SpectralBasis basis{.background = background, .w_inf = w_inf, .r_inf = r_inf};
  basis.threshold = ex.conformal_law * r_inf;
  basis.mode_weight = weight;
  basis.density = den;
  for (int a = 0; a < count; ++a) {
    Eigen::ArrayXd psi = solver.eigenvectors().col(a).array() * inv_sqrt_d;
    // Deterministic sign: the largest-magnitude entry (first in index order) is positive.
    Eigen::Index imax = 0;
    psi.abs().maxCoeff(&imax);
    for (Eigen::Index i = 0; i < M; ++i) {
      if (std::abs(psi[i]) >= (1.0 - 1e-9) * std::abs(psi[imax])) {
        imax = i;
        break;
      }
    }
    if (psi[imax] < 0.0) psi = -psi;
    basis.eigenvalues.push_back(solver.eigenvalues()[a]);
    basis.eigenfields.push_back(w_inf.with_values(std::move(psi)));
    if (solver.eigenvalues()[a] <= basis.threshold) basis.low_modes.push_back(a);
  }
  if (!basis.low_modes.empty() && basis.low_modes.back() == count - 1 && count < M) {
    throw DomainError("eigen count " + std::to_string(count) + " does not bracket the low-mode threshold");
  }
  return basis;
}

Field project_high_modes(const SpectralBasis& basis, const Field& f) {
  require_same_grid(basis.geom(), f, "projected field");
  Eigen::ArrayXd out = f.values();
  for (int a : basis.low_modes) {
    const Eigen::ArrayXd& psi = basis.eigenfields[a].values();
    const double coeff = (psi * f.values() * basis.density).sum();
    out -= coeff * basis.mode_weight * psi;
  }
  return f.with_values(std::move(out));
}

double lyapunov_schmidt_radius(const SpectralBasis& basis) {
  return 0.1 * std::sqrt((basis.w_inf.values().square() * basis.density).sum());
}

Eigen::VectorXd low_mode_moments(const SpectralBasis& basis, const Field& w) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(basis.low_modes.size()));
  const Eigen::ArrayXd diff = (w.values() - basis.w_inf.values()) * basis.mode_weight * basis.density;
  for (std::size_t i = 0; i < basis.low_modes.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = (diff * basis.eigenfields[basis.low_modes[i]].values()).sum();
  }
  return out;
}

LyapunovSchmidtPoint solve_lyapunov_schmidt(const SpectralBasis& basis, const Eigen::VectorXd& z,
                                            NewtonOptions options) {
  const Eigen::Index A = static_cast<Eigen::Index>(basis.low_modes.size());
  if (z.size() != A) {
    throw DomainError("z has " + std::to_string(z.size()) + " components but the low-mode set has " +
                      std::to_string(A));
  }
  const double xi = lyapunov_schmidt_radius(basis);
  if (z.norm() > xi) {
    std::ostringstream msg;
    msg << "|z| = " << z.norm() << " exceeds the Newton radius " << xi;
    throw DomainError(msg.str());
  }
  const Geometry& geom = basis.geom();
  const auto& ex = geom.exponents();
  const CurvatureEvaluator eval(basis.background);
  const Eigen::Index M = geom.size();
  const double r = basis.r_inf;

  std::vector<Eigen::ArrayXd> column(A), row(A);  // w^{4/(N-2)} psi_a and den w^{4/(N-2)} psi_a
  Eigen::ArrayXd w = basis.w_inf.values();
  for (Eigen::Index a = 0; a < A; ++a) {
    const Eigen::ArrayXd& psi = basis.eigenfields[basis.low_modes[a]].values();
    column[a] = basis.mode_weight * psi;
    row[a] = column[a] * basis.density;
    w += z[a] * psi;
  }
  if (!(w > 0.0).all()) throw NoConvergence("initial Lyapunov-Schmidt guess is not positive; reduce |z|");

  Eigen::VectorXd beta(A);
  auto system = [&](const Eigen::ArrayXd& v, const Eigen::VectorXd& b, Eigen::ArrayXd& eq, Eigen::VectorXd& mom) {
    eq = eval.stationary_residual(v, r);
    for (Eigen::Index a = 0; a < A; ++a) eq -= b[a] * column[a];
    mom.resize(A);
    for (Eigen::Index a = 0; a < A; ++a) mom[a] = (row[a] * (v - basis.w_inf.values())).sum() - z[a];
  };
  {
    const Eigen::ArrayXd F0 = eval.stationary_residual(w, r);
    for (Eigen::Index a = 0; a < A; ++a) beta[a] = (F0 * basis.eigenfields[basis.low_modes[a]].values() * basis.density).sum();
  }
  auto merit = [](const Eigen::ArrayXd& eq, const Eigen::VectorXd& mom) {
    return std::max(eq.abs().maxCoeff(), mom.size() ? mom.cwiseAbs().maxCoeff() : 0.0);
  };

  Eigen::ArrayXd eq;
  Eigen::VectorXd mom;
  system(w, beta, eq, mom);
  double current = merit(eq, mom);
  int it = 0;
  int stalled = 0;
  double best = current;
  for (; it < options.max_iterations && current > options.tolerance; ++it) {
    Triplets trip;
    append_laplacian(eval.stencil(), ex.laplacian_coefficient, trip);
    append_diagonal(-basis.background.curvature.values() + ex.conformal_law * r * w.pow(ex.conformal_law - 1.0), trip);
    for (Eigen::Index a = 0; a < A; ++a) {
      for (Eigen::Index i = 0; i < M; ++i) {
        trip.emplace_back(i, M + a, -column[a][i]);
        trip.emplace_back(M + a, i, row[a][i]);
      }
    }
    Eigen::VectorXd rhs(M + A);
    rhs.head(M) = -eq.matrix();
    rhs.tail(A) = -mom;
    const Eigen::VectorXd dx = solve_sparse(M + A, trip, rhs);
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
      const Eigen::ArrayXd trial = w + lambda * dx.head(M).array();
      if (!(trial > 0.0).all()) continue;
      const Eigen::VectorXd trial_beta = beta + lambda * dx.tail(A);
      Eigen::ArrayXd eqt;
      Eigen::VectorXd momt;
      system(trial, trial_beta, eqt, momt);
      const double mt = merit(eqt, momt);
      if (mt < current || ls == 29) {
        w = trial;
        beta = trial_beta;
        eq = std::move(eqt);
        mom = std::move(momt);
        current = mt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if (current < 0.5 * best) {
      best = current;
      stalled = 0;
    } else if (++stalled >= 4) {
      break;
    }
  }

  LyapunovSchmidtPoint point{.z = z, .w_bar = basis.w_inf.with_values(w), .multipliers = beta};
  point.newton_residual = current;
  point.iterations = it;
  const Field projected = project_high_modes(basis, basis.w_inf.with_values(eval.stationary_residual(w, r)));
  point.projected_residual = std::sqrt((projected.values().square() * basis.density).sum());
  point.moment_residual = A ? (low_mode_moments(basis, point.w_bar) - z).cwiseAbs().maxCoeff() : 0.0;
  if (!(point.projected_residual <= 1e-9) || !(point.moment_residual <= 1e-9)) {
    std::ostringstream msg;
    msg << "Lyapunov-Schmidt Newton failed (projected residual " << point.projected_residual << "); try a smaller |z|";
    throw NoConvergence(msg.str());
  }
  return point;
}

EnergyGradientCheck energy_gradient_check(const SpectralBasis& basis, const Eigen::VectorXd& z, double eps) {
  if (!(eps > 0.0)) throw DomainError("finite-difference step must be positive");
  const Eigen::Index A = static_cast<Eigen::Index>(basis.low_modes.size());
  const CurvatureEvaluator eval(basis.background);
  const auto& ex = basis.geom().exponents();
  const ExtendedEnergy ext{eval.stencil(), basis.background.curvature.values(), ex};
  const long double r = basis.r_inf;

  const LyapunovSchmidtPoint centre = solve_lyapunov_schmidt(basis, z);
  const Eigen::ArrayXd& w = centre.w_bar.values();
  const Eigen::ArrayXd& den = eval.stencil().density();
  const auto [V, form] = ext.parts(w);
  const long double scale = std::pow(V, static_cast<long double>((ex.total_dim - 2.0) / ex.total_dim));
  const long double energy_unnormalised = form / V;  // E~(w_z)
  const std::vector<long double> F = ext.residual(w, basis.r_inf);

  EnergyGradientCheck out;
  out.finite_difference.resize(A);
  out.formula.resize(A);
  for (Eigen::Index a = 0; a < A; ++a) {
    Eigen::VectorXd zp = z, zm = z;
    zp[a] += eps;
    zm[a] -= eps;
    const Eigen::ArrayXd plus = solve_lyapunov_schmidt(basis, zp).w_bar.values();
    const Eigen::ArrayXd minus = solve_lyapunov_schmidt(basis, zm).w_bar.values();
    out.finite_difference[a] = static_cast<double>((ext.energy(plus) - ext.energy(minus)) / (2.0L * eps));
    long double f_dot = 0.0L, wp_dot = 0.0L;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const long double tangent = (static_cast<long double>(plus[i]) - minus[i]) / (2.0L * eps);
      f_dot += F[i] * tangent * den[i];
      wp_dot += std::pow(static_cast<long double>(w[i]), static_cast<long double>(ex.conformal_law)) * tangent * den[i];
    }
    out.formula[a] = static_cast<double>(-2.0L * f_dot / scale - 2.0L * (energy_unnormalised - r) * wp_dot / scale);
  }
  out.mismatch = A ? (out.finite_difference - out.formula).cwiseAbs().maxCoeff() : 0.0;
  return out;
}

LojasiewiczFit lojasiewicz_check(const Background& background, double r_inf,
                                 std::span<const TrajectorySample> trajectory, std::size_t window) {
  const CurvatureEvaluator eval(background);
  const auto& ex = background.geom().exponents();
  const double s = ex.curvature_p_small;
  const double floor = std::max(1e-13, 1e3 * std::numeric_limits<double>::epsilon() * std::abs(r_inf));
  std::vector<double> log_gap, log_norm;
  for (const auto& sample : trajectory) {
    const double gap = sample.r - r_inf;
    if (!(gap > floor)) continue;
    const auto e = eval.evaluate(sample.w.values());
    const double norm = std::pow(((e.curvature - r_inf).abs().pow(s) * e.density).sum(), 1.0 / s);
    if (!(norm > 0.0)) continue;
    log_gap.push_back(std::log(gap));
    log_norm.push_back(std::log(norm));
  }
  if (log_gap.size() < 3) {
    std::ostringstream msg;
    msg << "trajectory already at the limit: " << log_gap.size() << " samples with r - r_inf above " << floor;
    throw InsufficientSignal(msg.str());
  }
  const std::size_t start = log_gap.size() > window ? log_gap.size() - window : 0;
  const std::span<const double> x(log_norm.data() + start, log_norm.size() - start);
  const std::span<const double> y(log_gap.data() + start, log_gap.size() - start);

  LojasiewiczFit fit;
  fit.samples_used = x.size();
  const LinearFit ls = least_squares(x, y);
  fit.slope = ls.slope;
  constexpr double kGammaMin = 1e-3;
  constexpr double kGammaMax = 1.0 - 1e-3;
  double gamma = ls.slope - 1.0;
  double intercept = ls.intercept;
  if (gamma < kGammaMin || gamma > kGammaMax) {
    gamma = std::clamp(gamma, kGammaMin, kGammaMax);
    fit.clamped = true;
    intercept = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) intercept += y[i] - (1.0 + gamma) * x[i];
    intercept /= static_cast<double>(x.size());
  }
  fit.gamma = gamma;
  fit.C = std::exp(intercept);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::exp(y[i] - intercept - (1.0 + gamma) * x[i]));
  fit.worst_violation = worst;
  return fit;
}

LojasiewiczFit lojasiewicz_check(const SpectralBasis& basis, std::span<const TrajectorySample> trajectory,
                                 std::size_t window) {
  return lojasiewicz_check(basis.background, basis.r_inf, trajectory, window);
}

}  // namespace wyflow
