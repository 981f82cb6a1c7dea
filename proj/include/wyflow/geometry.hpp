#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "wyflow/error.hpp"

namespace wyflow {

enum class ManifoldKind { TorusSym, SphereSym };

/// Exponents and constants of the weighted conformal calculus for the pair (n, m).
///
/// With N = n + m, a conformal factor w acts as g = w^metric g0 and
/// e^{-phi} dvol_g = w^volume e^{-phi0} dvol_g0.  All of them reduce to the
/// classical Yamabe values when m = 0.
struct Exponents {
  double total_dim = 0.0;           ///< N = n + m
  double metric = 0.0;              ///< 4 / (N - 2)
  double conformal_law = 0.0;       ///< (N + 2) / (N - 2)
  double volume = 0.0;              ///< 2N / (N - 2)
  double weight = 0.0;              ///< 2m / (N - 2)
  double laplacian_coefficient = 0.0;  ///< 4(N - 1) / (N - 2)
  double coupling = 0.0;            ///< (N - 2) / (4(N - 1)), the R term of L^m_phi
  double flow_rate = 0.0;           ///< (N - 2) / 4, dw/dt = -flow_rate (R - r) w
  double curvature_p_small = 0.0;   ///< 2N / (N + 2)

  static Exponents for_dimensions(int n, double m);
};

class Geometry;
using GeometryPtr = std::shared_ptr<const Geometry>;

/// Symmetric background smooth metric measure space: the flat torus (R/2piZ)^n with
/// fields depending on the first k coordinates, or the unit sphere S^n with zonal
/// fields depending on the polar angle only.
///
/// Grid values live on the reduced domain; exponents and the measure use the full
/// (n, m).  Torus nodes sit at x_j = j h, h = 2 pi / N.  Sphere nodes are cell
/// centres theta_j = (j + 1/2) h, h = pi / N, with zero flux through the poles.
class Geometry : public std::enable_shared_from_this<Geometry> {
 public:
  static GeometryPtr torus(int n, double m, int k, int grid_points);
  static GeometryPtr sphere(int n, double m, int grid_points);

  ManifoldKind kind() const { return kind_; }
  int n() const { return n_; }
  double m() const { return m_; }
  int active_dims() const { return k_; }
  int grid_points() const { return points_; }
  Eigen::Index size() const { return size_; }
  double spacing() const { return h_; }
  double background_scalar_curvature() const { return background_curvature_; }
  const Exponents& exponents() const { return exponents_; }

  /// Discrete cell measure of dvol_g0 (sums to the exact manifold volume).
  const Eigen::ArrayXd& measure_weight() const { return measure_; }
  double total_volume() const;

  /// Coordinate of every node along an active axis (x_d for the torus, theta for the sphere).
  Eigen::ArrayXd coordinate(int axis) const;

  bool same_grid(const Geometry& other) const;

  /// Copy of this geometry whose Laplacian stencil scales outgoing fluxes by
  /// (1 + defect) on one side.  Negative-control hook for the self-adjointness check.
  GeometryPtr with_stencil_defect(double defect) const;
  double stencil_defect() const { return stencil_defect_; }

  /// Faces of the divergence stencil: node pairs (lower, upper) with an area factor
  /// such that the flux coefficient is area * mean(e^{-phi0}).
  struct Faces {
    std::vector<Eigen::Index> lower;
    std::vector<Eigen::Index> upper;
    std::vector<double> area;
  };
  const Faces& faces() const { return faces_; }

  /// Neighbours used by centred gradients (reflected at the sphere poles).
  const std::vector<std::vector<Eigen::Index>>& forward_neighbours() const { return forward_; }
  const std::vector<std::vector<Eigen::Index>>& backward_neighbours() const { return backward_; }

 private:
  Geometry() = default;
  void build();

  ManifoldKind kind_ = ManifoldKind::TorusSym;
  int n_ = 3;
  double m_ = 0.0;
  int k_ = 1;
  int points_ = 0;
  Eigen::Index size_ = 0;
  double h_ = 0.0;
  double background_curvature_ = 0.0;
  double stencil_defect_ = 0.0;
  Exponents exponents_;
  Eigen::ArrayXd measure_;
  Faces faces_;
  std::vector<std::vector<Eigen::Index>> forward_;
  std::vector<std::vector<Eigen::Index>> backward_;
};

/// Real-valued grid function on a geometry's reduced domain.
class Field {
 public:
  Field(GeometryPtr geometry, Eigen::ArrayXd values);

  static Field constant(GeometryPtr geometry, double value);
  static Field zero(GeometryPtr geometry) { return constant(std::move(geometry), 0.0); }
  /// Samples f at every node; f receives the node's active coordinates.
  static Field sample(GeometryPtr geometry, const std::function<double(std::span<const double>)>& f);

  const Geometry& geometry() const { return *geometry_; }
  const GeometryPtr& geometry_ptr() const { return geometry_; }
  const Eigen::ArrayXd& values() const { return values_; }
  Eigen::ArrayXd& values() { return values_; }
  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

  double min() const { return values_.minCoeff(); }
  double max() const { return values_.maxCoeff(); }
  bool is_identically_zero() const { return (values_ == 0.0).all(); }

  Field with_values(Eigen::ArrayXd values) const { return Field(geometry_, std::move(values)); }

 private:
  GeometryPtr geometry_;
  Eigen::ArrayXd values_;
};

void require_same_grid(const Geometry& geom, const Field& f, const char* what);
void require_finite(const Eigen::ArrayXd& values, const char* what);

/// Divergence-form weighted Laplacian e^{phi0} div(e^{-phi0} grad u) for a fixed weight.
///
/// The face coefficient is area * (e^{-phi0_i} + e^{-phi0_j}) / 2 and the node
/// denominator is measure_i e^{-phi0_i}, so the operator is exactly symmetric in
/// <u, v> = sum u v e^{-phi0} measure.
class DivergenceStencil {
 public:
  DivergenceStencil(const Geometry& geom, const Eigen::ArrayXd& phi0);

  void apply(const Eigen::ArrayXd& u, Eigen::ArrayXd& out) const;
  Eigen::ArrayXd apply(const Eigen::ArrayXd& u) const;

  /// e^{-phi0} * measure: the discrete weighted measure.
  const Eigen::ArrayXd& density() const { return density_; }
  const Eigen::ArrayXd& face_coefficients() const { return coefficient_; }
  const Geometry::Faces& faces() const { return *faces_; }

  /// Gershgorin bound on the spectral radius of the operator.
  double spectral_radius_bound() const;

 private:
  const Geometry::Faces* faces_;
  Eigen::ArrayXd coefficient_;
  Eigen::ArrayXd density_;
  Eigen::ArrayXd inv_density_;
  double defect_ = 0.0;
};

Field weighted_laplacian(const Geometry& geom, const Field& phi0, const Field& u);
/// Unweighted Laplace-Beltrami operator of g0 (the weighted one with phi0 = 0).
Field laplacian(const Geometry& geom, const Field& u);

/// Sum f e^{-phi0} measure, the quadrature of the integral against e^{-phi0} dvol_g0.
double integrate_weighted(const Geometry& geom, const Field& phi0, const Field& f);
double integrate(const Geometry& geom, const Field& f);

/// Node-wise |grad u|^2 from centred differences.
Field gradient_norm_sq(const Geometry& geom, const Field& u);
/// Node-wise <grad u, grad v> from the same centred differences.
Field gradient_dot(const Geometry& geom, const Field& u, const Field& v);

/// <u, v>_mu = sum u v e^{-phi0} measure.
double weighted_inner(const Geometry& geom, const Field& phi0, const Field& u, const Field& v);

}  // namespace wyflow
