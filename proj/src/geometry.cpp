#include "wyflow/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace wyflow {

Exponents Exponents::for_dimensions(int n, double m) {
  Exponents e;
  const double N = n + m;
  e.total_dim = N;
  e.metric = 4.0 / (N - 2.0);
  e.conformal_law = (N + 2.0) / (N - 2.0);
  e.volume = 2.0 * N / (N - 2.0);
  e.weight = 2.0 * m / (N - 2.0);
  e.laplacian_coefficient = 4.0 * (N - 1.0) / (N - 2.0);
  e.coupling = (N - 2.0) / (4.0 * (N - 1.0));
  e.flow_rate = (N - 2.0) / 4.0;
  e.curvature_p_small = 2.0 * N / (N + 2.0);
  return e;
}

namespace {

void check_dimensions(int n, double m, int grid_points) {
  if (n < 3) throw InvalidConfiguration("manifold dimension n must be at least 3, got " + std::to_string(n));
  if (!(m >= 0.0) || !std::isfinite(m)) throw InvalidConfiguration("dimensional parameter m must be finite and >= 0");
  if (grid_points < 4) throw InvalidConfiguration("grid_points must be at least 4");
}

double sphere_volume(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1));
}

}  // namespace

GeometryPtr Geometry::torus(int n, double m, int k, int grid_points) {
  check_dimensions(n, m, grid_points);
  if (k < 1 || k > 3 || k > n) throw InvalidConfiguration("torus active coordinate count k must be in {1,2,3} and <= n");
  auto g = std::shared_ptr<Geometry>(new Geometry());
  g->kind_ = ManifoldKind::TorusSym;
  g->n_ = n;
  g->m_ = m;
  g->k_ = k;
  g->points_ = grid_points;
  g->h_ = 2.0 * std::numbers::pi / grid_points;
  g->background_curvature_ = 0.0;
  g->build();
  return g;
}

GeometryPtr Geometry::sphere(int n, double m, int grid_points) {
  check_dimensions(n, m, grid_points);
  auto g = std::shared_ptr<Geometry>(new Geometry());
  g->kind_ = ManifoldKind::SphereSym;
  g->n_ = n;
  g->m_ = m;
  g->k_ = 1;
  g->points_ = grid_points;
  g->h_ = std::numbers::pi / grid_points;
  g->background_curvature_ = static_cast<double>(n) * (n - 1);
  g->build();
  return g;
}

void Geometry::build() {
  exponents_ = Exponents::for_dimensions(n_, m_);
  const Eigen::Index N = points_;
  size_ = 1;
  for (int d = 0; d < k_; ++d) size_ *= N;

  forward_.assign(k_, std::vector<Eigen::Index>(size_));
  backward_.assign(k_, std::vector<Eigen::Index>(size_));
  faces_ = Faces{};

  if (kind_ == ManifoldKind::TorusSym) {
    measure_ = Eigen::ArrayXd::Constant(size_, std::pow(h_, k_));
    // Face area factor h^k / h^2, consistent with the node measure h^k.
    const double area = std::pow(h_, k_ - 2);
    Eigen::Index stride = 1;
    for (int d = 0; d < k_; ++d) {
      for (Eigen::Index i = 0; i < size_; ++i) {
        const Eigen::Index coord = (i / stride) % N;
        const Eigen::Index up = i + (coord == N - 1 ? -(N - 1) * stride : stride);
        const Eigen::Index down = i + (coord == 0 ? (N - 1) * stride : -stride);
        forward_[d][i] = up;
        backward_[d][i] = down;
        faces_.lower.push_back(i);
        faces_.upper.push_back(up);
        faces_.area.push_back(area);
      }
      stride *= N;
    }
    return;
  }

  // Sphere: measure proportional to sin^{n-1}(theta_j) h, normalised to Vol(S^n).
  measure_.resize(size_);
  for (Eigen::Index j = 0; j < size_; ++j) {
    const double theta = (j + 0.5) * h_;
    measure_[j] = std::pow(std::sin(theta), n_ - 1) * h_;
  }
  const double scale = sphere_volume(n_) / measure_.sum();
  measure_ *= scale;
  for (Eigen::Index j = 0; j < size_; ++j) {
    forward_[0][j] = (j == size_ - 1) ? j : j + 1;
    backward_[0][j] = (j == 0) ? j : j - 1;
  }
  for (Eigen::Index j = 0; j + 1 < size_; ++j) {
    const double theta_face = (j + 1) * h_;
    faces_.lower.push_back(j);
    faces_.upper.push_back(j + 1);
    faces_.area.push_back(scale * std::pow(std::sin(theta_face), n_ - 1) / h_);
  }
}

double Geometry::total_volume() const { return measure_.sum(); }

Eigen::ArrayXd Geometry::coordinate(int axis) const {
  if (axis < 0 || axis >= k_) throw InvalidConfiguration("coordinate axis out of range");
  Eigen::ArrayXd x(size_);
  Eigen::Index stride = 1;
  for (int d = 0; d < axis; ++d) stride *= points_;
  for (Eigen::Index i = 0; i < size_; ++i) {
    const Eigen::Index c = (i / stride) % points_;
    x[i] = kind_ == ManifoldKind::TorusSym ? c * h_ : (c + 0.5) * h_;
  }
  return x;
}

bool Geometry::same_grid(const Geometry& other) const {
  return kind_ == other.kind_ && k_ == other.k_ && points_ == other.points_ && n_ == other.n_ && m_ == other.m_;
}

GeometryPtr Geometry::with_stencil_defect(double defect) const {
  auto g = std::shared_ptr<Geometry>(new Geometry(*this));
  g->stencil_defect_ = defect;
  return g;
}

Field::Field(GeometryPtr geometry, Eigen::ArrayXd values) : geometry_(std::move(geometry)), values_(std::move(values)) {
  if (!geometry_) throw GeometryMismatch("field has no geometry");
  if (values_.size() != geometry_->size()) {
    throw GeometryMismatch("field length " + std::to_string(values_.size()) + " does not match grid size " +
                           std::to_string(geometry_->size()));
  }
  require_finite(values_, "field");
}

Field Field::constant(GeometryPtr geometry, double value) {
  const auto size = geometry->size();
  return Field(std::move(geometry), Eigen::ArrayXd::Constant(size, value));
}

Field Field::sample(GeometryPtr geometry, const std::function<double(std::span<const double>)>& f) {
  const int k = geometry->active_dims();
  std::vector<Eigen::ArrayXd> coords;
  for (int d = 0; d < k; ++d) coords.push_back(geometry->coordinate(d));
  Eigen::ArrayXd v(geometry->size());
  std::vector<double> x(k);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    for (int d = 0; d < k; ++d) x[d] = coords[d][i];
    v[i] = f(x);
  }
  return Field(std::move(geometry), std::move(v));
}

void require_same_grid(const Geometry& geom, const Field& f, const char* what) {
  if (!geom.same_grid(f.geometry())) throw GeometryMismatch(std::string(what) + " lives on a different grid");
}

void require_finite(const Eigen::ArrayXd& values, const char* what) {
  if (!values.allFinite()) throw DomainError(std::string(what) + " contains non-finite values");
}

DivergenceStencil::DivergenceStencil(const Geometry& geom, const Eigen::ArrayXd& phi0)
    : faces_(&geom.faces()), defect_(geom.stencil_defect()) {
  if (phi0.size() != geom.size()) throw GeometryMismatch("weight does not match the grid");
  require_finite(phi0, "weight");
  const Eigen::ArrayXd e = (-phi0).exp();
  density_ = e * geom.measure_weight();
  inv_density_ = density_.inverse();
  const auto& F = *faces_;
  coefficient_.resize(static_cast<Eigen::Index>(F.area.size()));
  for (std::size_t f = 0; f < F.area.size(); ++f) {
    coefficient_[f] = F.area[f] * 0.5 * (e[F.lower[f]] + e[F.upper[f]]);
  }
}

void DivergenceStencil::apply(const Eigen::ArrayXd& u, Eigen::ArrayXd& out) const {
  out.setZero(u.size());
  const auto& F = *faces_;
  const std::size_t count = F.area.size();
  const double up_scale = 1.0 + defect_;
  for (std::size_t f = 0; f < count; ++f) {
    const auto lo = F.lower[f];
    const auto hi = F.upper[f];
    const double flux = coefficient_[f] * (u[hi] - u[lo]);
    out[lo] += up_scale * flux;
    out[hi] -= flux;
  }
  out *= inv_density_;
}

Eigen::ArrayXd DivergenceStencil::apply(const Eigen::ArrayXd& u) const {
  Eigen::ArrayXd out;
  apply(u, out);
  return out;
}

double DivergenceStencil::spectral_radius_bound() const {
  Eigen::ArrayXd row = Eigen::ArrayXd::Zero(density_.size());
  const auto& F = *faces_;
  for (std::size_t f = 0; f < F.area.size(); ++f) {
    row[F.lower[f]] += coefficient_[f];
    row[F.upper[f]] += coefficient_[f];
  }
  return (2.0 * row * inv_density_).maxCoeff();
}

Field weighted_laplacian(const Geometry& geom, const Field& phi0, const Field& u) {
  require_same_grid(geom, phi0, "phi0");
  require_same_grid(geom, u, "u");
  DivergenceStencil stencil(geom, phi0.values());
  return u.with_values(stencil.apply(u.values()));
}

Field laplacian(const Geometry& geom, const Field& u) {
  require_same_grid(geom, u, "u");
  DivergenceStencil stencil(geom, Eigen::ArrayXd::Zero(geom.size()));
  return u.with_values(stencil.apply(u.values()));
}

double integrate_weighted(const Geometry& geom, const Field& phi0, const Field& f) {
  require_same_grid(geom, phi0, "phi0");
  require_same_grid(geom, f, "integrand");
  return (f.values() * (-phi0.values()).exp() * geom.measure_weight()).sum();
}

double integrate(const Geometry& geom, const Field& f) {
  require_same_grid(geom, f, "integrand");
  return (f.values() * geom.measure_weight()).sum();
}

Field gradient_dot(const Geometry& geom, const Field& u, const Field& v) {
  require_same_grid(geom, u, "u");
  require_same_grid(geom, v, "v");
  const double inv2h = 0.5 / geom.spacing();
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(geom.size());
  const auto& fw = geom.forward_neighbours();
  const auto& bw = geom.backward_neighbours();
  const auto& a = u.values();
  const auto& b = v.values();
  for (int d = 0; d < geom.active_dims(); ++d) {
    for (Eigen::Index i = 0; i < geom.size(); ++i) {
      const double da = (a[fw[d][i]] - a[bw[d][i]]) * inv2h;
      const double db = (b[fw[d][i]] - b[bw[d][i]]) * inv2h;
      out[i] += da * db;
    }
  }
  return u.with_values(std::move(out));
}

Field gradient_norm_sq(const Geometry& geom, const Field& u) { return gradient_dot(geom, u, u); }

double weighted_inner(const Geometry& geom, const Field& phi0, const Field& u, const Field& v) {
  require_same_grid(geom, v, "v");
  return integrate_weighted(geom, phi0, u.with_values(u.values() * v.values()));
}

}  // namespace wyflow
