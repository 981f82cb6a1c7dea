#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "wyflow/geometry.hpp"

namespace wyflow {

/// Raised for schema violations; the message starts with the offending key path.
class ConfigError : public InvalidConfiguration {
 public:
  using InvalidConfiguration::InvalidConfiguration;
};

/// One term amplitude * cos|sin(frequency * x_axis) of a torus field.
struct FourierTerm {
  enum class Kind { Cos, Sin };
  Kind kind = Kind::Cos;
  int axis = 0;
  int frequency = 1;
  double amplitude = 0.0;
};

/// Field description.  A torus field is constant + sum of Fourier terms, a sphere
/// field is constant + sum_i poly_cos[i] cos^i(theta); `samples` gives node values
/// directly.  `random_amplitude > 0` adds a seeded smooth random perturbation with
/// `random_modes` modes and coefficient decay 1/j^2.
struct FieldSpec {
  double constant = 0.0;
  std::vector<FourierTerm> terms;
  std::vector<double> poly_cos;
  std::vector<double> samples;
  double random_amplitude = 0.0;
  int random_modes = 4;

  bool is_identically_zero() const;
  static FieldSpec constant_value(double c) { return FieldSpec{.constant = c}; }
};

struct GeometryConfig {
  ManifoldKind kind = ManifoldKind::SphereSym;
  int n = 3;
  int k = 1;
  int grid_points = 64;
};

struct TimeConfig {
  double t_end = 10.0;
  double dt_max = std::numeric_limits<double>::infinity();
  double stop_tol = 1e-6;
  long diagnostics_stride = 10;
};

struct SpectralConfig {
  int eigen_count = 12;
  double newton_tol = 1e-10;
  int lojasiewicz_window = 40;
};

struct OutputConfig {
  std::string diagnostics = "diagnostics.csv";
  std::string snapshot = "snapshot.json";
  std::string trajectory = "trajectory.json";
  std::string report = "spectral_report.json";
};

struct RunConfig {
  GeometryConfig geometry;
  double m = 0.0;
  FieldSpec phi0;
  FieldSpec w0 = FieldSpec::constant_value(1.0);
  TimeConfig time;
  SpectralConfig spectral;
  std::uint64_t seed = 0;
  OutputConfig output;
};

/// Parses and validates a JSON run configuration.  Required: geometry.kind, geometry.n,
/// geometry.grid_points and time.t_end; everything else has a default.
RunConfig parse_config(std::string_view text);

/// Canonical JSON form of a configuration (all defaults explicit); parse_config accepts it.
std::string config_to_json(const RunConfig& config, int indent = 2);

/// Built-in perturbed-sphere scenario (n = 3, m = 1, 64 cell centres).
RunConfig default_config();

GeometryPtr build_geometry(const RunConfig& config);

/// Samples a field description on the geometry.  `stream` separates the random
/// perturbations of different fields drawn from the same seed.
Field build_field(const FieldSpec& spec, const GeometryPtr& geometry, std::uint64_t seed, std::uint64_t stream);

}  // namespace wyflow
