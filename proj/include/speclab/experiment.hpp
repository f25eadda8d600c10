#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "speclab/control.hpp"
#include "speclab/domain.hpp"
#include "speclab/inequality.hpp"
#include "speclab/obsets.hpp"
#include "speclab/spectrum.hpp"

namespace speclab {

struct DomainSpec {
  int dimension = 1;
  double lx = 1.0, ly = 0.0;
  int nx = 1, ny = 0;
  BoundaryCondition bc = BoundaryCondition::dirichlet;

  Domain build() const;
};

struct SetSpec {
  std::string type = "full";  // full, box, cantor, random, points
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  double ratio = 1.0 / 3.0;
  int levels = 1;
  CantorPlacement placement;
  double measure = 0.0;
  std::vector<Eigen::Vector2d> points;
  double exponent = 0.0;
  double content = 0.0;

  ObservationSet build(const Domain& domain, std::uint64_t seed) const;
};

// Initial or target state of a control run.
struct StateSpec {
  std::string type = "zero";  // zero, mode, random, coefficients
  int index = 0;
  double amplitude = 1.0;
  std::vector<double> values;
};

struct TelescopeSpec {
  double horizon = 1.0;
  double rho = 0.5;
  int steps = 20;
  double rate = 1.0;
};

struct ChartSpec {
  Eigen::Matrix2d metric = Eigen::Matrix2d::Identity();
  double s_max = 0.5;
  int ns = 21;
  double z_lo = -1.0, z_hi = 1.0;
  int nz = 81;
};

/// Parsed and validated experiment configuration. Only the fields of the
/// selected experiment are populated.
struct ExperimentConfig {
  std::string experiment;
  std::optional<std::uint64_t> seed;
  std::string output = "out";
  DomainSpec domain;
  CoefficientSpec coefficients = ConstantCoefficients{};
  SetSpec set;

  // spectrum
  std::string solver = "dense";
  SpectrumRequest request;

  // constant-sweep
  NormPair norms = NormPair::l2_l2;
  std::vector<double> cutoffs;

  // interp-check
  double s = 0.0, t = 0.5, epsilon = 0.5;
  int instances = 10;
  std::optional<TelescopeSpec> telescope;

  // control
  double horizon = 1.0, rho = 0.5;
  int steps = 10, modes = 20;
  double rate = 1.0;
  double tolerance = 1e-6;
  StateSpec initial, target;
  SynthesisOptions synthesis;

  // double-check
  int count = 10;
  int axis = 0;
  std::optional<ChartSpec> chart;

  nlohmann::json raw;
};

/// Throws Error(config_validation) naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& config);
nlohmann::json load_config(const std::filesystem::path& path);

/// FNV-1a 64 of the compact dump of the config.
std::uint64_t config_hash(const nlohmann::json& config);
std::string config_hash_hex(const nlohmann::json& config);

struct CheckResult {
  std::string name;
  bool passed = true;
  double value = 0.0;
  double limit = 0.0;
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // highest precedence
  int threads = 1;
  bool verbose = false;
  std::ostream* console = nullptr;
};

struct RunResult {
  std::filesystem::path out_dir;
  std::vector<CheckResult> checks;
  std::vector<std::string> files;
  nlohmann::json summary;
  bool passed = true;
};

/// Output directory precedence: options.out_dir, then $SPECLAB_OUT, then the
/// config's "output" field.
std::filesystem::path resolve_output(const ExperimentConfig& config, const RunOptions& options);

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// %.17g with inf/nan spelled out.
std::string format_double(double x);

}  // namespace speclab
