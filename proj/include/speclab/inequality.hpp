#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "speclab/obsets.hpp"
#include "speclab/spectrum.hpp"

namespace speclab {

enum class NormPair { l2_l2, l2_l1, linf_sup };

const char* to_string(NormPair norms) noexcept;

/// ||field 1_E||_{L^1} with kappa weights for cell masks; max over the
/// snapped points for point clouds.
double observed_norm(const DiscreteOperator& op, const ObservationSet& set,
                     const Eigen::VectorXd& field);

struct L2Constant {
  double constant = 1.0;    // infinity when not observable
  double lambda_min = 1.0;  // smallest Gram eigenvalue
  bool observable = true;
  int modes = 0;
};

/// Sharp constant of ||phi||_w <= C ||phi 1_E||_w over the modes below `cutoff`.
L2Constant constant_L2(const Spectrum& spectrum, const ObservationSet& set, double cutoff);

/// Same, from an explicit mode block Phi (unknowns x modes) and set weights.
L2Constant gram_constant(const Eigen::MatrixXd& Phi, const Eigen::VectorXd& set_weights);

struct L1Options {
  int restarts = 16;
  int max_iterations = 200;
  double tolerance = 1e-8;
  std::uint64_t seed = 1;
};

struct L1Constant {
  double constant = 1.0;
  Eigen::VectorXd certificate;  // coefficients of the extremal phi (unit w-norm)
  bool approximate = false;     // some restart hit the iteration cap
  double l2_floor = 0.0;        // C_L2 / sqrt(|E|_kappa)
  int modes = 0;
};

/// Upper estimate of sup ||phi||_w / ||phi 1_E||_{L^1} by reweighted least
/// squares on the unit sphere of the low-mode space.
L1Constant constant_L1(const Spectrum& spectrum, const ObservationSet& set, double cutoff,
                       const L1Options& options = {});

struct SupConstant {
  double constant = 1.0;  // infinity when some low mode vanishes on the cloud
  bool observable = true;
  int modes = 0;
  int argmax_unknown = -1;      // node where the extremal phi peaks
  Eigen::VectorXd certificate;  // coefficients of the extremal phi
};

/// Exact discrete constant sup{ ||phi||_inf : |phi(x_i)| <= 1 on the cloud }.
SupConstant constant_sup(const Spectrum& spectrum, const ObservationSet& set, double cutoff);

/// Same, from Phi (unknowns x modes) and the observed rows. Each node y is an
/// LP, solved through its dual min ||z||_1 subject to A^T z = Phi(y, :).
SupConstant sup_constant(const Eigen::MatrixXd& Phi, const std::vector<int>& observed);

struct SweepEntry {
  double cutoff = 0.0;
  double constant = 1.0;
  int modes = 0;
  bool observable = true;
};

struct ConstantSweep {
  NormPair norms = NormPair::l2_l2;
  std::vector<SweepEntry> entries;
};

/// Evaluates the requested constant at every cutoff (ascending), in parallel.
ConstantSweep sweep_constants(const Spectrum& spectrum, const ObservationSet& set, NormPair norms,
                              std::vector<double> cutoffs, int threads = 1);

struct GrowthFit {
  double prefactor = 1.0;  // C in C e^{D Lambda}
  double rate = 0.0;       // D
  double r2 = 0.0;         // NaN when degenerate_flat
  bool degenerate_flat = false;
  int points = 0;
};

/// Least squares of log C(Lambda) against Lambda over the finite entries.
GrowthFit fit_growth(const ConstantSweep& sweep);

struct InterpolationReport {
  double lhs = 0.0;          // ||e^{t Delta} f||
  double observation = 0.0;  // L^1(E) or sup over the cloud of e^{t Delta} f
  double earlier = 0.0;      // ||e^{s Delta} f||
  double required_n = 0.0;   // smallest N with lhs <= N e^{N/(t-s)} obs^{1-eps} earlier^eps
  double alpha_numeric = 1.0;   // minimizer of a^eps obs + a^{eps-1} earlier over a >= 1
  double alpha_explicit = 1.0;  // earlier / observation
  double alpha_gap = 0.0;       // relative gap between the two
  double cutoff = 0.0;          // Lambda with e^{Lambda^2 (t-s)} = alpha_numeric
  double tail = 0.0;            // ||e^{t Delta} (1 - Pi_Lambda) f||
  double tail_bound = 0.0;      // e^{-Lambda^2 (t-s)} ||e^{s Delta} f||
  bool tail_ok = true;
};

InterpolationReport interpolation_check(const Spectrum& spectrum, const ObservationSet& set,
                                        const Eigen::VectorXd& f, double s, double t,
                                        double epsilon = 0.5);

/// Solves log N + N/tau = log(lhs / (obs^{1-eps} earlier^eps)) for N > 0.
double required_constant(double lhs, double obs, double earlier, double tau, double epsilon);

/// True when lhs <= N e^{N/tau} obs^{1-eps} earlier^eps (log-space comparison).
bool interpolation_holds(const InterpolationReport& report, double n, double tau,
                         double epsilon);

enum class SequenceTag { lr_geometric, phung_wang };

struct TimeSequence {
  std::vector<double> times;
  double ratio = 0.5;   // rho for lr_geometric, 1/z for phung_wang
  double horizon = 1.0;
  SequenceTag tag = SequenceTag::lr_geometric;
  double anchor = 0.0;  // density point l (phung_wang)
  std::vector<double> measured_ratios;
};

/// Checks (s_n - s_{n+1}) >= rho (s_{n-1} - s_n) for s_n = T - t_n.
void validate_lr_sequence(const TimeSequence& seq);

/// Finite union of disjoint open intervals, kept sorted.
class IntervalSet {
 public:
  IntervalSet() = default;
  explicit IntervalSet(std::vector<std::pair<double, double>> intervals);

  const std::vector<std::pair<double, double>>& intervals() const noexcept { return intervals_; }
  double measure() const;
  double measure_in(double a, double b) const;

 private:
  std::vector<std::pair<double, double>> intervals_;
};

/// Fat Cantor set in (lo, hi) of the given measure fraction after `levels`
/// removal stages; stage n removes the middle gamma 4^{-n} (hi - lo) of each piece.
IntervalSet fat_cantor(double measure_fraction, int levels, double lo = 0.0, double hi = 1.0);

/// Searches l_1 in (l, T) so that l_{m+1} - l = z^{-m}(l_1 - l) satisfies
/// |J cap (l_{m+1}, l_m)| >= (l_m - l_{m+1})/3 for m = 1..depth.
TimeSequence phung_wang_times(const IntervalSet& J, double horizon, double z, double l,
                              int depth = 8, int scan = 4000);

struct TelescopeStep {
  double s = 0.0;            // s_n
  double gap = 0.0;          // s_n - s_{n+1}
  double norm = 0.0;         // ||e^{s_n Delta} f||
  double observation = 0.0;  // ||e^{s_n Delta} f||_{L^1(E)} or sup over E
  double log_term = 0.0;     // -D/gap + log observation
  double residual = 0.0;     // fitted step inequality, scaled by its right side
};

struct TelescopeReport {
  double lhs = 0.0;       // ||e^{T Delta} f||
  double log_sup = 0.0;   // log sup_n e^{-D/gap_n} observation_n
  double constant = 0.0;  // smallest admissible C for this instance
  double a = 0.0;         // fitted A of the per-step inequality
  double b = 1.0;
  double d_multiple = 2.0;  // 1/rho
  double step_constant = 0.0;
  double max_residual = 0.0;
  std::vector<TelescopeStep> steps;
};

TelescopeReport telescope_check(const Spectrum& spectrum, const ObservationSet& set,
                                const TimeSequence& seq, const Eigen::VectorXd& f, double d,
                                double b = 1.0);

/// Space-time set on uniform time slabs over (0, horizon): slab k holds the
/// cells of E_t for t in slab k.
struct SpaceTimeMask {
  double horizon = 1.0;
  std::vector<std::vector<int>> slab_cells;

  int slabs() const noexcept { return static_cast<int>(slab_cells.size()); }
  double slab_width() const { return horizon / slabs(); }
};

SpaceTimeMask product_mask(const ObservationSet& set, double horizon, int slabs);
/// Each (slab, cell) is kept independently with the given probability.
SpaceTimeMask random_space_time_mask(const Domain& domain, double horizon, int slabs,
                                     double density, std::uint64_t seed);

struct FubiniSlices {
  double measure = 0.0;  // |F|
  double threshold = 0.0;  // |F| / (2T)
  std::vector<int> good_slabs;  // J
  std::vector<double> slice_measure;
  double good_measure = 0.0;  // |J|
  double bound = 0.0;         // |F| / (2 T Vol(M))
  bool holds = true;
};

FubiniSlices fubini_slices(const Domain& domain, const SpaceTimeMask& mask);

}  // namespace speclab
