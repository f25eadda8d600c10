#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "speclab/inequality.hpp"
#include "speclab/obsets.hpp"
#include "speclab/spectrum.hpp"

namespace speclab {

/// t_j = T (1 - rho^j), j = 0..n_steps: gaps T (1 - rho) rho^j, so that
/// s_n = T - t_n satisfies (s_n - s_{n+1}) = rho (s_{n-1} - s_n).
TimeSequence lr_schedule(double horizon, double rho, int n_steps);

enum class PayloadKind { density, atoms };

/// One impulse. `mass` is the per-unknown weight with <mu, e_k> = e_k . mass,
/// which is what the dynamics consume; the payload fields are for reporting.
struct StepControl {
  int step = 0;
  double time = 0.0;
  double gap = 0.0;     // t_{j+1} - t_j
  double cutoff = 0.0;  // every mode with lambda_k <= cutoff is cancelled
  int modes = 0;        // number of cancelled modes
  double conditioning = 1.0;
  PayloadKind kind = PayloadKind::density;
  Eigen::VectorXd density;          // per unknown, zero off the set
  std::vector<int> atom_unknowns;   // atoms
  Eigen::VectorXd atom_weights;
  Eigen::VectorXd mass;
  double total_variation = 0.0;
};

/// Minimum-norm control on the set whose moments cancel the first
/// deficit.size() modal coefficients. Cell masks get a density h with
/// G a = -d, h = Phi a; point clouds get atoms beta = min-norm solution of
/// A beta = -d with A_kp = kappa_p e_k(x_p).
StepControl step_control(const Spectrum& spectrum, const ObservationSet& set,
                         const Eigen::VectorXd& deficit);

/// Field form: the deficit is projected onto the modes below `cutoff`.
StepControl step_control(const Spectrum& spectrum, const ObservationSet& set, double cutoff,
                         const Eigen::VectorXd& deficit_field);

/// Moment conditioning of the first `modes` modes on the set:
/// C_L2 for cell masks, 1/sigma_min of the atom matrix for clouds.
double moment_conditioning(const Spectrum& spectrum, const ObservationSet& set, int modes);

struct SynthesisOptions {
  double c_lambda = 8.0;             // Lambda_j^2 = c_lambda / gap_j
  double max_conditioning = 1e5;     // shrink the cancelled band above this
  double dissipation_tolerance = 1e-10;  // modes with |d_k| e^{-lambda^2 (T - t_j)} above tol ||d_0|| must be cancelled
  double skip_tolerance = 1e-12;     // no impulse once ||d|| <= tol ||d_0||
};

struct ControlSchedule {
  double horizon = 1.0;
  std::vector<StepControl> steps;
  Eigen::VectorXd initial;  // modal coefficients of u_0
  Eigen::VectorXd target;   // modal coefficients of v_0
  std::vector<double> deficit_before;  // ||d(t_j^-)||
  std::vector<double> deficit_after;   // ||d(t_j^+)||
  std::vector<double> deficit_next;    // ||d(t_{j+1}^-)|| (or at T after the last step)
  double initial_deficit = 0.0;
  double terminal_deficit = 0.0;
  double relative_deficit = 0.0;  // terminal / initial (0 when nothing to steer)
  double terminal_error = 0.0;    // as reported by simulate
};

/// Lebeau-Robbiano loop over the schedule: at each t_j cancel the low modes
/// of the deficit against e^{t Delta} v_0, then let the heat flow damp the rest.
/// Works in the modal coordinates of the given (possibly truncated) spectrum.
ControlSchedule synthesize(const Spectrum& spectrum, const ObservationSet& set,
                           const TimeSequence& schedule, const Eigen::VectorXd& u0,
                           const Eigen::VectorXd& v0, const SynthesisOptions& options = {});

struct Simulation {
  Eigen::VectorXd terminal;           // modal coefficients of u(T)
  std::vector<double> times;          // snapshot times (each jump twice: before, after)
  std::vector<Eigen::VectorXd> states;
  double terminal_error = 0.0;  // ||u(T) - e^{T Delta} v_0|| / ||v_0|| (absolute if v_0 = 0)
};

/// Replays the jumps of a schedule from u_0 (initial state and target stored
/// in the schedule when u0 is empty).
Simulation simulate(const Spectrum& spectrum, const ControlSchedule& schedule,
                    const Eigen::VectorXd& u0 = Eigen::VectorXd());

struct ControlPiece {
  int interval = 0;
  int slab = 0;
  double start = 0.0;
  double duration = 0.0;
  Eigen::VectorXd density;  // per unknown, zero off E_t
};

struct DistributedControl {
  std::vector<ControlPiece> pieces;
  FubiniSlices slices;
  double sup_norm = 0.0;  // ||f||_{L^inf(F)}
  double initial_deficit = 0.0;
  double terminal_deficit = 0.0;
  double relative_deficit = 0.0;
  double terminal_error = 0.0;
};

/// Distributed control on F: during each schedule interval, piecewise-constant
/// densities on the good slices E_t cancel the low modes at the interval end.
DistributedControl distributed_control(const Spectrum& spectrum, const SpaceTimeMask& mask,
                                       const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                                       const TimeSequence& schedule,
                                       const SynthesisOptions& options = {});

struct LedgerRow {
  int step = 0;
  double time = 0.0;
  double gap = 0.0;
  double variation = 0.0;   // |mu_j|(E)
  double log_term = 0.0;    // D/gap + log |mu_j| (-inf for a zero impulse)
  double term = 0.0;        // e^{D/gap} |mu_j|
  double partial_sum = 0.0;
};

struct CostLedger {
  double rate = 0.0;
  std::vector<LedgerRow> rows;
  double total = 0.0;
  double last_increment = 0.0;
  bool converged = true;   // last increment <= 1e-8 total
  /// Smallest C with |mu_j| <= C e^{D/(T - t_j)} (the bound as stated).
  double growth_constant = 0.0;
  /// Smallest C with |mu_j| <= C e^{-D/(T - t_j)}; never exceeds the total.
  double decay_constant = 0.0;
  double last_ratio = 0.0;  // ratio of the last two nonzero terms
};

CostLedger cost_report(const ControlSchedule& schedule, double rate);

}  // namespace speclab
