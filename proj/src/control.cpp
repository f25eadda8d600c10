#include "speclab/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "speclab/error.hpp"

namespace speclab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void unreachable_mode(const Spectrum& spectrum, const Eigen::VectorXd& direction) {
  Eigen::Index k = 0;
  direction.cwiseAbs().maxCoeff(&k);
  std::ostringstream msg;
  msg << "mode k=" << k << " (lambda = " << spectrum.frequency(static_cast<int>(k))
      << ") cannot be reached from the observation set";
  fail(ErrorKind::synthesis_failure, msg.str());
}

Eigen::VectorXd decay(const Spectrum& spectrum, double dt) {
  return (-dt * spectrum.eigenvalues().array()).exp().matrix();
}

Eigen::MatrixXd atom_matrix(const Spectrum& spectrum, const ObservationSet& set, int modes) {
  const auto& unknowns = set.unknowns();
  const Domain& domain = spectrum.op().domain();
  Eigen::MatrixXd A(modes, unknowns.size());
  for (std::size_t p = 0; p < unknowns.size(); ++p) {
    const double kappa = spectrum.op().node_density()[domain.node_of_unknown(unknowns[p])];
    A.col(p) = kappa * spectrum.vectors().row(unknowns[p]).head(modes).transpose();
  }
  return A;
}

}  // namespace

TimeSequence lr_schedule(double horizon, double rho, int n_steps) {
  require(horizon > 0.0, ErrorKind::invalid_argument, "horizon must be positive");
  require(rho > 0.0 && rho < 1.0, ErrorKind::invalid_argument, "rho must lie in (0, 1)");
  require(n_steps >= 2, ErrorKind::invalid_argument, "schedule needs at least 2 steps");
  TimeSequence seq;
  seq.horizon = horizon;
  seq.ratio = rho;
  seq.tag = SequenceTag::lr_geometric;
  for (int j = 0; j <= n_steps; ++j) seq.times.push_back(horizon * (1.0 - std::pow(rho, j)));
  return seq;
}

double moment_conditioning(const Spectrum& spectrum, const ObservationSet& set, int modes) {
  require(modes >= 1 && modes <= spectrum.size(), ErrorKind::invalid_argument,
          "mode count outside the spectrum");
  if (set.kind() == SetKind::cell_mask)
    return gram_constant(spectrum.vectors().leftCols(modes), set.unknown_weights(spectrum.op()))
        .constant;
  if (static_cast<int>(set.unknowns().size()) < modes) return kInf;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(atom_matrix(spectrum, set, modes));
  const double lo = svd.singularValues().minCoeff();
  return lo <= 1e-10 * svd.singularValues().maxCoeff() ? kInf : 1.0 / lo;
}

StepControl step_control(const Spectrum& spectrum, const ObservationSet& set,
                         const Eigen::VectorXd& deficit) {
  const int K = static_cast<int>(deficit.size());
  require(K >= 1 && K <= spectrum.size(), ErrorKind::invalid_argument,
          "deficit must cover between 1 and all stored modes");
  const DiscreteOperator& op = spectrum.op();
  StepControl out;
  out.modes = K;
  out.cutoff = spectrum.frequency(K - 1);
  out.mass = Eigen::VectorXd::Zero(op.size());

  if (set.kind() == SetKind::cell_mask) {
    const Eigen::VectorXd wE = set.unknown_weights(op);
    const Eigen::VectorXd vE = set.unknown_weights(op, false);
    std::vector<int> rows;
    for (int i = 0; i < op.size(); ++i)
      if (wE(i) > 0.0) rows.push_back(i);
    // B = W_E^{1/2} Phi on the set rows; the minimum-norm density is
    // W_E^{-1/2} U S^{-1} V^T (-d), which avoids forming the Gram matrix.
    Eigen::MatrixXd B(rows.size(), K);
    for (std::size_t r = 0; r < rows.size(); ++r)
      B.row(r) = std::sqrt(wE(rows[r])) * spectrum.vectors().row(rows[r]).head(K);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double lo = static_cast<int>(rows.size()) >= K ? sv(K - 1) : 0.0;
    if (lo * lo < 1e-14)
      unreachable_mode(spectrum, svd.matrixV().col(std::min<Eigen::Index>(K, sv.size()) - 1));
    const Eigen::VectorXd scaled =
        svd.matrixU() * (svd.matrixV().transpose() * (-deficit)).cwiseQuotient(sv);
    out.kind = PayloadKind::density;
    out.density = Eigen::VectorXd::Zero(op.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      out.density(rows[r]) = scaled(r) / std::sqrt(wE(rows[r]));
    out.mass = wE.cwiseProduct(out.density);
    out.total_variation = vE.dot(out.density.cwiseAbs());
    out.conditioning = 1.0 / lo;
    return out;
  }

  const Eigen::MatrixXd A = atom_matrix(spectrum, set, K);
  const int P = static_cast<int>(A.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double top = sv.maxCoeff();
  int rank = 0;
  while (rank < sv.size() && sv(rank) > 1e-10 * top) ++rank;
  if (rank < K) unreachable_mode(spectrum, svd.matrixU().col(rank));
  const Eigen::VectorXd beta =
      svd.matrixV() * (svd.matrixU().leftCols(K).transpose() * (-deficit)).cwiseQuotient(sv);
  out.kind = PayloadKind::atoms;
  out.atom_unknowns = set.unknowns();
  out.atom_weights = beta;
  const Domain& domain = op.domain();
  for (int p = 0; p < P; ++p) {
    const int u = out.atom_unknowns[p];
    out.mass(u) = op.node_density()[domain.node_of_unknown(u)] * beta(p);
  }
  out.total_variation = beta.cwiseAbs().sum();
  out.conditioning = 1.0 / sv(K - 1);
  return out;
}

StepControl step_control(const Spectrum& spectrum, const ObservationSet& set, double cutoff,
                         const Eigen::VectorXd& deficit_field) {
  const int K = spectrum.count_below(cutoff);
  require(K >= 1, ErrorKind::invalid_argument, "cutoff lies below the first frequency");
  StepControl out = step_control(spectrum, set, spectrum.coefficients(deficit_field).head(K));
  out.cutoff = cutoff;
  return out;
}

namespace {

// One past the last mode whose deficit would still exceed the dissipation
// tolerance (relative to `scale`) at the horizon without control.
int required_modes(const Spectrum& spectrum, const Eigen::VectorXd& deficit, double remaining,
                   double scale, const SynthesisOptions& options) {
  int required = 0;
  for (int k = 0; k < deficit.size(); ++k)
    if (std::abs(deficit(k)) * std::exp(-spectrum.eigenvalue(k) * remaining) >
        options.dissipation_tolerance * scale)
      required = k + 1;
  return required;
}

// Number of modes to cancel at a step: the Lambda rule, shrunk while the
// moment problem is worse conditioned than the cap, but never below the
// modes that would not dissipate by the horizon on their own.
int choose_modes(const Spectrum& spectrum, const ObservationSet& set, double gap,
                 double remaining, const Eigen::VectorXd& deficit, double scale,
                 const SynthesisOptions& options, double& cutoff, double& conditioning) {
  const double rule = std::sqrt(options.c_lambda / gap);
  int K = std::min(spectrum.count_below(rule), spectrum.size());
  const int required = std::min(required_modes(spectrum, deficit, remaining, scale, options), K);
  cutoff = rule;
  if (K == 0) return 0;
  conditioning = moment_conditioning(spectrum, set, K);
  while (K > std::max(required, 1) && !(conditioning <= options.max_conditioning)) {
    --K;
    conditioning = moment_conditioning(spectrum, set, K);
    cutoff = spectrum.frequency(K - 1);
  }
  return K;
}

}  // namespace

ControlSchedule synthesize(const Spectrum& spectrum, const ObservationSet& set,
                           const TimeSequence& schedule, const Eigen::VectorXd& u0,
                           const Eigen::VectorXd& v0, const SynthesisOptions& options) {
  require(schedule.times.size() >= 2, ErrorKind::invalid_argument, "schedule needs two times");
  for (std::size_t j = 1; j < schedule.times.size(); ++j)
    require(schedule.times[j] > schedule.times[j - 1], ErrorKind::invalid_argument,
            "schedule times must increase");
  require(schedule.times.front() >= 0.0 && schedule.times.back() <= schedule.horizon,
          ErrorKind::invalid_argument, "schedule must lie in [0, T]");
  require(options.c_lambda > 0.0 && options.max_conditioning >= 1.0, ErrorKind::invalid_argument,
          "bad synthesis options");

  ControlSchedule out;
  out.horizon = schedule.horizon;
  out.initial = spectrum.coefficients(u0);
  out.target = spectrum.coefficients(v0);
  Eigen::VectorXd d = out.initial - out.target;
  out.initial_deficit = d.norm();
  double now = 0.0;
  const int steps = static_cast<int>(schedule.times.size()) - 1;
  for (int j = 0; j < steps; ++j) {
    const double tj = schedule.times[j];
    const double gap = schedule.times[j + 1] - tj;
    d = d.cwiseProduct(decay(spectrum, tj - now));
    now = tj;
    out.deficit_before.push_back(d.norm());

    StepControl step;
    if (d.norm() > options.skip_tolerance * out.initial_deficit) {
      double cutoff = 0.0, conditioning = 1.0;
      const int K = choose_modes(spectrum, set, gap, schedule.horizon - tj, d,
                                 out.initial_deficit, options, cutoff, conditioning);
      if (K > 0) {
        try {
          step = step_control(spectrum, set, d.head(K));
        } catch (const Error& e) {
          fail(e.kind(), "step " + std::to_string(j) + ": " + e.detail());
        }
        step.cutoff = cutoff;
        d += spectrum.vectors().transpose() * step.mass;
      }
    }
    if (step.mass.size() == 0) {
      step.mass = Eigen::VectorXd::Zero(spectrum.op().size());
      step.kind = set.kind() == SetKind::cell_mask ? PayloadKind::density : PayloadKind::atoms;
    }
    step.step = j;
    step.time = tj;
    step.gap = gap;
    out.deficit_after.push_back(d.norm());
    out.deficit_next.push_back(d.cwiseProduct(decay(spectrum, gap)).norm());
    out.steps.push_back(std::move(step));
  }

  const Simulation sim = simulate(spectrum, out);
  const Eigen::VectorXd target_T = out.target.cwiseProduct(decay(spectrum, schedule.horizon));
  out.terminal_deficit = (sim.terminal - target_T).norm();
  out.relative_deficit =
      out.initial_deficit > 0.0 ? out.terminal_deficit / out.initial_deficit : 0.0;
  out.terminal_error = sim.terminal_error;
  return out;
}

Simulation simulate(const Spectrum& spectrum, const ControlSchedule& schedule,
                    const Eigen::VectorXd& u0) {
  Simulation sim;
  Eigen::VectorXd a = u0.size() ? spectrum.coefficients(u0) : schedule.initial;
  require(a.size() == spectrum.size(), ErrorKind::invalid_argument,
          "initial state does not match the spectrum");
  double now = 0.0;
  sim.times.push_back(0.0);
  sim.states.push_back(a);
  for (const auto& step : schedule.steps) {
    require(step.time >= 0.0 && step.time < schedule.horizon, ErrorKind::invalid_argument,
            "impulse time outside [0, T)");
    require(step.time >= now, ErrorKind::invalid_argument, "impulses out of order");
    require(step.mass.size() == spectrum.op().size(), ErrorKind::invalid_argument,
            "impulse does not match the operator");
    a = a.cwiseProduct(decay(spectrum, step.time - now));
    now = step.time;
    sim.times.push_back(now);
    sim.states.push_back(a);
    a += spectrum.vectors().transpose() * step.mass;
    sim.times.push_back(now);
    sim.states.push_back(a);
  }
  a = a.cwiseProduct(decay(spectrum, schedule.horizon - now));
  sim.times.push_back(schedule.horizon);
  sim.states.push_back(a);
  sim.terminal = a;
  const Eigen::VectorXd target = schedule.target.size()
                                     ? Eigen::VectorXd(schedule.target.cwiseProduct(
                                           decay(spectrum, schedule.horizon)))
                                     : Eigen::VectorXd::Zero(a.size());
  const double err = (a - target).norm();
  const double scale = schedule.target.norm();
  sim.terminal_error = scale > 0.0 ? err / scale : err;
  return sim;
}

DistributedControl distributed_control(const Spectrum& spectrum, const SpaceTimeMask& mask,
                                       const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                                       const TimeSequence& schedule,
                                       const SynthesisOptions& options) {
  const DiscreteOperator& op = spectrum.op();
  const Domain& domain = op.domain();
  require(std::abs(mask.horizon - schedule.horizon) <= 1e-12 * schedule.horizon,
          ErrorKind::invalid_argument, "mask and schedule horizons differ");
  require(schedule.times.size() >= 2, ErrorKind::invalid_argument, "schedule needs two times");
  DistributedControl out;
  out.slices = fubini_slices(domain, mask);
  const double dt_slab = mask.slab_width();
  const int N = spectrum.size();
  const Eigen::ArrayXd lam2 = spectrum.eigenvalues().array();

  std::vector<Eigen::VectorXd> slab_weights(mask.slabs());
  for (int k : out.slices.good_slabs)
    slab_weights[k] = ObservationSet::from_cells(domain, mask.slab_cells[k]).unknown_weights(op);

  Eigen::VectorXd d = spectrum.coefficients(u0) - spectrum.coefficients(v0);
  out.initial_deficit = d.norm();
  double now = 0.0;
  const int intervals = static_cast<int>(schedule.times.size()) - 1;
  for (int j = 0; j < intervals; ++j) {
    const double a = schedule.times[j], b = schedule.times[j + 1];
    d = d.cwiseProduct(decay(spectrum, a - now));
    now = a;
    const Eigen::VectorXd free_end = d.cwiseProduct(decay(spectrum, b - a));
    if (d.norm() <= options.skip_tolerance * out.initial_deficit) {
      d = free_end;
      now = b;
      continue;
    }
    // Pieces: intersections of [a, b) with the good slabs.
    struct Piece {
      int slab;
      double start, duration;
      Eigen::ArrayXd psi;  // mean of e^{-lambda^2 (b - tau)} over the piece
    };
    std::vector<Piece> pieces;
    for (int k : out.slices.good_slabs) {
      const double lo = std::max(a, k * dt_slab), hi = std::min(b, (k + 1) * dt_slab);
      if (hi - lo <= 1e-14 * schedule.horizon) continue;
      const double dur = hi - lo;
      Eigen::ArrayXd psi(N);
      for (int m = 0; m < N; ++m) {
        const double x = lam2(m) * dur;
        const double avg = x > 1e-12 ? -std::expm1(-x) / x : 1.0;
        psi(m) = std::exp(-lam2(m) * (b - hi)) * avg;
      }
      pieces.push_back({k, lo, dur, psi});
    }
    if (pieces.empty()) {
      d = free_end;
      now = b;
      continue;
    }
    const double rule = std::sqrt(options.c_lambda / (b - a));
    int K = std::min(spectrum.count_below(rule), N);
    const int required = std::min(
        required_modes(spectrum, d, schedule.horizon - a, out.initial_deficit, options), K);
    if (K == 0) {
      d = free_end;
      now = b;
      continue;
    }
    auto moment_matrix = [&](int modes) {
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(modes, modes);
      for (const auto& p : pieces) {
        const Eigen::MatrixXd Phi = spectrum.vectors().leftCols(modes);
        const Eigen::MatrixXd G = Phi.transpose() * slab_weights[p.slab].asDiagonal() * Phi;
        const Eigen::VectorXd s = p.psi.head(modes).matrix();
        M += p.duration * s.asDiagonal() * G * s.asDiagonal();
      }
      return Eigen::MatrixXd(0.5 * (M + M.transpose()));
    };
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moment_matrix(K));
    auto cond = [&] {
      const double lo = eig.eigenvalues()(0);
      return lo > 0.0 ? 1.0 / std::sqrt(lo) : kInf;
    };
    while (K > std::max(required, 1) && !(cond() <= options.max_conditioning)) {
      --K;
      eig.compute(moment_matrix(K));
    }
    if (eig.eigenvalues()(0) < 1e-14 * std::max(1.0, eig.eigenvalues().maxCoeff()))
      try {
        unreachable_mode(spectrum, eig.eigenvectors().col(0));
      } catch (const Error& e) {
        fail(e.kind(), "interval " + std::to_string(j) + ": " + e.detail());
      }
    const Eigen::VectorXd rhs = -free_end.head(K);
    const Eigen::VectorXd mu =
        eig.eigenvectors() * (eig.eigenvectors().transpose() * rhs).cwiseQuotient(eig.eigenvalues());
    Eigen::VectorXd end = free_end;
    for (const auto& p : pieces) {
      ControlPiece piece;
      piece.interval = j;
      piece.slab = p.slab;
      piece.start = p.start;
      piece.duration = p.duration;
      const Eigen::VectorXd coeff = p.psi.head(K).matrix().cwiseProduct(mu);
      piece.density = spectrum.vectors().leftCols(K) * coeff;
      for (int i = 0; i < op.size(); ++i)
        if (slab_weights[p.slab](i) == 0.0) piece.density(i) = 0.0;
      const Eigen::VectorXd moments =
          spectrum.vectors().transpose() * slab_weights[p.slab].cwiseProduct(piece.density);
      end += p.duration * (p.psi * moments.array()).matrix();
      out.sup_norm = std::max(out.sup_norm, piece.density.cwiseAbs().maxCoeff());
      out.pieces.push_back(std::move(piece));
    }
    d = end;
    now = b;
  }
  d = d.cwiseProduct(decay(spectrum, schedule.horizon - now));
  out.terminal_deficit = d.norm();
  out.relative_deficit = out.initial_deficit > 0.0 ? out.terminal_deficit / out.initial_deficit : 0.0;
  const double scale = spectrum.coefficients(v0).norm();
  out.terminal_error = scale > 0.0 ? out.terminal_deficit / scale : out.terminal_deficit;
  return out;
}

CostLedger cost_report(const ControlSchedule& schedule, double rate) {
  require(rate >= 0.0, ErrorKind::invalid_argument, "cost rate must be non-negative");
  CostLedger ledger;
  ledger.rate = rate;
  double log_growth = -kInf, log_decay = -kInf;
  double prev_term = 0.0;
  for (const auto& step : schedule.steps) {
    LedgerRow row;
    row.step = step.step;
    row.time = step.time;
    row.gap = step.gap;
    row.variation = step.total_variation;
    if (row.variation > 0.0) {
      row.log_term = rate / row.gap + std::log(row.variation);
      row.term = std::exp(row.log_term);
      const double remaining = schedule.horizon - step.time;
      log_growth = std::max(log_growth, std::log(row.variation) - rate / remaining);
      log_decay = std::max(log_decay, std::log(row.variation) + rate / remaining);
      if (prev_term > 0.0) ledger.last_ratio = row.term / prev_term;
      prev_term = row.term;
    } else {
      row.log_term = -kInf;
    }
    ledger.total += row.term;
    row.partial_sum = ledger.total;
    ledger.last_increment = row.term;
    ledger.rows.push_back(row);
  }
  ledger.growth_constant = std::exp(log_growth);
  ledger.decay_constant = std::exp(log_decay);
  ledger.converged = std::isfinite(ledger.total) && ledger.last_increment <= 1e-8 * ledger.total;
  return ledger;
}

}  // namespace speclab
