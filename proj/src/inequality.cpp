#include "speclab/inequality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "speclab/error.hpp"
#include "speclab/fit.hpp"
#include "speclab/lp.hpp"
#include "speclab/parallel.hpp"

namespace speclab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int low_mode_count(const Spectrum& spectrum, double cutoff) {
  require(cutoff >= 0.0, ErrorKind::invalid_argument, "cutoff must be non-negative");
  const int n = spectrum.count_below(cutoff);
  require(n >= 1, ErrorKind::invalid_argument,
          "cutoff " + std::to_string(cutoff) + " lies below the first frequency");
  return n;
}

}  // namespace

const char* to_string(NormPair norms) noexcept {
  switch (norms) {
    case NormPair::l2_l2: return "L2/L2";
    case NormPair::l2_l1: return "L2/L1";
    case NormPair::linf_sup: return "Linf/sup";
  }
  return "?";
}

double observed_norm(const DiscreteOperator& op, const ObservationSet& set,
                     const Eigen::VectorXd& field) {
  require(field.size() == op.size(), ErrorKind::invalid_argument,
          "field length does not match the unknown count");
  if (set.kind() == SetKind::point_cloud) {
    double m = 0.0;
    for (int u : set.unknowns()) m = std::max(m, std::abs(field(u)));
    return m;
  }
  return set.unknown_weights(op).dot(field.cwiseAbs());
}

// ---------------------------------------------------------------- L2 / L2

L2Constant gram_constant(const Eigen::MatrixXd& Phi, const Eigen::VectorXd& set_weights) {
  require(Phi.rows() == set_weights.size(), ErrorKind::invalid_argument,
          "weights do not match the mode block");
  const Eigen::MatrixXd M = set_weights.cwiseSqrt().asDiagonal() * Phi;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  L2Constant out;
  out.modes = static_cast<int>(Phi.cols());
  const double sigma = svd.singularValues().size() ? svd.singularValues().minCoeff() : 0.0;
  out.lambda_min = sigma * sigma;
  if (Phi.cols() > Phi.rows() || out.lambda_min < 1e-14) {
    out.observable = false;
    out.constant = kInf;
  } else {
    out.constant = 1.0 / sigma;
  }
  return out;
}

L2Constant constant_L2(const Spectrum& spectrum, const ObservationSet& set, double cutoff) {
  const int n = low_mode_count(spectrum, cutoff);
  return gram_constant(spectrum.vectors().leftCols(n), set.unknown_weights(spectrum.op()));
}

// ---------------------------------------------------------------- L2 / L1

L1Constant constant_L1(const Spectrum& spectrum, const ObservationSet& set, double cutoff,
                       const L1Options& options) {
  require(options.restarts >= 1 && options.max_iterations >= 1, ErrorKind::invalid_argument,
          "IRLS needs at least one restart and one iteration");
  const int n = low_mode_count(spectrum, cutoff);
  const Eigen::VectorXd wE = set.unknown_weights(spectrum.op());
  std::vector<int> rows;
  for (int i = 0; i < wE.size(); ++i)
    if (wE(i) > 0.0) rows.push_back(i);
  Eigen::MatrixXd Phi(rows.size(), n);
  Eigen::VectorXd weights(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Phi.row(r) = spectrum.vectors().row(rows[r]).head(n);
    weights(r) = wE(rows[r]);
  }
  auto objective = [&](const Eigen::VectorXd& c) {
    return weights.dot((Phi * c).cwiseAbs());
  };
  auto smallest = [&](const Eigen::VectorXd& omega) {
    const Eigen::MatrixXd H = Phi.transpose() * omega.asDiagonal() * Phi;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (H + H.transpose()));
    return Eigen::VectorXd(eig.eigenvectors().col(0));
  };

  L1Constant out;
  out.modes = n;
  const L2Constant l2 = gram_constant(Phi, weights);
  out.l2_floor = l2.observable ? l2.constant / std::sqrt(weights.sum()) : kInf;

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  double best = kInf;
  bool best_converged = true;
  for (int restart = 0; restart < options.restarts; ++restart) {
    Eigen::VectorXd c(n);
    if (restart == 0) {
      c = smallest(weights);
    } else {
      for (int k = 0; k < n; ++k) c(k) = normal(rng);
      c.normalize();
    }
    double value = objective(c);
    Eigen::VectorXd local_best = c;
    double local_value = value;
    bool converged = false;
    for (int it = 0; it < options.max_iterations; ++it) {
      const Eigen::VectorXd phi = Phi * c;
      const Eigen::VectorXd omega =
          (weights.array() / phi.cwiseAbs().array().max(1e-8)).matrix();
      Eigen::VectorXd next = smallest(omega);
      if (next.dot(c) < 0.0) next = -next;
      const double next_value = objective(next);
      if (next_value < local_value) {
        local_value = next_value;
        local_best = next;
      }
      const double change = std::abs(next_value - value);
      c = next;
      value = next_value;
      if (change <= options.tolerance * std::max(value, 1e-300)) {
        converged = true;
        break;
      }
    }
    if (local_value < best) {
      best = local_value;
      out.certificate = local_best;
      best_converged = converged;
    }
  }
  out.approximate = !best_converged;
  out.constant = best > 0.0 ? 1.0 / best : kInf;
  return out;
}

// ---------------------------------------------------------------- Linf / sup

SupConstant sup_constant(const Eigen::MatrixXd& Phi, const std::vector<int>& observed) {
  require(!observed.empty(), ErrorKind::empty_set, "no observed rows");
  const int n = static_cast<int>(Phi.cols());
  const int m = static_cast<int>(observed.size());
  Eigen::MatrixXd A(m, n);
  for (int r = 0; r < m; ++r) A.row(r) = Phi.row(observed[r]);

  SupConstant out;
  out.modes = n;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  const double top = sv.size() ? sv.maxCoeff() : 0.0;
  if (m < n || !(top > 0.0) || sv.minCoeff() <= 1e-12 * top) {
    out.observable = false;
    out.constant = kInf;
    return out;
  }
  Eigen::MatrixXd lp(n, 2 * m);
  lp.leftCols(m) = A.transpose();
  lp.rightCols(m) = -A.transpose();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(2 * m);
  out.constant = 0.0;
  for (int y = 0; y < Phi.rows(); ++y) {
    const Eigen::VectorXd g = Phi.row(y).transpose();
    if (g.cwiseAbs().maxCoeff() == 0.0) continue;
    const LpResult r = solve_standard_lp(lp, g, ones);
    if (r.status != LpStatus::optimal)
      fail(ErrorKind::numerical_failure, "sup-constant LP failed at node " + std::to_string(y));
    if (r.value > out.constant) {
      out.constant = r.value;
      out.argmax_unknown = y;
      out.certificate = r.dual;
    }
  }
  return out;
}

SupConstant constant_sup(const Spectrum& spectrum, const ObservationSet& set, double cutoff) {
  require(set.kind() == SetKind::point_cloud, ErrorKind::invalid_argument,
          "sup constant needs a point cloud");
  const int n = low_mode_count(spectrum, cutoff);
  return sup_constant(spectrum.vectors().leftCols(n), set.unknowns());
}

// ---------------------------------------------------------------- sweeps

ConstantSweep sweep_constants(const Spectrum& spectrum, const ObservationSet& set, NormPair norms,
                              std::vector<double> cutoffs, int threads) {
  std::sort(cutoffs.begin(), cutoffs.end());
  ConstantSweep sweep;
  sweep.norms = norms;
  sweep.entries.resize(cutoffs.size());
  parallel_for(static_cast<int>(cutoffs.size()), threads, [&](int i) {
    SweepEntry e;
    e.cutoff = cutoffs[i];
    switch (norms) {
      case NormPair::l2_l2: {
        const auto c = constant_L2(spectrum, set, e.cutoff);
        e.constant = c.constant;
        e.modes = c.modes;
        e.observable = c.observable;
        break;
      }
      case NormPair::l2_l1: {
        const auto c = constant_L1(spectrum, set, e.cutoff);
        e.constant = c.constant;
        e.modes = c.modes;
        e.observable = std::isfinite(c.constant);
        break;
      }
      case NormPair::linf_sup: {
        const auto c = constant_sup(spectrum, set, e.cutoff);
        e.constant = c.constant;
        e.modes = c.modes;
        e.observable = c.observable;
        break;
      }
    }
    sweep.entries[i] = e;
  });
  return sweep;
}

GrowthFit fit_growth(const ConstantSweep& sweep) {
  std::vector<double> x, y;
  for (const auto& e : sweep.entries) {
    if (!std::isfinite(e.constant) || e.constant <= 0.0) continue;
    x.push_back(e.cutoff);
    y.push_back(std::log(e.constant));
  }
  require(x.size() >= 5, ErrorKind::insufficient_data,
          "growth fit needs at least 5 finite sweep points, got " + std::to_string(x.size()));
  GrowthFit fit;
  fit.points = static_cast<int>(x.size());
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (*hi - *lo <= 1e-12) {
    fit.degenerate_flat = true;
    fit.rate = 0.0;
    fit.prefactor = std::exp(y.front());
    fit.r2 = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  const LineFit line = fit_line(x, y);
  fit.rate = line.slope;
  fit.prefactor = std::exp(line.intercept);
  fit.r2 = line.r2;
  return fit;
}

// ---------------------------------------------------------------- interpolation

double required_constant(double lhs, double obs, double earlier, double tau, double epsilon) {
  if (lhs <= 0.0) return 0.0;
  if (obs <= 0.0) return kInf;
  const double target = std::log(lhs) - (1.0 - epsilon) * std::log(obs) - epsilon * std::log(earlier);
  // g(N) = log N + N / tau is increasing; bisect on log N.
  auto g = [&](double logn) { return logn + std::exp(logn) / tau; };
  double lo = -800.0, hi = 1.0;
  while (g(hi) < target) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < target ? lo : hi) = mid;
  }
  return std::exp(hi);
}

bool interpolation_holds(const InterpolationReport& r, double n, double tau, double epsilon) {
  if (r.lhs <= 0.0) return true;
  if (!(n > 0.0) || r.observation <= 0.0) return false;
  const double rhs = std::log(n) + n / tau + (1.0 - epsilon) * std::log(r.observation) +
                     epsilon * std::log(r.earlier);
  return std::log(r.lhs) <= rhs + 1e-12 * std::abs(rhs);
}

InterpolationReport interpolation_check(const Spectrum& spectrum, const ObservationSet& set,
                                        const Eigen::VectorXd& f, double s, double t,
                                        double epsilon) {
  require(s >= 0.0 && t > s, ErrorKind::invalid_argument, "interpolation needs 0 <= s < t");
  require(epsilon > 0.0 && epsilon < 1.0, ErrorKind::invalid_argument,
          "interpolation exponent must lie in (0, 1)");
  const double tau = t - s;
  const Eigen::VectorXd c = spectrum.coefficients(f);
  const Eigen::ArrayXd lam2 = spectrum.eigenvalues().array();
  const Eigen::VectorXd ct = (c.array() * (-t * lam2).exp()).matrix();
  const Eigen::VectorXd cs = (c.array() * (-s * lam2).exp()).matrix();

  InterpolationReport r;
  r.lhs = ct.norm();
  r.earlier = cs.norm();
  r.observation = observed_norm(spectrum.op(), set, spectrum.synthesize(ct));
  r.required_n = required_constant(r.lhs, r.observation, r.earlier, tau, epsilon);

  if (r.observation <= 0.0) {
    r.alpha_numeric = r.alpha_explicit = kInf;
    r.cutoff = kInf;
    return r;
  }
  // h(u) = e^{eps u} obs + e^{-(1-eps) u} earlier is convex in u = log alpha;
  // bisect on the sign of h' over u >= 0.
  auto dh = [&](double u) {
    return epsilon * std::exp(epsilon * u) * r.observation -
           (1.0 - epsilon) * std::exp(-(1.0 - epsilon) * u) * r.earlier;
  };
  double lo = 0.0, hi = 1.0;
  if (dh(0.0) < 0.0) {
    while (dh(hi) < 0.0) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 4e-16 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (dh(mid) < 0.0 ? lo : hi) = mid;
    }
  } else {
    hi = 0.0;
  }
  const double u = 0.5 * (lo + hi);
  r.alpha_numeric = std::exp(u);
  r.alpha_explicit = r.earlier / r.observation;
  r.alpha_gap = std::abs(r.alpha_numeric - r.alpha_explicit) / r.alpha_explicit;
  r.cutoff = std::sqrt(u / tau);

  const int low = spectrum.count_below(r.cutoff);
  r.tail = ct.tail(ct.size() - low).norm();
  r.tail_bound = r.earlier / r.alpha_numeric;
  r.tail_ok = r.tail <= r.tail_bound * (1.0 + 1e-12) + 1e-300;
  return r;
}

// ---------------------------------------------------------------- time sequences

void validate_lr_sequence(const TimeSequence& seq) {
  require(seq.tag == SequenceTag::lr_geometric, ErrorKind::invalid_argument,
          "expected an lr_geometric sequence");
  require(seq.times.size() >= 3, ErrorKind::invalid_argument, "sequence needs at least 3 times");
  require(seq.ratio > 0.0 && seq.ratio < 1.0, ErrorKind::invalid_argument,
          "sequence ratio must lie in (0, 1)");
  for (std::size_t i = 1; i < seq.times.size(); ++i)
    require(seq.times[i] > seq.times[i - 1] && seq.times[i] <= seq.horizon,
            ErrorKind::invalid_argument, "sequence times must increase inside (0, T]");
  for (std::size_t n = 1; n + 1 < seq.times.size(); ++n) {
    const double prev = seq.times[n] - seq.times[n - 1];
    const double next = seq.times[n + 1] - seq.times[n];
    require(next >= seq.ratio * prev * (1.0 - 1e-12), ErrorKind::invalid_argument,
            "gap " + std::to_string(n) + " shrinks faster than the sequence ratio");
  }
}

IntervalSet::IntervalSet(std::vector<std::pair<double, double>> intervals)
    : intervals_(std::move(intervals)) {
  std::sort(intervals_.begin(), intervals_.end());
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    require(intervals_[i].second >= intervals_[i].first, ErrorKind::invalid_argument,
            "interval endpoints are reversed");
    if (i > 0)
      require(intervals_[i].first >= intervals_[i - 1].second, ErrorKind::invalid_argument,
              "intervals overlap");
  }
}

double IntervalSet::measure() const {
  double m = 0.0;
  for (const auto& [a, b] : intervals_) m += b - a;
  return m;
}

double IntervalSet::measure_in(double a, double b) const {
  double m = 0.0;
  for (const auto& [lo, hi] : intervals_) {
    const double l = std::max(lo, a), r = std::min(hi, b);
    if (r > l) m += r - l;
  }
  return m;
}

IntervalSet fat_cantor(double measure_fraction, int levels, double lo, double hi) {
  require(measure_fraction > 0.0 && measure_fraction < 1.0, ErrorKind::invalid_argument,
          "fat Cantor measure fraction must lie in (0, 1)");
  require(levels >= 1 && levels <= 24, ErrorKind::invalid_argument,
          "fat Cantor level count must lie in [1, 24]");
  require(hi > lo, ErrorKind::invalid_argument, "empty fat Cantor interval");
  const double length = hi - lo;
  const double gamma = 2.0 * (1.0 - measure_fraction) / (1.0 - std::ldexp(1.0, -levels));
  std::vector<std::pair<double, double>> pieces = {{lo, hi}};
  for (int n = 1; n <= levels; ++n) {
    const double gap = gamma * std::pow(4.0, -n) * length;
    std::vector<std::pair<double, double>> next;
    for (const auto& [a, b] : pieces) {
      require(b - a > gap, ErrorKind::invalid_argument,
              "removal stage " + std::to_string(n) + " swallows a whole piece");
      const double mid = 0.5 * (a + b);
      next.emplace_back(a, mid - 0.5 * gap);
      next.emplace_back(mid + 0.5 * gap, b);
    }
    pieces = std::move(next);
  }
  return IntervalSet(std::move(pieces));
}

TimeSequence phung_wang_times(const IntervalSet& J, double horizon, double z, double l,
                              int depth, int scan) {
  require(z > 1.0, ErrorKind::invalid_argument, "geometric factor z must exceed 1");
  require(horizon > 0.0 && l >= 0.0 && l < horizon, ErrorKind::invalid_argument,
          "density point must lie in [0, T)");
  require(depth >= 1 && scan >= 2, ErrorKind::invalid_argument, "depth and scan must be positive");
  bool in_closure = false;
  for (const auto& [a, b] : J.intervals()) in_closure = in_closure || (a <= l && l <= b);
  require(in_closure, ErrorKind::invalid_argument, "l is not in the closure of J");

  double best_min = -1.0;
  for (int i = 1; i < scan; ++i) {
    const double l1 = l + (horizon - l) * (1.0 - static_cast<double>(i) / scan);
    std::vector<double> times = {l1};
    std::vector<double> ratios;
    double worst = kInf;
    for (int m = 1; m <= depth; ++m) {
      const double lm = times.back();
      const double next = l + std::pow(z, -m) * (l1 - l);
      const double ratio = J.measure_in(next, lm) / (lm - next);
      times.push_back(next);
      ratios.push_back(ratio);
      worst = std::min(worst, ratio);
      if (ratio < 1.0 / 3.0) break;
    }
    best_min = std::max(best_min, worst);
    if (static_cast<int>(ratios.size()) == depth && worst >= 1.0 / 3.0) {
      TimeSequence seq;
      seq.times = std::move(times);
      seq.ratio = 1.0 / z;
      seq.horizon = horizon;
      seq.tag = SequenceTag::phung_wang;
      seq.anchor = l;
      seq.measured_ratios = std::move(ratios);
      return seq;
    }
  }
  fail(ErrorKind::search_failure,
       "no l_1 satisfies the density condition to depth " + std::to_string(depth) +
           " (best worst-case ratio " + std::to_string(best_min) + ")");
}

// ---------------------------------------------------------------- telescoping

TelescopeReport telescope_check(const Spectrum& spectrum, const ObservationSet& set,
                                const TimeSequence& seq, const Eigen::VectorXd& f, double d,
                                double b) {
  validate_lr_sequence(seq);
  require(d > 0.0 && b > 0.0, ErrorKind::invalid_argument, "D and B must be positive");
  const double T = seq.horizon;
  const Eigen::VectorXd c = spectrum.coefficients(f);
  const Eigen::ArrayXd lam2 = spectrum.eigenvalues().array();
  auto at = [&](double s) { return Eigen::VectorXd((c.array() * (-s * lam2).exp()).matrix()); };

  TelescopeReport rep;
  rep.b = b;
  rep.d_multiple = 1.0 / seq.ratio;
  rep.lhs = at(T).norm();
  rep.log_sup = -kInf;
  const int count = static_cast<int>(seq.times.size());
  std::vector<double> next_norm;
  for (int n = 0; n + 1 < count; ++n) {
    TelescopeStep st;
    st.s = T - seq.times[n];
    st.gap = seq.times[n + 1] - seq.times[n];
    const Eigen::VectorXd cn = at(st.s);
    st.norm = cn.norm();
    st.observation = observed_norm(spectrum.op(), set, spectrum.synthesize(cn));
    st.log_term = st.observation > 0.0 ? -d / st.gap + std::log(st.observation) : -kInf;
    rep.log_sup = std::max(rep.log_sup, st.log_term);
    next_norm.push_back(at(T - seq.times[n + 1]).norm());
    rep.steps.push_back(st);
  }
  rep.constant = rep.lhs > 0.0 ? std::exp(std::log(rep.lhs) - rep.log_sup) : 0.0;

  // Per-step inequality with t_1 = s_{n+1}, t_2 = s_n:
  //   e^{-A/g} a_n - e^{-D A/g} a_{n+1} <= C e^{-B/g} obs_n,
  // with D = 1/rho and A >= 2B; pick A minimizing the needed C.
  const double dm = rep.d_multiple;
  auto log_ratios = [&](double A) {
    std::vector<double> out;
    for (std::size_t n = 0; n < rep.steps.size(); ++n) {
      const auto& st = rep.steps[n];
      const double diff = st.norm - std::exp(-(dm - 1.0) * A / st.gap) * next_norm[n];
      if (diff <= 0.0 || st.observation <= 0.0) {
        out.push_back(diff <= 0.0 ? -kInf : kInf);
        continue;
      }
      out.push_back(-(A - b) / st.gap + std::log(diff) - std::log(st.observation));
    }
    return out;
  };
  double best_log = kInf;
  for (int k = 0; k <= 80; ++k) {
    const double A = 2.0 * b * std::pow(1.25, k);
    const auto lr = log_ratios(A);
    const double worst = *std::max_element(lr.begin(), lr.end());
    if (worst < best_log) {
      best_log = worst;
      rep.a = A;
    }
  }
  rep.step_constant = std::exp(best_log);
  const auto lr = log_ratios(rep.a);
  rep.max_residual = -kInf;
  for (std::size_t n = 0; n < rep.steps.size(); ++n) {
    // (lhs - rhs) / (C e^{-B/g} obs) = ratio / C - 1.
    const double res = std::isinf(lr[n]) && lr[n] < 0 ? -1.0 : std::exp(lr[n] - best_log) - 1.0;
    rep.steps[n].residual = res;
    rep.max_residual = std::max(rep.max_residual, res);
  }
  return rep;
}

// ---------------------------------------------------------------- Fubini slices

SpaceTimeMask product_mask(const ObservationSet& set, double horizon, int slabs) {
  require(set.kind() == SetKind::cell_mask, ErrorKind::invalid_argument,
          "space-time products need a cell mask");
  require(horizon > 0.0 && slabs >= 1, ErrorKind::invalid_argument, "bad slab layout");
  SpaceTimeMask mask;
  mask.horizon = horizon;
  mask.slab_cells.assign(slabs, set.cells());
  return mask;
}

SpaceTimeMask random_space_time_mask(const Domain& domain, double horizon, int slabs,
                                     double density, std::uint64_t seed) {
  require(horizon > 0.0 && slabs >= 1, ErrorKind::invalid_argument, "bad slab layout");
  require(density > 0.0 && density <= 1.0, ErrorKind::invalid_argument,
          "density must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  const double scale = 1.0 / 18446744073709551616.0;  // 2^-64
  SpaceTimeMask mask;
  mask.horizon = horizon;
  mask.slab_cells.resize(slabs);
  for (int k = 0; k < slabs; ++k)
    for (int c = 0; c < domain.cell_count(); ++c)
      if (static_cast<double>(rng()) * scale < density) mask.slab_cells[k].push_back(c);
  return mask;
}

FubiniSlices fubini_slices(const Domain& domain, const SpaceTimeMask& mask) {
  require(mask.horizon > 0.0 && mask.slabs() >= 1, ErrorKind::invalid_argument,
          "bad slab layout");
  FubiniSlices out;
  const double dt = mask.slab_width();
  for (const auto& cells : mask.slab_cells) {
    const double m = domain.cell_volume() * static_cast<double>(cells.size());
    out.slice_measure.push_back(m);
    out.measure += dt * m;
  }
  require(out.measure > 0.0, ErrorKind::invalid_argument, "space-time set has zero measure");
  out.threshold = out.measure / (2.0 * mask.horizon);
  for (int k = 0; k < mask.slabs(); ++k)
    if (out.slice_measure[k] >= out.threshold * (1.0 - 1e-12)) out.good_slabs.push_back(k);
  out.good_measure = dt * static_cast<double>(out.good_slabs.size());
  out.bound = out.measure / (2.0 * mask.horizon * domain.volume());
  out.holds = out.good_measure >= out.bound * (1.0 - 1e-12);
  return out;
}

}  // namespace speclab
