#include "speclab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "speclab/doubling.hpp"
#include "speclab/error.hpp"
#include "speclab/operator.hpp"
#include "speclab/parallel.hpp"

namespace speclab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash_hex(const json& config) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  return buf;
}

json load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config_validation, "cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::config_validation, path.string() + ": " + e.what());
  }
}

// ------------------------------------------------------------------ parsing

namespace {

// Accepts plain numbers and strings such as "pi", "pi/2", "2pi", "0.5*pi".
double parse_number(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    static const std::regex pattern(
        R"(^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)?\s*\*?\s*pi\s*(?:/\s*([0-9]*\.?[0-9]+))?\s*$)");
    std::smatch m;
    const std::string s = j.get<std::string>();
    if (std::regex_match(s, m, pattern)) {
      double v = M_PI;
      if (m[1].matched) v *= std::stod(m[1].str());
      if (m[2].matched) v /= std::stod(m[2].str());
      return v;
    }
  }
  fail(ErrorKind::config_validation, where + ": expected a number (or a multiple of pi)");
}

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorKind::config_validation, label() + ": expected an object");
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string label() const { return path_.empty() ? "config" : path_; }

  [[noreturn]] void bad(const std::string& key, const std::string& msg) const {
    fail(ErrorKind::config_validation, where(key) + ": " + msg);
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& get(const std::string& key) {
    if (!has(key)) bad(key, "missing required field");
    return j_.at(key);
  }

  double number(const std::string& key) { return parse_number(get(key), where(key)); }
  double number(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }
  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) bad(key, "must be a positive finite number");
    return v;
  }

  int integer(const std::string& key, int lo, int hi) {
    const json& v = get(key);
    if (!v.is_number_integer()) bad(key, "expected an integer");
    const long long x = v.get<long long>();
    if (x < lo || x > hi)
      bad(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(x);
  }
  int integer(const std::string& key, int fallback, int lo, int hi) {
    return has(key) ? integer(key, lo, hi) : fallback;
  }

  std::string string(const std::string& key) {
    const json& v = get(key);
    if (!v.is_string()) bad(key, "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
  }

  // A scalar is read as a one-element list.
  std::vector<double> numbers(const std::string& key) {
    const json& v = get(key);
    std::vector<double> out;
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(parse_number(v[i], where(key) + "[" + std::to_string(i) + "]"));
    } else {
      out.push_back(parse_number(v, where(key)));
    }
    return out;
  }

  Reader child(const std::string& key) { return Reader(get(key), where(key)); }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) bad(item.key(), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

DomainSpec parse_domain(Reader r) {
  DomainSpec d;
  const std::vector<double> lengths = r.numbers("length");
  if (lengths.empty() || lengths.size() > 2) r.bad("length", "expected one or two extents");
  d.dimension = static_cast<int>(lengths.size());
  if (r.has("dimension") && r.integer("dimension", 1, 2) != d.dimension)
    r.bad("dimension", "does not match the number of extents in length");
  for (double l : lengths)
    if (!(l > 0.0) || !std::isfinite(l)) r.bad("length", "extents must be positive");
  const json& cells = r.get("cells");
  std::vector<int> n;
  if (cells.is_array()) {
    for (const auto& c : cells) {
      if (!c.is_number_integer()) r.bad("cells", "expected integers");
      n.push_back(c.get<int>());
    }
  } else if (cells.is_number_integer()) {
    n.push_back(cells.get<int>());
  } else {
    r.bad("cells", "expected an integer or a list of integers");
  }
  if (static_cast<int>(n.size()) != d.dimension) r.bad("cells", "must have one entry per extent");
  for (int c : n)
    if (c < 2 || c > 100000) r.bad("cells", "cell counts must lie in [2, 100000]");
  d.lx = lengths[0];
  d.nx = n[0];
  if (d.dimension == 2) {
    d.ly = lengths[1];
    d.ny = n[1];
  }
  const std::string bc = r.string("bc", "dirichlet");
  try {
    d.bc = parse_boundary_condition(bc);
  } catch (const Error&) {
    r.bad("bc", "expected \"dirichlet\" or \"neumann\"");
  }
  r.finish();
  return d;
}

Eigen::MatrixXd parse_matrix(Reader& r, const std::string& key, int dim) {
  const json& v = r.get(key);
  if (v.is_number() || v.is_string()) {
    return parse_number(v, r.where(key)) * Eigen::MatrixXd::Identity(dim, dim);
  }
  if (!v.is_array() || static_cast<int>(v.size()) != dim)
    r.bad(key, "expected a scalar or a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
  Eigen::MatrixXd m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    if (!v[i].is_array() || static_cast<int>(v[i].size()) != dim)
      r.bad(key, "rows must have " + std::to_string(dim) + " entries");
    for (int j = 0; j < dim; ++j)
      m(i, j) = parse_number(v[i][j], r.where(key) + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
  }
  return m;
}

CoefficientSpec parse_coefficients(Reader r, const DomainSpec& domain,
                                   std::optional<std::uint64_t> seed) {
  const std::string type = r.string("type", "constant");
  CoefficientSpec out;
  if (type == "constant") {
    ConstantCoefficients c;
    if (r.has("metric")) {
      const Eigen::MatrixXd m = parse_matrix(r, "metric", domain.dimension);
      c.metric_matrix = m;
    }
    c.density = r.positive("density", 1.0);
    out = c;
  } else if (type == "piecewise-linear") {
    PiecewiseLinearCoefficients c;
    c.lip_metric = r.positive("lip_metric", 1.0);
    c.lip_density = r.positive("lip_density", 1.0);
    c.knots = r.integer("knots", 8, 2, 4096);
    if (!seed) fail(ErrorKind::config_validation, "seed: required by coefficients.type = piecewise-linear");
    c.seed = *seed;
    out = c;
  } else if (type == "table") {
    const std::string path = r.string("path");
    const double lm = r.positive("lip_metric", 1.0);
    const double ld = r.positive("lip_density", 1.0);
    out = load_coefficient_table(path, domain.build(), lm, ld);
  } else {
    r.bad("type", "expected constant, piecewise-linear or table");
  }
  r.finish();
  return out;
}

SetSpec parse_set(Reader r, const DomainSpec& domain, std::optional<std::uint64_t> seed) {
  SetSpec s;
  s.type = r.string("type", "full");
  if (s.type == "full") {
  } else if (s.type == "box") {
    const std::vector<double> lo = r.numbers("lo"), hi = r.numbers("hi");
    if (static_cast<int>(lo.size()) != domain.dimension || lo.size() != hi.size())
      r.bad("lo", "lo and hi need one entry per dimension");
    s.x0 = lo[0];
    s.x1 = hi[0];
    if (domain.dimension == 2) {
      s.y0 = lo[1];
      s.y1 = hi[1];
    }
    if (!(s.x1 > s.x0) || (domain.dimension == 2 && !(s.y1 > s.y0)))
      r.bad("hi", "box must have positive extent");
  } else if (s.type == "cantor") {
    s.ratio = r.number("ratio", 1.0 / 3.0);
    if (!(s.ratio > 0.0 && s.ratio < 0.5)) r.bad("ratio", "must lie in (0, 1/2)");
    s.levels = r.integer("levels", 1, 20);
    s.placement.axis = r.integer("axis", 0, 0, domain.dimension - 1);
    const double extent = s.placement.axis == 0 ? domain.lx : domain.ly;
    s.placement.lo = r.number("lo", 0.0);
    s.placement.hi = r.number("hi", extent);
    if (!(s.placement.hi > s.placement.lo)) r.bad("hi", "must exceed lo");
    if (domain.dimension == 2) {
      const double other = s.placement.axis == 0 ? domain.ly : domain.lx;
      std::vector<double> tr{0.0, other};
      if (r.has("transverse")) tr = r.numbers("transverse");
      if (tr.size() != 2 || !(tr[1] > tr[0])) r.bad("transverse", "expected [lo, hi] with hi > lo");
      s.placement.transverse_lo = tr[0];
      s.placement.transverse_hi = tr[1];
    }
  } else if (s.type == "random") {
    s.measure = r.positive("measure", 1.0);
    if (!seed) fail(ErrorKind::config_validation, "seed: required by set.type = random");
  } else if (s.type == "points") {
    const json& pts = r.get("points");
    if (!pts.is_array() || pts.empty()) r.bad("points", "expected a non-empty list");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::string w = r.where("points") + "[" + std::to_string(i) + "]";
      Eigen::Vector2d p = Eigen::Vector2d::Zero();
      if (domain.dimension == 1 && !pts[i].is_array()) {
        p.x() = parse_number(pts[i], w);
      } else {
        if (!pts[i].is_array() || static_cast<int>(pts[i].size()) != domain.dimension)
          fail(ErrorKind::config_validation, w + ": expected " + std::to_string(domain.dimension) + " coordinates");
        for (int a = 0; a < domain.dimension; ++a) p(a) = parse_number(pts[i][a], w);
      }
      s.points.push_back(p);
    }
    s.exponent = r.number("exponent", 0.0);
    s.content = r.number("content", 0.0);
  } else {
    r.bad("type", "expected full, box, cantor, random or points");
  }
  r.finish();
  return s;
}

StateSpec parse_state(Reader r, int modes, std::optional<std::uint64_t> seed,
                      const std::string& name) {
  StateSpec s;
  s.type = r.string("type", "zero");
  if (s.type == "zero") {
  } else if (s.type == "mode") {
    s.index = r.integer("index", 0, modes - 1);
    s.amplitude = r.number("amplitude", 1.0);
  } else if (s.type == "random") {
    s.amplitude = r.number("amplitude", 1.0);
    if (!seed) fail(ErrorKind::config_validation, "seed: required by " + name + ".type = random");
  } else if (s.type == "coefficients") {
    s.values = r.numbers("values");
    if (static_cast<int>(s.values.size()) > modes) r.bad("values", "more coefficients than modes");
  } else {
    r.bad("type", "expected zero, mode, random or coefficients");
  }
  r.finish();
  return s;
}

const std::set<std::string> kExperiments{"spectrum", "constant-sweep", "interp-check", "control",
                                         "double-check"};

}  // namespace

Domain DomainSpec::build() const {
  return dimension == 1 ? Domain::interval(lx, nx, bc) : Domain::rectangle(lx, ly, nx, ny, bc);
}

ObservationSet SetSpec::build(const Domain& domain, std::uint64_t seed) const {
  if (type == "full") return set_from_mask(domain, std::vector<bool>(domain.cell_count(), true));
  if (type == "box") return set_from_box(domain, x0, x1, y0, y1);
  if (type == "cantor") return cantor_set(domain, ratio, levels, placement);
  if (type == "random") return random_set(domain, measure, seed);
  return ObservationSet::from_points(domain, points, exponent, content);
}

ExperimentConfig parse_config(const json& config) {
  Reader r(config, "");
  ExperimentConfig c;
  c.raw = config;
  c.experiment = r.string("experiment");
  if (!kExperiments.count(c.experiment))
    r.bad("experiment", "expected spectrum, constant-sweep, interp-check, control or double-check");
  if (r.has("seed")) {
    const json& s = r.get("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      r.bad("seed", "expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  r.has("description");
  c.output = r.string("output", "out");
  c.domain = parse_domain(r.child("domain"));
  if (r.has("coefficients")) c.coefficients = parse_coefficients(r.child("coefficients"), c.domain, c.seed);
  const bool needs_set =
      c.experiment == "constant-sweep" || c.experiment == "interp-check" || c.experiment == "control";
  if (needs_set) {
    c.set = parse_set(r.child("set"), c.domain, c.seed);
  }

  if (c.experiment == "spectrum") {
    c.solver = r.string("solver", "dense");
    if (c.solver != "dense" && c.solver != "lanczos") r.bad("solver", "expected dense or lanczos");
    if (r.has("count")) c.request.count = r.integer("count", 1, 1000000);
    if (r.has("lambda_max")) c.request.lambda_max = r.positive("lambda_max", 1.0);
    if (c.solver == "lanczos" && !c.request.count) r.bad("count", "required by the lanczos solver");
  } else if (c.experiment == "constant-sweep") {
    const std::string norms = r.string("norms", "l2");
    if (norms == "l2") c.norms = NormPair::l2_l2;
    else if (norms == "l1") c.norms = NormPair::l2_l1;
    else if (norms == "sup") c.norms = NormPair::linf_sup;
    else r.bad("norms", "expected l2, l1 or sup");
    const json& grid = r.get("cutoffs");
    if (grid.is_object()) {
      Reader g(grid, "cutoffs");
      const double from = g.positive("from", 1.0), to = g.positive("to", 1.0);
      const int points = g.integer("points", 2, 10000);
      g.finish();
      if (!(to > from)) g.bad("to", "must exceed from");
      for (int i = 0; i < points; ++i) c.cutoffs.push_back(from + (to - from) * i / (points - 1));
    } else {
      c.cutoffs = r.numbers("cutoffs");
    }
    if (c.cutoffs.empty()) r.bad("cutoffs", "need at least one cutoff");
    for (std::size_t i = 0; i < c.cutoffs.size(); ++i) {
      if (!(c.cutoffs[i] > 0.0)) r.bad("cutoffs", "cutoffs must be positive");
      if (i > 0 && !(c.cutoffs[i] > c.cutoffs[i - 1])) r.bad("cutoffs", "cutoffs must increase");
    }
  } else if (c.experiment == "interp-check") {
    c.s = r.number("s", 0.0);
    c.t = r.number("t", 0.5);
    if (!(c.s >= 0.0)) r.bad("s", "must be non-negative");
    if (!(c.t > c.s)) r.bad("t", "must exceed s");
    c.epsilon = r.number("epsilon", 0.5);
    if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) r.bad("epsilon", "must lie in (0, 1)");
    c.instances = r.integer("instances", 10, 1, 100000);
    if (!c.seed) fail(ErrorKind::config_validation, "seed: required by interp-check (random instances)");
    if (r.has("telescope")) {
      Reader t = r.child("telescope");
      TelescopeSpec ts;
      ts.horizon = t.positive("horizon", 1.0);
      ts.rho = t.number("rho", 0.5);
      if (!(ts.rho > 0.0 && ts.rho < 1.0)) t.bad("rho", "must lie in (0, 1)");
      ts.steps = t.integer("steps", 20, 1, 200);
      ts.rate = t.positive("rate", 1.0);
      t.finish();
      c.telescope = ts;
    }
  } else if (c.experiment == "control") {
    c.horizon = r.positive("horizon", 1.0);
    c.rho = r.number("rho", 0.5);
    if (!(c.rho > 0.0 && c.rho < 1.0)) r.bad("rho", "must lie in (0, 1)");
    c.steps = r.integer("steps", 10, 1, 200);
    c.modes = r.integer("modes", 20, 1, 100000);
    c.rate = r.positive("rate", 1.0);
    c.tolerance = r.positive("tolerance", 1e-6);
    c.synthesis.c_lambda = r.positive("c_lambda", c.synthesis.c_lambda);
    c.synthesis.max_conditioning = r.positive("max_conditioning", c.synthesis.max_conditioning);
    c.initial = parse_state(r.child("initial"), c.modes, c.seed, "initial");
    if (r.has("target")) c.target = parse_state(r.child("target"), c.modes, c.seed, "target");
  } else {
    c.count = r.integer("count", 10, 1, 100000);
    c.axis = r.integer("axis", 0, 0, c.domain.dimension - 1);
    c.tolerance = r.positive("tolerance", 1e-8);
    if (r.has("chart")) {
      Reader ch = r.child("chart");
      ChartSpec cs;
      if (ch.has("metric")) cs.metric = parse_matrix(ch, "metric", 2);
      cs.s_max = ch.positive("s_max", cs.s_max);
      cs.ns = ch.integer("ns", cs.ns, 3, 10000);
      cs.nz = ch.integer("nz", cs.nz, 5, 100000);
      const std::vector<double> z = ch.has("z") ? ch.numbers("z") : std::vector<double>{-1.0, 1.0};
      if (z.size() != 2 || !(z[1] > z[0])) ch.bad("z", "expected [lo, hi] with hi > lo");
      cs.z_lo = z[0];
      cs.z_hi = z[1];
      ch.finish();
      c.chart = cs;
    }
  }
  r.finish();
  return c;
}

fs::path resolve_output(const ExperimentConfig& config, const RunOptions& options) {
  if (options.out_dir) return *options.out_dir;
  if (const char* env = std::getenv("SPECLAB_OUT"); env && *env) return env;
  return config.output;
}

// ------------------------------------------------------------------ running

namespace {

using Row = std::vector<std::string>;

std::string fmt(double x) { return format_double(x); }
std::string fmt(int x) { return std::to_string(x); }

json jnum(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

class Context {
 public:
  Context(const ExperimentConfig& config, const RunOptions& options, RunResult& result)
      : config_(config), options_(options), result_(result) {
    fs::create_directories(result_.out_dir);
  }

  void note(const std::string& line) {
    log_ << line << '\n';
    if (options_.verbose && options_.console) *options_.console << line << '\n';
  }

  void csv(const std::string& name, const Row& header, const std::vector<Row>& rows) {
    std::string text;
    auto put = [&](const Row& row) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) text += ',';
        text += row[i];
      }
      text += '\n';
    };
    put(header);
    for (const Row& row : rows) put(row);
    write(name, text);
  }

  void write(const std::string& name, const std::string& text) {
    std::ofstream out(result_.out_dir / name, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::invalid_argument, "cannot write " + (result_.out_dir / name).string());
    out << text;
    result_.files.push_back(name);
    note("wrote " + name);
  }

  void check(const std::string& name, bool passed, double value, double limit) {
    result_.checks.push_back({name, passed, value, limit});
    note(std::string(passed ? "PASS " : "FAIL ") + name + " value=" + fmt(value) +
         " limit=" + fmt(limit));
  }

  std::string log() const { return log_.str(); }
  int threads() const { return std::max(1, options_.threads); }
  std::uint64_t seed() const { return config_.seed.value_or(0); }

 private:
  const ExperimentConfig& config_;
  const RunOptions& options_;
  RunResult& result_;
  std::ostringstream log_;
};

struct Problem {
  Domain domain;
  std::shared_ptr<const CoefficientField> coeffs;
  std::shared_ptr<const DiscreteOperator> op;
};

Problem build_problem(const ExperimentConfig& c) {
  Domain d = c.domain.build();
  auto coeffs = std::make_shared<const CoefficientField>(make_coefficients(d, c.coefficients));
  auto op = std::make_shared<const DiscreteOperator>(assemble(d, *coeffs));
  return {d, coeffs, op};
}

json run_spectrum(const ExperimentConfig& c, Context& ctx) {
  Problem p = build_problem(c);
  const Spectrum sp = c.solver == "lanczos" ? compute_spectrum_lanczos(p.op, *c.request.count)
                                            : compute_spectrum(p.op, c.request);
  ctx.note("modes " + fmt(sp.size()) + " of " + fmt(p.op->size()));
  std::vector<Row> rows;
  for (int k = 0; k < sp.size(); ++k)
    rows.push_back({fmt(k), fmt(sp.eigenvalue(k)), fmt(sp.frequency(k)),
                    fmt(sp.vectors().col(k).cwiseAbs().maxCoeff())});
  ctx.csv("spectrum.csv", {"k", "eigenvalue", "frequency", "sup_norm"}, rows);

  const double residual = max_residual(sp), defect = orthonormality_defect(sp);
  ctx.check("eigen_residual", residual <= 1e-8, residual, 1e-8);
  ctx.check("orthonormality", defect <= 1e-8, defect, 1e-8);
  json out{{"modes", sp.size()},
           {"unknowns", p.op->size()},
           {"max_residual", jnum(residual)},
           {"orthonormality_defect", jnum(defect)}};
  auto fit = [&](const char* name, auto&& fn) {
    try {
      const ExponentFit f = fn(sp);
      out[name] = {{"exponent", jnum(f.exponent)}, {"intercept", jnum(f.intercept)},
                   {"r2", jnum(f.r2)}, {"modes", f.modes}};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::insufficient_data) throw;
      out[name] = nullptr;
      ctx.note(std::string(name) + " skipped: " + e.what());
    }
  };
  fit("weyl", [](const Spectrum& s) { return weyl_exponent(s); });
  fit("sup_growth", [](const Spectrum& s) { return eigen_sup_exponent(s); });
  return out;
}

json run_sweep(const ExperimentConfig& c, Context& ctx) {
  Problem p = build_problem(c);
  const ObservationSet set = c.set.build(p.domain, ctx.seed());
  SpectrumRequest req;
  req.lambda_max = c.cutoffs.back() * (1.0 + 1e-12);
  const Spectrum sp = compute_spectrum(p.op, req);
  ctx.note("set " + c.set.type + " with " + fmt(static_cast<int>(set.unknowns().size())) +
           " observed unknowns; " + fmt(sp.size()) + " modes below the top cutoff");
  const ConstantSweep sweep = sweep_constants(sp, set, c.norms, c.cutoffs, ctx.threads());

  std::vector<Row> rows;
  bool observable = true, monotone = true;
  double worst_drop = 0.0;
  for (std::size_t i = 0; i < sweep.entries.size(); ++i) {
    const SweepEntry& e = sweep.entries[i];
    rows.push_back({fmt(e.cutoff), fmt(e.modes), fmt(e.constant), fmt(e.observable ? 1 : 0)});
    observable = observable && e.observable;
    if (i > 0 && std::isfinite(e.constant)) {
      const double prev = sweep.entries[i - 1].constant;
      const double drop = (prev - e.constant) / prev;
      worst_drop = std::max(worst_drop, drop);
      if (drop > 1e-8) monotone = false;
    }
  }
  ctx.csv("sweep.csv", {"cutoff", "modes", "constant", "observable"}, rows);
  ctx.check("observable", observable, observable ? 1.0 : 0.0, 1.0);
  ctx.check("monotone_in_cutoff", monotone, worst_drop, 1e-8);

  json out{{"norms", to_string(c.norms)}, {"points", sweep.entries.size()}};
  int finite = 0;
  for (const auto& e : sweep.entries) finite += std::isfinite(e.constant) && e.modes > 0;
  if (finite >= 5) {
    const GrowthFit g = fit_growth(sweep);
    out["fit"] = {{"C", jnum(g.prefactor)},
                  {"D", jnum(g.rate)},
                  {"R2", jnum(g.r2)},
                  {"degenerate_flat", g.degenerate_flat},
                  {"points", g.points}};
    ctx.note("fit C=" + fmt(g.prefactor) + " D=" + fmt(g.rate) + " R2=" + fmt(g.r2));
  } else {
    out["fit"] = nullptr;
    ctx.note("growth fit skipped: fewer than 5 finite constants");
  }
  return out;
}

json run_interp(const ExperimentConfig& c, Context& ctx) {
  Problem p = build_problem(c);
  const ObservationSet set = c.set.build(p.domain, ctx.seed());
  const Spectrum sp = compute_spectrum(p.op);
  std::mt19937_64 rng(ctx.seed());
  std::normal_distribution<double> normal;
  std::vector<Eigen::VectorXd> fs(c.instances);
  for (auto& f : fs) {
    f.resize(p.op->size());
    for (int i = 0; i < f.size(); ++i) f(i) = normal(rng);
  }

  std::vector<InterpolationReport> reps(c.instances);
  parallel_for(c.instances, ctx.threads(),
               [&](int i) { reps[i] = interpolation_check(sp, set, fs[i], c.s, c.t, c.epsilon); });
  const double tau = c.t - c.s;
  double n = 0.0, worst_gap = 0.0;
  bool tails = true;
  std::vector<Row> rows;
  for (int i = 0; i < c.instances; ++i) {
    const auto& r = reps[i];
    n = std::max(n, r.required_n);
    worst_gap = std::max(worst_gap, r.alpha_gap);
    tails = tails && r.tail_ok;
    rows.push_back({fmt(i), fmt(r.lhs), fmt(r.observation), fmt(r.earlier), fmt(r.required_n),
                    fmt(r.alpha_numeric), fmt(r.alpha_explicit), fmt(r.alpha_gap), fmt(r.cutoff),
                    fmt(r.tail), fmt(r.tail_bound), fmt(r.tail_ok ? 1 : 0)});
  }
  ctx.csv("interpolation.csv",
          {"instance", "lhs", "observation", "earlier", "required_n", "alpha_numeric",
           "alpha_explicit", "alpha_gap", "cutoff", "tail", "tail_bound", "tail_ok"},
          rows);
  int holds = 0;
  for (const auto& r : reps) holds += interpolation_holds(r, n, tau, c.epsilon);
  ctx.check("single_constant", holds == c.instances, holds, c.instances);
  ctx.check("tail_bound", tails, tails ? 1.0 : 0.0, 1.0);
  if (c.epsilon == 0.5) ctx.check("minimizer_identity", worst_gap <= 0.01, worst_gap, 0.01);

  json out{{"instances", c.instances},
           {"N", jnum(n)},
           {"max_alpha_gap", jnum(worst_gap)},
           {"tau", tau},
           {"epsilon", c.epsilon}};

  if (c.telescope) {
    const TelescopeSpec& ts = *c.telescope;
    const TimeSequence seq = lr_schedule(ts.horizon, ts.rho, ts.steps);
    std::vector<TelescopeReport> tel(c.instances);
    parallel_for(c.instances, ctx.threads(),
                 [&](int i) { tel[i] = telescope_check(sp, set, seq, fs[i], ts.rate); });
    double constant = 0.0, residual = -std::numeric_limits<double>::infinity();
    std::vector<Row> trows;
    for (int i = 0; i < c.instances; ++i) {
      constant = std::max(constant, tel[i].constant);
      residual = std::max(residual, tel[i].max_residual);
      for (std::size_t k = 0; k < tel[i].steps.size(); ++k) {
        const auto& st = tel[i].steps[k];
        trows.push_back({fmt(i), fmt(static_cast<int>(k)), fmt(st.s), fmt(st.gap), fmt(st.norm),
                         fmt(st.observation), fmt(st.log_term), fmt(st.residual)});
      }
    }
    ctx.csv("telescope.csv",
            {"instance", "step", "s", "gap", "norm", "observation", "log_term", "residual"}, trows);
    int ok = 0;
    for (const auto& t : tel) ok += t.lhs <= constant * std::exp(t.log_sup) * (1.0 + 1e-12);
    ctx.check("telescope_single_constant", ok == c.instances, ok, c.instances);
    ctx.check("telescope_step_residuals", residual <= 1e-12, residual, 1e-12);
    out["telescope"] = {{"C", jnum(constant)},
                        {"max_residual", jnum(residual)},
                        {"A", jnum(tel.front().a)},
                        {"B", jnum(tel.front().b)},
                        {"D_multiple", jnum(tel.front().d_multiple)}};
  }
  return out;
}

Eigen::VectorXd build_state(const StateSpec& s, const Spectrum& sp, std::mt19937_64& rng) {
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(sp.size());
  if (s.type == "mode") {
    coef(s.index) = s.amplitude;
  } else if (s.type == "random") {
    std::normal_distribution<double> normal;
    for (int k = 0; k < coef.size(); ++k) coef(k) = s.amplitude * normal(rng);
  } else if (s.type == "coefficients") {
    for (std::size_t k = 0; k < s.values.size(); ++k) coef(k) = s.values[k];
  }
  return sp.synthesize(coef);
}

json run_control(const ExperimentConfig& c, Context& ctx) {
  Problem p = build_problem(c);
  const ObservationSet set = c.set.build(p.domain, ctx.seed());
  SpectrumRequest req;
  req.count = std::min(c.modes, p.op->size());
  const Spectrum sp = compute_spectrum(p.op, req);
  std::mt19937_64 rng(ctx.seed());
  const Eigen::VectorXd u0 = build_state(c.initial, sp, rng);
  const Eigen::VectorXd v0 = build_state(c.target, sp, rng);
  const TimeSequence seq = lr_schedule(c.horizon, c.rho, c.steps);
  const ControlSchedule sched = synthesize(sp, set, seq, u0, v0, c.synthesis);
  const Simulation sim = simulate(sp, sched);
  const CostLedger ledger = cost_report(sched, c.rate);

  std::vector<Row> rows;
  for (std::size_t j = 0; j < sched.steps.size(); ++j) {
    const StepControl& s = sched.steps[j];
    rows.push_back({fmt(s.step), fmt(s.time), fmt(s.gap), fmt(s.cutoff), fmt(s.modes),
                    fmt(s.conditioning), s.kind == PayloadKind::density ? "density" : "atoms",
                    fmt(s.total_variation), fmt(sched.deficit_before[j]),
                    fmt(sched.deficit_after[j]), fmt(sched.deficit_next[j])});
  }
  ctx.csv("schedule.csv",
          {"step", "time", "gap", "cutoff", "modes", "conditioning", "kind", "total_variation",
           "deficit_before", "deficit_after", "deficit_next"},
          rows);
  rows.clear();
  for (const LedgerRow& l : ledger.rows)
    rows.push_back({fmt(l.step), fmt(l.time), fmt(l.gap), fmt(l.variation), fmt(l.log_term),
                    fmt(l.term), fmt(l.partial_sum)});
  ctx.csv("ledger.csv", {"step", "time", "gap", "variation", "log_term", "term", "partial_sum"},
          rows);
  rows.clear();
  for (std::size_t i = 0; i < sim.times.size(); ++i)
    rows.push_back({fmt(static_cast<int>(i)), fmt(sim.times[i]), fmt(sim.states[i].norm())});
  ctx.csv("trajectory.csv", {"snapshot", "time", "norm"}, rows);

  json steps = json::array();
  for (const StepControl& s : sched.steps) {
    json step{{"step", s.step}, {"time", s.time}, {"gap", s.gap}, {"cutoff", jnum(s.cutoff)},
              {"modes", s.modes}, {"total_variation", jnum(s.total_variation)}};
    json support = json::array(), weights = json::array();
    if (s.kind == PayloadKind::atoms) {
      step["kind"] = "atoms";
      for (std::size_t i = 0; i < s.atom_unknowns.size(); ++i) {
        support.push_back(s.atom_unknowns[i]);
        weights.push_back(jnum(s.mass(i)));
      }
    } else {
      step["kind"] = "density";
      for (int i = 0; i < s.mass.size(); ++i) {
        if (s.mass(i) == 0.0) continue;
        support.push_back(i);
        weights.push_back(jnum(s.mass(i)));
      }
    }
    step["support"] = support;
    step["weights"] = weights;
    steps.push_back(step);
  }
  json schedule{{"horizon", sched.horizon}, {"times", seq.times}, {"steps", steps},
                {"ledger", {{"rate", c.rate}, {"total", jnum(ledger.total)},
                            {"last_increment", jnum(ledger.last_increment)}}}};
  ctx.write("schedule.json", schedule.dump(2) + "\n");

  ctx.check("terminal_relative_deficit", sched.relative_deficit <= c.tolerance,
            sched.relative_deficit, c.tolerance);
  ctx.check("ledger_finite", std::isfinite(ledger.total), ledger.total,
            std::numeric_limits<double>::infinity());
  ctx.check("ledger_converged", ledger.converged, ledger.last_increment, 1e-8 * ledger.total);
  return {{"modes", sp.size()},
          {"terminal_error", jnum(sim.terminal_error)},
          {"relative_deficit", jnum(sched.relative_deficit)},
          {"initial_deficit", jnum(sched.initial_deficit)},
          {"ledger_total", jnum(ledger.total)},
          {"ledger_last_increment", jnum(ledger.last_increment)},
          {"growth_constant", jnum(ledger.growth_constant)},
          {"decay_constant", jnum(ledger.decay_constant)}};
}

json run_double(const ExperimentConfig& c, Context& ctx) {
  Problem p = build_problem(c);
  SpectrumRequest req;
  req.count = std::min(c.count, p.op->size());
  const Spectrum sp = compute_spectrum(p.op, req);
  const DoubledSystem doubled = double_domain(p.domain, *p.coeffs, {c.axis, {}});
  SpectrumRequest dreq;
  dreq.lambda_max = sp.frequency(sp.size() - 1) * (1.0 + 1e-3) + 1e-9;
  const Spectrum dsp = compute_spectrum(doubled.op, dreq);
  const std::vector<double> gaps = spectral_inclusion(sp, dsp, sp.size());

  std::vector<Row> rows;
  double worst_res = 0.0, worst_gap = 0.0;
  int mismatches = 0;
  for (int k = 0; k < sp.size(); ++k) {
    const Extension e =
        extend_eigenfunction(doubled, sp.vectors().col(k), sp.eigenvalue(k), p.domain.bc());
    const double scale = 1.0 + sp.eigenvalue(k);
    worst_res = std::max(worst_res, e.residual / scale);
    worst_gap = std::max(worst_gap, gaps[k] / scale);
    mismatches += e.parity_mismatch;
    rows.push_back({fmt(k), fmt(sp.eigenvalue(k)), fmt(e.residual), fmt(e.bulk_residual),
                    fmt(e.interface_residual), fmt(e.parity_mismatch ? 1 : 0), fmt(gaps[k])});
  }
  ctx.csv("doubling.csv",
          {"k", "eigenvalue", "residual", "bulk_residual", "interface_residual", "parity_mismatch",
           "inclusion_gap"},
          rows);
  ctx.check("extension_residual", worst_res <= c.tolerance, worst_res, c.tolerance);
  ctx.check("spectral_inclusion", worst_gap <= c.tolerance, worst_gap, c.tolerance);
  ctx.check("parity", mismatches == 0, mismatches, 0.0);
  json out{{"modes", sp.size()},
           {"doubled_modes", dsp.size()},
           {"max_scaled_residual", jnum(worst_res)},
           {"max_scaled_inclusion_gap", jnum(worst_gap)}};

  if (c.chart) {
    const ChartSpec& cs = *c.chart;
    const Eigen::Matrix2d a = cs.metric;
    const double width = cs.z_hi - cs.z_lo, mid = 0.5 * (cs.z_lo + cs.z_hi);
    auto chi = [&](double z) { return smooth_cutoff(z - mid, 0.25 * width, 0.5 * width); };
    const BoundaryChart chart =
        make_chart([a](double, double) { return a; }, chi, cs.s_max, cs.ns, cs.z_lo, cs.z_hi, cs.nz);
    const ChartDiagnostics d = pseudo_geodesic_diag(chart);
    std::vector<Row> crows;
    for (int is = 0; is < cs.ns; ++is)
      for (int iz = 0; iz < cs.nz; ++iz) {
        const Eigen::Matrix2d& b = d.b[is][iz];
        crows.push_back({fmt(chart.s[is]), fmt(chart.z[iz]), fmt(b(0, 0)), fmt(b(0, 1)),
                         fmt(b(1, 1)), fmt(chart.m[is][iz](0)), fmt(chart.m[is][iz](1))});
      }
    ctx.csv("chart.csv", {"s", "z", "b11", "b12", "b22", "m_y", "m_z"}, crows);
    const double h = std::max(chart.hs(), chart.hz());
    const double mass = poisson_mass(100001, 50000, chart.hz(), chart.hs());
    ctx.check("normal_unit", d.unit_residual <= 1e-12, d.unit_residual, 1e-12);
    ctx.check("normal_orthogonal", d.orthogonality_residual <= 1e-12, d.orthogonality_residual, 1e-12);
    ctx.check("b12_at_boundary", d.max_b12 <= 10.0 * h, d.max_b12, 10.0 * h);
    ctx.check("poisson_mass", std::abs(mass - 1.0) <= 1e-3, std::abs(mass - 1.0), 1e-3);
    out["chart"] = {{"unit_residual", jnum(d.unit_residual)},
                    {"orthogonality_residual", jnum(d.orthogonality_residual)},
                    {"min_abs_det", jnum(d.min_abs_det)},
                    {"max_b12", jnum(d.max_b12)},
                    {"max_b11_error", jnum(d.max_b11_error)},
                    {"min_b22", jnum(d.min_b22)},
                    {"phi_ss", jnum(d.phi_ss)},
                    {"phi_sz", jnum(d.phi_sz)},
                    {"phi_zz", jnum(d.phi_zz)},
                    {"poisson_mass", jnum(mass)}};
  }
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  RunResult result;
  result.out_dir = resolve_output(config, options);
  Context ctx(config, options, result);
  const std::string hash = config_hash_hex(config.raw);
  ctx.note("speclab " SPECLAB_VERSION " experiment=" + config.experiment + " config_hash=" + hash +
           " seed=" + (config.seed ? std::to_string(*config.seed) : std::string("none")));

  json results;
  try {
    if (config.experiment == "spectrum") results = run_spectrum(config, ctx);
    else if (config.experiment == "constant-sweep") results = run_sweep(config, ctx);
    else if (config.experiment == "interp-check") results = run_interp(config, ctx);
    else if (config.experiment == "control") results = run_control(config, ctx);
    else results = run_double(config, ctx);
  } catch (const Error& e) {
    throw Error(e.kind(), config.experiment + ": " + e.detail());
  }

  result.passed = std::all_of(result.checks.begin(), result.checks.end(),
                              [](const CheckResult& c) { return c.passed; });
  json checks = json::array();
  for (const CheckResult& c : result.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"value", jnum(c.value)},
                      {"limit", jnum(c.limit)}});
  ctx.note(std::string("overall ") + (result.passed ? "PASS" : "FAIL"));
  std::vector<std::string> files = result.files;
  files.push_back("summary.json");
  files.push_back("log.txt");
  result.summary = {{"artifact", "speclab"},
                    {"version", SPECLAB_VERSION},
                    {"config_hash", hash},
                    {"experiment", config.experiment},
                    {"seed", config.seed ? json(*config.seed) : json(nullptr)},
                    {"results", results},
                    {"checks", checks},
                    {"passed", result.passed},
                    {"files", files}};
  ctx.write("summary.json", result.summary.dump(2) + "\n");
  ctx.write("log.txt", ctx.log());
  result.files = files;
  return result;
}

}  // namespace speclab
