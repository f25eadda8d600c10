#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "speclab/error.hpp"
#include "speclab/experiment.hpp"

using namespace speclab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("speclab_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Message of the config_validation error raised for `config`.
std::string validation_message(const json& config) {
  try {
    parse_config(config);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config_validation);
    return e.what();
  }
  FAIL("config was accepted");
  return {};
}

json sweep_config() {
  return json::parse(R"({
    "experiment": "constant-sweep",
    "domain": {"length": "pi", "cells": 100, "bc": "dirichlet"},
    "set": {"type": "box", "lo": 0, "hi": "pi/2"},
    "norms": "l2",
    "cutoffs": {"from": 1.0, "to": 3.8, "points": 8}
  })");
}

RunResult run(const json& config, const fs::path& out, int threads = 1) {
  RunOptions opts;
  opts.out_dir = out;
  opts.threads = threads;
  return run_experiment(parse_config(config), opts);
}

}  // namespace

TEST_CASE("validation errors name the offending field") {
  json c = sweep_config();
  c["domain"]["cells"] = -3;
  CHECK(validation_message(c).find("domain.cells") != std::string::npos);

  c = sweep_config();
  c["set"]["colour"] = "red";
  CHECK(validation_message(c).find("set.colour") != std::string::npos);

  c = sweep_config();
  c["experiment"] = "telepathy";
  CHECK(validation_message(c).find("experiment") != std::string::npos);

  c = sweep_config();
  c["cutoffs"] = json::array({3.0, 2.0});
  CHECK(validation_message(c).find("cutoffs") != std::string::npos);

  c = sweep_config();
  c["norms"] = "l7";
  CHECK(validation_message(c).find("norms") != std::string::npos);
}

TEST_CASE("random sets and random instances require a seed") {
  json c = sweep_config();
  c["set"] = {{"type", "random"}, {"measure", 0.3}};
  CHECK(validation_message(c).find("seed") != std::string::npos);
  c["seed"] = 4;
  CHECK_NOTHROW(parse_config(c));
}

TEST_CASE("symbolic multiples of pi") {
  json c = sweep_config();
  for (const char* text : {"pi/2", "0.5*pi", "0.5pi"}) {
    c["set"]["hi"] = text;
    const ExperimentConfig cfg = parse_config(c);
    CHECK(cfg.set.x1 == doctest::Approx(M_PI / 2).epsilon(1e-15));
  }
  c["set"]["hi"] = "half of pi";
  CHECK(validation_message(c).find("set.hi") != std::string::npos);
}

TEST_CASE("sweep run writes the table and the growth fit") {
  const fs::path out = scratch("sweep");
  const RunResult r = run(sweep_config(), out);
  CHECK(r.passed);
  std::istringstream csv(slurp(out / "sweep.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 8);
  const json summary = json::parse(slurp(out / "summary.json"));
  const json& fit = summary["results"]["fit"];
  CHECK(fit.contains("C"));
  CHECK(fit.contains("D"));
  CHECK(fit.contains("R2"));
  CHECK(fit["points"] == 8);
  CHECK(summary["artifact"] == "speclab");
  CHECK(summary["version"] == SPECLAB_VERSION);
  CHECK(summary["config_hash"] == config_hash_hex(sweep_config()));
  CHECK(fs::exists(out / "log.txt"));
}

TEST_CASE("one-mode control on the whole domain reaches the target") {
  const json c = json::parse(R"({
    "experiment": "control",
    "domain": {"length": "pi", "cells": 100},
    "set": {"type": "full"},
    "modes": 10, "horizon": 1.0, "rho": 0.5, "steps": 8,
    "initial": {"type": "mode", "index": 0},
    "tolerance": 1e-10
  })");
  const fs::path out = scratch("control");
  const RunResult r = run(c, out);
  CHECK(r.passed);
  CHECK(r.summary["results"]["relative_deficit"].get<double>() <= 1e-10);
  for (const char* f : {"schedule.csv", "ledger.csv", "trajectory.csv", "schedule.json"})
    CHECK(fs::exists(out / f));
}

TEST_CASE("runs are byte-identical across thread counts") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run(sweep_config(), a, 1);
  run(sweep_config(), b, 3);
  CHECK(slurp(a / "sweep.csv") == slurp(b / "sweep.csv"));
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
}

TEST_CASE("config hash ignores formatting but not content") {
  const json a = json::parse(R"({"b": 1, "a": [1, 2]})");
  const json b = json::parse("{\n  \"a\": [1,2],\n  \"b\": 1\n}");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash_hex(a).size() == 16);
  CHECK(config_hash(a) != config_hash(json::parse(R"({"b": 2, "a": [1, 2]})")));
}

TEST_CASE("output directory precedence") {
  json c = sweep_config();
  c["output"] = "from_config";
  const ExperimentConfig cfg = parse_config(c);
  ::unsetenv("SPECLAB_OUT");
  CHECK(resolve_output(cfg, {}) == fs::path("from_config"));
  ::setenv("SPECLAB_OUT", "from_env", 1);
  CHECK(resolve_output(cfg, {}) == fs::path("from_env"));
  RunOptions opts;
  opts.out_dir = "from_flag";
  CHECK(resolve_output(cfg, opts) == fs::path("from_flag"));
  ::unsetenv("SPECLAB_OUT");
}

TEST_CASE("number formatting round-trips") {
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::nan("")) == "nan");
  for (double x : {0.1, M_PI, 1e-300, -2.5e17}) CHECK(std::stod(format_double(x)) == x);
}
