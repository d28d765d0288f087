// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "convrates/checks.hpp"
#include "convrates/cnn_io.hpp"
#include "convrates/compiler.hpp"
#include "convrates/complexity.hpp"
#include "convrates/config.hpp"
#include "convrates/error.hpp"
#include "convrates/experiment.hpp"
#include "convrates/links.hpp"
#include "convrates/parallel.hpp"
#include "convrates/random.hpp"
#include "convrates/targets.hpp"
#include "convrates/training.hpp"

namespace convrates {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr double kCompileTolerance = 1e-10;

// Bundled example for verify-compile (same net as tools/examples/verify_compile.ini).
constexpr const char* kExampleNet = R"(
[shallow]
d = 4
neuron1 = 1.5   0.5 -0.25  0.75  0.1   -0.2
neuron2 = -0.8  -0.3  0.6  0.2  -0.4    0.5
neuron3 = 2.0   0.1  0.1  0.1  0.1    -0.3
neuron4 = -1.2  0.9  -0.7  0.0  0.3    0.05
neuron5 = 0.6   -1.0  0.2  0.4  0.8   0.1
neuron6 = -0.35 0.25  0.25 -0.5  0.0   0.4
neuron7 = 0.9   0.0  0.0  1.0  -1.0    0.2
neuron8 = -2.1  0.4  0.3  0.2  0.1    -0.45
)";

struct Context {
  Config cfg;
  fs::path output;
  std::uint64_t seed = 0;
  std::ostream* out = nullptr;
};

std::string csv(double v) { return format_double(v); }

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) { add(header); }

  void add(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < width_; ++i) {
      if (i) line += ',';
      if (i < cells.size()) line += cells[i];
    }
    text_ += line + '\n';
  }

  const std::string& text() const { return text_; }

 private:
  std::size_t width_;
  std::string text_;
};

void write_file(const Context& ctx, const std::string& name, const std::string& text) {
  fs::create_directories(ctx.output);
  const fs::path path = ctx.output / name;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

// ---- shared parsing -------------------------------------------------------

ShallowNet parse_shallow(Config& user, const std::string& section) {
  Config bundled;
  if (!user.has_section(section)) bundled = Config::parse(kExampleNet, "<bundled example>");
  Config& cfg = user.has_section(section) ? user : bundled;
  ShallowNet net;
  const std::int64_t d = cfg.get_int(section, "d", 0);
  if (d < 1) throw ParseError(section + ".d", cfg.line(section, "d"), "d must be a positive integer");
  net.d = static_cast<int>(d);
  std::map<int, Neuron> ordered;
  for (const std::string& key : cfg.keys(section)) {
    if (key == "d") continue;
    const int line = cfg.line(section, key);
    const std::string field = section + "." + key;
    if (key.rfind("neuron", 0) != 0 || key.size() == 6 ||
        !std::all_of(key.begin() + 6, key.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw ParseError(field, line, "unknown key (expected d or neuron<k>)");
    }
    std::istringstream in(cfg.get_string(section, key, ""));
    std::vector<double> v;
    std::string tok;
    while (in >> tok) {
      char* end = nullptr;
      const double x = std::strtod(tok.c_str(), &end);
      if (*end != '\0' || !std::isfinite(x)) throw ParseError(field, line, "expected a number, got '" + tok + "'");
      v.push_back(x);
    }
    if (v.size() != static_cast<std::size_t>(d) + 2) {
      throw ParseError(field, line, "expected c, " + std::to_string(d) + " weights and b");
    }
    Neuron n;
    n.c = v.front();
    n.a.assign(v.begin() + 1, v.end() - 1);
    n.b = v.back();
    const int k = std::stoi(key.substr(6));
    if (ordered.count(k)) throw ParseError(field, line, "duplicate neuron index");
    ordered[k] = n;
  }
  if (ordered.empty()) throw ParseError(section, cfg.line(section), "no neurons given");
  for (auto& [k, n] : ordered) net.neurons.push_back(n);
  return net;
}

struct CompileSetup {
  ShallowNet net;
  int s = 2;
  std::string link = "none";
  std::optional<PiecewiseLinearLink> g;
};

CompileSetup parse_compile(Context& ctx) {
  CompileSetup c;
  c.s = static_cast<int>(ctx.cfg.get_int("compile", "s", 2));
  c.link = ctx.cfg.get_string("compile", "link", "none");
  const std::int64_t N = ctx.cfg.get_int("compile", "link_N", 10);
  const double u = ctx.cfg.get_double("compile", "link_u", 0.1);
  if (c.link == "log") {
    c.g = log_link_net(static_cast<int>(N));
  } else if (c.link == "sign") {
    c.g = sign_link_net(u);
  } else if (c.link != "none") {
    throw ParseError("compile.link", ctx.cfg.line("compile", "link"), "expected none, log or sign");
  }
  c.net = parse_shallow(ctx.cfg, "shallow");
  return c;
}

CnnParams build_compiled(const CompileSetup& c, CompileReport& report) {
  if (c.g) return compose_with_scalar_net(c.net, c.g->net, c.s, &report);
  return shallow_to_cnn(c.net, c.s, &report);
}

json report_json(const CompileSetup& c, const CnnParams& p, const CompileReport& r) {
  return json{{"d", p.d},           {"s", p.s},
              {"J", p.J},           {"L", p.depth()},
              {"L0", r.L0},         {"neurons", c.net.neurons.size()},
              {"link", c.link},     {"kappa", r.kappa},
              {"kappa_bound", r.kappa_bound}, {"kappa_within_bound", r.kappa <= r.kappa_bound}};
}

// ---- verbs ----------------------------------------------------------------

int verb_compile(Context& ctx) {
  CompileSetup c = parse_compile(ctx);
  const std::string name = ctx.cfg.get_string("compile", "file", "compiled.cnn");
  if (name.find('/') != std::string::npos || name == "." || name == "..") {
    throw ParseError("compile.file", ctx.cfg.line("compile", "file"), "must be a plain file name");
  }
  ctx.cfg.finish({"run", "compile", "shallow"});
  CompileReport report;
  const CnnParams p = build_compiled(c, report);
  write_file(ctx, name, to_text(p));
  const json r = report_json(c, p, report);
  write_file(ctx, "compile_report.json", r.dump(2) + "\n");
  *ctx.out << r.dump(2) << "\n";
  return kExitOk;
}

int verb_verify_compile(Context& ctx) {
  CompileSetup c = parse_compile(ctx);
  const std::int64_t points = ctx.cfg.get_int("verify-compile", "points", 10000);
  if (points < 1) throw ParseError("verify-compile.points", ctx.cfg.line("verify-compile", "points"), "must be positive");
  ctx.cfg.finish({"run", "compile", "verify-compile", "shallow"});
  CompileReport report;
  const CnnParams p = build_compiled(c, report);
  double worst = 0.0;
  for (std::int64_t i = 0; i < points; ++i) {
    Rng rng(ctx.seed, static_cast<std::uint64_t>(i));
    std::vector<double> x(c.net.d);
    for (double& t : x) t = rng.uniform();
    const double inner = c.net(x);
    const double ref = c.g ? (*c.g)(inner) : inner;
    const double got = cnn_forward(p, x);
    worst = std::max(worst, std::abs(got - ref) / std::max(1.0, std::abs(ref)));
  }
  const bool ok = worst <= kCompileTolerance && report.kappa <= report.kappa_bound;
  CsvWriter w({"d", "s", "J", "L", "L0", "neurons", "link", "points", "max_deviation", "tolerance", "kappa",
               "kappa_bound", "passed"});
  w.add({std::to_string(p.d), std::to_string(p.s), std::to_string(p.J), std::to_string(p.depth()),
         std::to_string(report.L0), std::to_string(c.net.neurons.size()), c.link, std::to_string(points), csv(worst),
         csv(kCompileTolerance), csv(report.kappa), csv(report.kappa_bound), ok ? "true" : "false"});
  write_file(ctx, "verify_compile.csv", w.text());
  *ctx.out << "max deviation " << csv(worst) << " (tolerance " << csv(kCompileTolerance) << ")\n"
           << "kappa " << csv(report.kappa) << " <= bound " << csv(report.kappa_bound) << ": "
           << (report.kappa <= report.kappa_bound ? "yes" : "no") << "\n";
  if (!ok) throw PropertyFailure("compiled network deviates or exceeds its kappa bound");
  return kExitOk;
}

int verb_entropy(Context& ctx) {
  Config& cfg = ctx.cfg;
  const int d = static_cast<int>(cfg.get_int("entropy", "d", 2));
  const int s = static_cast<int>(cfg.get_int("entropy", "s", 2));
  const int J = static_cast<int>(cfg.get_int("entropy", "J", 4));
  const auto Ls = cfg.get_int_list("entropy", "L", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20});
  const bool explicit_M = cfg.has("entropy", "M");
  const auto Ms = cfg.get_double_list("entropy", "M", {});
  const double M_scale = cfg.get_double("entropy", "M_scale", 1.0);
  const double M_power = cfg.get_double("entropy", "M_power", 2.0);
  const auto epss = cfg.get_double_list("entropy", "eps", {0.1});
  if (explicit_M && (cfg.has("entropy", "M_scale") || cfg.has("entropy", "M_power"))) {
    throw ParseError("entropy.M", cfg.line("entropy", "M"), "give either M or M_scale/M_power");
  }
  cfg.finish({"run", "entropy"});
  require(s >= 1 && s <= d && J >= 1, "architecture", "need 1 <= s <= d and J >= 1");
  CsvWriter w({"d", "s", "J", "L", "M", "eps", "N", "C_L", "closed_form", "entropy_bound"});
  for (std::int64_t L : Ls) {
    require(L >= 1, "architecture", "L must be positive");
    const std::vector<double> row_M =
        explicit_M ? Ms : std::vector<double>{M_scale * std::pow(static_cast<double>(L), M_power)};
    for (double M : row_M) {
      for (double eps : epss) {
        require(eps > 0.0, "epsilon", "eps must be positive");
        const EntropyResult r = covering_recursion(cnn_complexity_spec(d, s, J, static_cast<int>(L), M));
        w.add({std::to_string(d), std::to_string(s), std::to_string(J), std::to_string(L), csv(M), csv(eps),
               std::to_string(param_count(d, s, J, static_cast<int>(L))), csv(r.C_L), csv(r.closed_form),
               csv(entropy_bound_cnn(d, s, J, static_cast<int>(L), M, eps))});
      }
    }
  }
  write_file(ctx, "entropy.csv", w.text());
  *ctx.out << w.text();
  return kExitOk;
}

int verb_cover_check(Context& ctx) {
  Config& cfg = ctx.cfg;
  CoverCheckOptions base;
  base.d = static_cast<int>(cfg.get_int("cover-check", "d", 2));
  base.s = static_cast<int>(cfg.get_int("cover-check", "s", 2));
  base.J = static_cast<int>(cfg.get_int("cover-check", "J", 1));
  base.L = static_cast<int>(cfg.get_int("cover-check", "L", 1));
  base.M = cfg.get_double("cover-check", "M", 1.0);
  base.trials = static_cast<int>(cfg.get_int("cover-check", "trials", 100));
  base.grid_resolution = static_cast<int>(cfg.get_int("cover-check", "grid_resolution", 0));
  base.uniform_points = static_cast<int>(cfg.get_int("cover-check", "uniform_points", 512));
  base.halton_points = static_cast<int>(cfg.get_int("cover-check", "halton_points", 512));
  const auto epss = cfg.get_double_list("cover-check", "eps", {0.25, 0.5});
  cfg.finish({"run", "cover-check"});
  CsvWriter w({"eps", "trial", "distance", "on_grid", "C_L", "spacing", "method"});
  bool all = true;
  for (std::size_t k = 0; k < epss.size(); ++k) {
    CoverCheckOptions opt = base;
    opt.eps = epss[k];
    opt.seed = stream_seed(ctx.seed, k);
    const CoverCheckReport r = empirical_cover_check(opt);
    for (std::size_t t = 0; t < r.distances.size(); ++t) {
      w.add({csv(opt.eps), std::to_string(t), csv(r.distances[t]), r.on_grid[t] ? "true" : "false", csv(r.C_L),
             csv(r.spacing), r.method});
    }
    *ctx.out << "eps " << csv(opt.eps) << ": C_L " << csv(r.C_L) << ", spacing " << csv(r.spacing) << ", worst "
             << csv(r.worst) << ", " << (r.passed ? "passed" : "FAILED") << "\n";
    all = all && r.passed;
  }
  write_file(ctx, "cover_check.csv", w.text());
  if (!all) throw PropertyFailure("some trial network lies farther than eps from the grid");
  return kExitOk;
}

int verb_approx_log(Context& ctx) {
  Config& cfg = ctx.cfg;
  std::vector<std::int64_t> def;
  for (int N = 3; N <= 200; ++N) def.push_back(N);
  const auto Ns = cfg.get_int_list("approx-log", "N", def);
  const std::int64_t grid = cfg.get_int("approx-log", "grid", 10000);
  cfg.finish({"run", "approx-log"});
  require(grid >= 1, "grid", "grid must be positive");
  CsvWriter w({"N", "max_error", "bound", "max_abs_g", "log_N", "boundary_error", "scalar_norm", "norm_bound",
               "passed"});
  bool all = true;
  for (std::int64_t N : Ns) {
    const PiecewiseLinearLink g = log_link_net(static_cast<int>(N));
    const double logN = std::log(static_cast<double>(N));
    double worst = 0.0, top = 0.0;
    for (std::int64_t i = 0; i <= grid; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(grid);
      const double v = g(t);
      top = std::max(top, std::abs(v));
      worst = std::max(worst, std::abs(logistic(v) - t));
    }
    const double boundary = std::max(std::abs(g.closed_form(0.0) + logN), std::abs(g.closed_form(1.0) - logN));
    const double norm = scalar_norm(g.net);
    const double bound = 3.0 / static_cast<double>(N);
    const bool ok = worst <= bound && top <= logN + 1e-12 && boundary == 0.0 && norm <= 6.0 * N;
    all = all && ok;
    w.add({std::to_string(N), csv(worst), csv(bound), csv(top), csv(logN), csv(boundary), csv(norm),
           csv(6.0 * N), ok ? "true" : "false"});
  }
  write_file(ctx, "approx_log.csv", w.text());
  *ctx.out << w.text();
  if (!all) throw PropertyFailure("log link approximation conditions fail for some N");
  return kExitOk;
}

int verb_check_ineq(Context& ctx) {
  Config& cfg = ctx.cfg;
  std::vector<std::string> all_checks = {"log2"};
  for (const std::string& n : check_suite_names()) all_checks.push_back(n);
  std::string def;
  for (const std::string& n : all_checks) def += (def.empty() ? "" : ",") + n;
  const std::string list = cfg.get_string("check-ineq", "checks", def);
  const int grid = static_cast<int>(cfg.get_int("check-ineq", "grid", 500));
  const int u_count = static_cast<int>(cfg.get_int("check-ineq", "u_count", 5));
  const int instances = static_cast<int>(cfg.get_int("check-ineq", "instances", 50));
  const int calibration_instances = static_cast<int>(cfg.get_int("check-ineq", "calibration_instances", 20));
  const std::int64_t samples = cfg.get_int("check-ineq", "samples", 100000);
  std::vector<std::string> checks;
  {
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (std::find(all_checks.begin(), all_checks.end(), item) == all_checks.end()) {
        throw ParseError("check-ineq.checks", cfg.line("check-ineq", "checks"), "unknown check '" + item + "'");
      }
      checks.push_back(item);
    }
  }
  cfg.finish({"run", "check-ineq"});
  CsvWriter w({"check", "instance", "kind", "lhs", "lhs_se", "rhs", "rhs_se", "passed"});
  bool ok = true;
  for (std::size_t k = 0; k < checks.size(); ++k) {
    const std::string& name = checks[k];
    if (name == "log2") {
      const Log2Report r = check_log2_inequality(grid, u_count);
      // lhs 0 against the smallest slack.
      w.add({name, "0", "grid", csv(0.0), csv(0.0), csv(r.min_slack), csv(0.0), r.passed ? "true" : "false"});
      *ctx.out << "log2: " << r.points << " points, " << r.violations << " violations, min slack "
               << csv(r.min_slack) << "\n";
      ok = ok && r.passed;
      continue;
    }
    const int count = name.find("calibration") != std::string::npos ? calibration_instances : instances;
    const std::vector<CheckRow> rows = run_check_suite(name, count, samples, stream_seed(ctx.seed, k));
    int failed = 0;
    for (const CheckRow& r : rows) {
      w.add({r.check, std::to_string(r.instance), r.kind, csv(r.lhs), csv(r.lhs_se), csv(r.rhs), csv(r.rhs_se),
             r.passed ? "true" : "false"});
      failed += !r.passed;
    }
    *ctx.out << name << ": " << rows.size() << " instances, " << failed << " failed\n";
    ok = ok && failed == 0;
  }
  write_file(ctx, "check_ineq.csv", w.text());
  if (!ok) throw PropertyFailure("an inequality check failed");
  return kExitOk;
}

ExperimentConfig parse_experiment(Context& ctx) {
  Config& cfg = ctx.cfg;
  ExperimentConfig e;
  const std::string loss = cfg.get_string("experiment", "loss", "");
  if (loss.empty()) throw ParseError("experiment.loss", cfg.line("experiment"), "missing required key");
  e.loss = parse_loss(loss);
  e.n_schedule = cfg.get_int_list("experiment", "n_schedule", {256, 512, 1024, 2048, 4096, 8192});
  e.repeats = static_cast<int>(cfg.get_int("experiment", "repeats", 5));
  e.eval_samples = cfg.get_int("experiment", "eval_samples", 20000);
  e.record_wall_time = cfg.get_bool("experiment", "record_wall_time", false);
  const std::string noise = cfg.get_string("experiment", "noise", "gaussian");
  const double noise_level = cfg.get_double("experiment", "noise_level", 0.5);
  e.seed = ctx.seed;

  const std::string family = cfg.get_string("target", "family", "");
  if (family.empty()) throw ParseError("target.family", cfg.line("target"), "missing required key");
  const int d = static_cast<int>(cfg.get_int("target", "d", 2));
  const std::uint64_t target_seed = cfg.get_uint("target", "seed", ctx.seed);
  std::map<std::string, double> params;
  for (const std::string& key : cfg.keys("target")) {
    if (key == "family" || key == "d" || key == "seed") continue;
    params[key] = cfg.get_double("target", key, 0.0);
  }
  if (e.loss == Loss::squared) {
    e.target = make_regression_target(family, d, params, target_seed);
    e.noise = parse_noise(noise, noise_level);
  } else {
    e.target = make_eta(family, d, params);
  }

  TrainConfig& t = e.train;
  t.s = static_cast<int>(cfg.get_int("train", "s", t.s));
  t.J = static_cast<int>(cfg.get_int("train", "J", t.J));
  t.epochs = static_cast<int>(cfg.get_int("train", "epochs", t.epochs));
  t.batch = static_cast<int>(cfg.get_int("train", "batch", t.batch));
  t.learning_rate = cfg.get_double("train", "learning_rate", t.learning_rate);
  t.lr_decay = cfg.get_double("train", "lr_decay", t.lr_decay);
  t.restarts = static_cast<int>(cfg.get_int("train", "restarts", t.restarts));
  t.init_scale = cfg.get_double("train", "init_scale", t.init_scale);
  t.deep_init_noise = cfg.get_double("train", "deep_init_noise", t.deep_init_noise);
  t.parametrization = parse_parametrization(
      cfg.get_string("train", "parametrization", parametrization_name(t.parametrization)));

  RateParameters& rp = e.rates;
  rp.d = d;
  rp.alpha = cfg.get_double("schedule", "alpha", 1.0);
  rp.q = cfg.get_double("schedule", "q", e.target.has_tsybakov ? e.target.q : 1.0);
  rp.beta = cfg.get_double("schedule", "beta", e.target.has_svb ? e.target.svb_beta : 1.0);
  e.constants.L_factor = cfg.get_double("schedule", "L_factor", e.constants.L_factor);
  e.constants.M_factor = cfg.get_double("schedule", "M_factor", e.constants.M_factor);
  e.constants.B_factor = cfg.get_double("schedule", "B_factor", e.constants.B_factor);
  const bool fixed = cfg.has("schedule", "L") || cfg.has("schedule", "M") || cfg.has("schedule", "B");
  const std::int64_t L = cfg.get_int("schedule", "L", 0);
  const double M = cfg.get_double("schedule", "M", 0.0);
  const double B = cfg.get_double("schedule", "B", 0.0);
  if (fixed) {
    if (!(cfg.has("schedule", "L") && cfg.has("schedule", "M") && cfg.has("schedule", "B"))) {
      throw ParseError("schedule.L", cfg.line("schedule"), "a fixed architecture needs all of L, M and B");
    }
    const Architecture arch{static_cast<int>(L), M, B};
    e.architecture = [arch](std::int64_t) { return arch; };
  }
  cfg.finish({"run", "experiment", "target", "train", "schedule"});

  validate(t, d);
  for (std::int64_t n : e.n_schedule) {
    const Architecture a = e.architecture ? e.architecture(n) : rate_schedule(e.loss, n, rp, e.constants);
    TrainConfig probe = t;
    probe.L = a.L;
    probe.M = a.M;
    probe.B = a.B;
    validate(probe, d);
  }
  return e;
}

void add_cells(CsvWriter& w, const std::vector<CellResult>& cells) {
  for (const CellResult& c : cells) {
    w.add({"cell", loss_name(c.loss), std::to_string(c.n), std::to_string(c.L), csv(c.M), csv(c.B),
           std::to_string(c.seed), csv(c.excess_risk), csv(c.standard_error), csv(c.wall_time), csv(c.train_risk)});
  }
}

const std::vector<std::string> kExperimentHeader = {"row_type",  "loss",    "n",          "L",
                                                    "M",         "B",       "seed",       "excess_risk",
                                                    "stderr",    "wall_time", "train_risk", "slope",
                                                    "intercept", "theory_slope"};

int verb_experiment(Context& ctx) {
  const ExperimentConfig e = parse_experiment(ctx);
  CsvWriter w(kExperimentHeader);
  ExperimentResult r;
  try {
    r = run_rate_experiment(e);
  } catch (const ExperimentFailure& f) {
    add_cells(w, f.partial());
    write_file(ctx, "experiment_partial.csv", w.text());
    throw;
  }
  add_cells(w, r.cells);
  for (std::size_t i = 0; i < e.n_schedule.size(); ++i) {
    w.add({"mean", loss_name(e.loss), std::to_string(e.n_schedule[i]), "", "", "", "", csv(r.mean_error[i])});
  }
  std::vector<std::string> fit(kExperimentHeader.size());
  fit[0] = "fit";
  fit[1] = loss_name(e.loss);
  fit[11] = csv(r.fit.slope);
  fit[12] = csv(r.fit.intercept);
  fit[13] = csv(r.theory_slope);
  w.add(fit);
  write_file(ctx, "experiment.csv", w.text());
  *ctx.out << "loss " << loss_name(e.loss) << ", target " << e.target.description << "\n";
  for (std::size_t i = 0; i < e.n_schedule.size(); ++i) {
    const CellResult& c = r.cells[i * static_cast<std::size_t>(e.repeats)];
    *ctx.out << "n " << e.n_schedule[i] << "  L " << c.L << "  M " << csv(c.M) << "  mean excess "
             << csv(r.mean_error[i]) << "\n";
  }
  *ctx.out << "fitted slope " << csv(r.fit.slope) << ", theory slope " << csv(r.theory_slope) << ", inversions "
           << r.inversions << "\n";
  return kExitOk;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// Reads (n, error) from a CSV with columns n and error, or from the mean rows
// of an experiment CSV.
void read_rate_csv(const std::string& path, std::vector<double>& n, std::vector<double>& error) {
  std::ifstream in(path);
  if (!in) throw ParseError("fit-rate.input", 0, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("fit-rate.input", 1, "empty file");
  const auto header = split_csv_line(line);
  auto col = [&](const std::string& name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int row_type = col("row_type");
  const int n_col = col("n");
  const int e_col = row_type >= 0 ? col("excess_risk") : col("error");
  if (n_col < 0 || e_col < 0) throw ParseError("fit-rate.input", 1, "need columns n and error (or excess_risk)");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (row_type >= 0 && (static_cast<int>(cells.size()) <= row_type || cells[row_type] != "mean")) continue;
    if (static_cast<int>(cells.size()) <= std::max(n_col, e_col)) throw ParseError("fit-rate.input", lineno, "short row");
    char* end = nullptr;
    const double nv = std::strtod(cells[n_col].c_str(), &end);
    if (*end != '\0' || cells[n_col].empty()) throw ParseError("n", lineno, "expected a number");
    const double ev = std::strtod(cells[e_col].c_str(), &end);
    if (*end != '\0' || cells[e_col].empty()) throw ParseError("error", lineno, "expected a number");
    n.push_back(nv);
    error.push_back(ev);
  }
}

int verb_fit_rate(Context& ctx) {
  Config& cfg = ctx.cfg;
  const std::string input = cfg.get_string("fit-rate", "input", "");
  std::vector<double> n = cfg.get_double_list("fit-rate", "n", {});
  std::vector<double> error = cfg.get_double_list("fit-rate", "error", {});
  cfg.finish({"run", "fit-rate"});
  if (!input.empty()) {
    if (!n.empty() || !error.empty()) throw ParseError("fit-rate.input", cfg.line("fit-rate", "input"), "give either input or n/error");
    read_rate_csv(input, n, error);
  } else if (n.empty() || error.empty()) {
    throw ParseError("fit-rate", cfg.line("fit-rate"), "need input, or both n and error");
  }
  const RateFit fit = fit_rate(n, error);
  CsvWriter w({"row_type", "n", "error", "residual", "slope", "intercept"});
  for (std::size_t i = 0; i < fit.n.size(); ++i) {
    w.add({"point", csv(fit.n[i]), csv(fit.error[i]), csv(fit.residuals[i])});
  }
  w.add({"fit", "", "", "", csv(fit.slope), csv(fit.intercept)});
  write_file(ctx, "fit_rate.csv", w.text());
  *ctx.out << "slope " << csv(fit.slope) << ", intercept " << csv(fit.intercept) << "\n";
  return kExitOk;
}

int error_record(std::ostream& err, int code, const std::string& kind, const std::string& message,
                 json extra = json::object()) {
  json j = {{"status", "error"}, {"exit_code", code}, {"kind", kind}, {"message", message}};
  j.update(extra);
  err << j.dump() << "\n";
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Norm-constrained CNN calculus and rate experiments", "convrates"};
  app.require_subcommand(1);
  std::string config_path, output_dir;
  std::optional<std::uint64_t> seed;

  const std::vector<std::pair<std::string, std::string>> verbs = {
      {"compile", "compile a shallow ReLU net into a CNN"},
      {"verify-compile", "compile and check exactness and the kappa bound"},
      {"entropy", "covering recursion and entropy bound over (L, M, eps)"},
      {"cover-check", "brute-force eps-net check for a tiny CNN"},
      {"approx-log", "log link approximation errors over N"},
      {"check-ineq", "scalar grid and Monte-Carlo inequality checks"},
      {"experiment", "rate experiment over an n schedule"},
      {"fit-rate", "log-log slope fit of (n, error) pairs"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : verbs) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config,-c", config_path, "configuration file");
    sub->add_option("--output,-o", output_dir, "output directory");
    sub->add_option("--seed", seed, "global seed");
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return error_record(err, kExitConfig, "usage-error", e.what());
  }

  std::string verb;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) verb = name;
  }

  try {
    Context ctx;
    ctx.out = &out;
    if (!config_path.empty()) ctx.cfg = Config::load(config_path);
    const std::uint64_t file_seed = ctx.cfg.get_uint("run", "seed", 0);
    ctx.seed = seed ? *seed : file_seed;
    const std::string file_output = ctx.cfg.get_string("run", "output", "");
    if (!output_dir.empty()) {
      ctx.output = output_dir;
    } else if (!file_output.empty()) {
      ctx.output = file_output;
    } else if (const char* env = std::getenv("CONVRATES_OUTPUT_DIR"); env && *env) {
      ctx.output = env;
    } else {
      ctx.output = "convrates-output";
    }

    if (verb == "experiment") return verb_experiment(ctx);
    SerialScope serial;
    if (verb == "compile") return verb_compile(ctx);
    if (verb == "verify-compile") return verb_verify_compile(ctx);
    if (verb == "entropy") return verb_entropy(ctx);
    if (verb == "cover-check") return verb_cover_check(ctx);
    if (verb == "approx-log") return verb_approx_log(ctx);
    if (verb == "check-ineq") return verb_check_ineq(ctx);
    if (verb == "fit-rate") return verb_fit_rate(ctx);
    return error_record(err, kExitConfig, "usage-error", "unknown verb " + verb);
  } catch (const ParseError& e) {
    return error_record(err, kExitConfig, "parse-error", e.what(), {{"line", e.line()}, {"field", e.field()}});
  } catch (const PreconditionError& e) {
    return error_record(err, kExitPrecondition, "precondition-violation", e.what(), {{"invariant", e.invariant()}});
  } catch (const PropertyFailure& e) {
    return error_record(err, kExitProperty, "property-failure", e.what());
  } catch (const TrainingFailure& e) {
    return error_record(err, kExitGeneric, "training-failure", e.what(), {{"trace", e.trace()}});
  } catch (const std::exception& e) {
    return error_record(err, kExitGeneric, "error", e.what());
  }
}

}  // namespace convrates
