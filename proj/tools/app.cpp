#include "app.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ehom/corrector.hpp"
#include "ehom/energy.hpp"
#include "ehom/errors.hpp"
#include "ehom/field_io.hpp"
#include "ehom/homogenize.hpp"
#include "ehom/montecarlo.hpp"
#include "ehom/moser.hpp"

namespace ehom::app {

using nlohmann::json;

namespace {

const std::vector<std::string> kStageOrder = {"gen",          "validate", "solve",   "effective",
                                              "sublinearity", "audit",    "simulate"};

double number(const json& j, const std::string& key) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "Infinity") {
      return kInf;
    }
    throw ConfigError("parameter '" + key + "' must be a number or \"inf\"");
  }
  if (!j.is_number()) {
    throw ConfigError("parameter '" + key + "' must be a number");
  }
  return j.get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& path) {
  return obj.contains(key) ? number(obj.at(key), path + "." + key) : fallback;
}

int integer_or(const json& obj, const std::string& key, int fallback, const std::string& path) {
  if (!obj.contains(key)) {
    return fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError("parameter '" + path + "." + key + "' must be an integer");
  }
  return v.get<int>();
}

std::vector<int> sizes_of(const json& obj, const std::string& path) {
  if (!obj.contains("sizes") || !obj.at("sizes").is_array()) {
    throw ConfigError("parameter '" + path + ".sizes' must be an array of integers");
  }
  std::vector<int> out;
  for (const auto& v : obj.at("sizes")) {
    if (!v.is_number_integer() || v.get<int>() < 2) {
      throw ConfigError("parameter '" + path + ".sizes' must hold integers >= 2");
    }
    out.push_back(v.get<int>());
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i] <= out[i - 1]) {
      throw ConfigError("parameter '" + path + ".sizes' must be strictly increasing");
    }
  }
  return out;
}

json encode(double v) {
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  if (std::isnan(v)) {
    return nullptr;
  }
  return v;
}

json encode(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(encode(m(i, j)));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Model parse_model(const json& env) {
  const std::string name = env.value("model", std::string("identity"));
  const std::string p = "environment";
  if (name == "identity") {
    return model::Identity{};
  }
  if (name == "scaled_identity") {
    return model::ScaledIdentity{number_or(env, "c", 1.0, p)};
  }
  if (name == "laminate_two_phase" || name == "laminate") {
    return model::Laminate{number_or(env, "a_low", 1.0, p), number_or(env, "a_high", 4.0, p),
                           number_or(env, "volume_fraction", 0.5, p)};
  }
  if (name == "checkerboard") {
    return model::Checkerboard{number_or(env, "a_low", 1.0, p), number_or(env, "a_high", 4.0, p),
                               integer_or(env, "tile_cells", 1, p)};
  }
  if (name == "heavy_tail") {
    return model::HeavyTail{number_or(env, "tail_index_lo", 3.0, p), number_or(env, "tail_index_hi", 3.0, p),
                            integer_or(env, "correlation_cells", 1, p)};
  }
  if (name == "bessel_trap") {
    return model::BesselTrap{number_or(env, "exponent", 2.0, p)};
  }
  throw ConfigError("unknown environment.model '" + name + "'");
}

/// Size-compatibility of a preset with an n^d box.
void check_size(const EnvironmentSpec& spec, int n, const std::string& where) {
  if (n < 2) {
    throw ConfigError("parameter '" + where + "' must be >= 2");
  }
  if (const auto* cb = std::get_if<model::Checkerboard>(&spec.model)) {
    if (n % (2 * cb->tile_cells) != 0) {
      throw ConfigError("parameter '" + where + "' = " + std::to_string(n) +
                        " is not a multiple of 2 * environment.tile_cells");
    }
  }
  if (const auto* ht = std::get_if<model::HeavyTail>(&spec.model)) {
    if (n % ht->correlation_cells != 0) {
      throw ConfigError("parameter '" + where + "' = " + std::to_string(n) +
                        " is not a multiple of environment.correlation_cells");
    }
  }
}

Preconditioner parse_preconditioner(const std::string& s) {
  if (s == "none") {
    return Preconditioner::none;
  }
  if (s == "jacobi") {
    return Preconditioner::jacobi;
  }
  if (s == "multigrid") {
    return Preconditioner::multigrid;
  }
  throw ConfigError("unknown solver.preconditioner '" + s + "'");
}

} // namespace

RunConfig parse_config(const json& j) {
  if (!j.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  RunConfig c;
  c.source = j;
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) {
      throw ConfigError("parameter 'seed' must be an unsigned integer");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  const json env = j.value("environment", json::object());
  c.environment.model = parse_model(env);
  c.environment.dimension = integer_or(env, "dimension", 2, "environment");
  c.environment.seed = env.contains("seed") ? env.at("seed").get<std::uint64_t>() : c.seed;
  c.environment.validate();

  const json grid = j.value("grid", json::object());
  c.cells_per_side = integer_or(grid, "cells_per_side", 64, "grid");
  if (grid.contains("spacing")) {
    c.spacing = number(grid.at("spacing"), "grid.spacing");
    if (!(*c.spacing > 0.0) || !std::isfinite(*c.spacing)) {
      throw ConfigError("parameter 'grid.spacing' must be finite and > 0");
    }
  }
  check_size(c.environment, c.cells_per_side, "grid.cells_per_side");

  const json mom = j.value("moments", json::object());
  c.p = number_or(mom, "p", kInf, "moments");
  c.q = number_or(mom, "q", kInf, "moments");
  if (!(c.p >= 1.0) || !(c.q >= 1.0)) {
    throw ConfigError("parameters 'moments.p' and 'moments.q' must be >= 1");
  }
  const int d = c.environment.dimension;
  if (!moments_admissible(c.p, c.q, d)) {
    std::ostringstream os;
    os << "moments (p, q, d) = (" << c.p << ", " << c.q << ", " << d << ") violate 1/p + 1/q < 2/d";
    throw ConfigError(os.str());
  }
  if (mom.contains("sweep")) {
    SweepConfig s;
    s.sizes = sizes_of(mom.at("sweep"), "moments.sweep");
    s.seeds = integer_or(mom.at("sweep"), "seeds", 1, "moments.sweep");
    if (s.sizes.size() < 2 || s.seeds < 1) {
      throw ConfigError("parameter 'moments.sweep' needs >= 2 sizes and seeds >= 1");
    }
    for (int n : s.sizes) {
      check_size(c.environment, n, "moments.sweep.sizes");
    }
    c.moment_sweep = s;
  }

  const json sol = j.value("solver", json::object());
  c.solver.tol = number_or(sol, "tol", 1e-10, "solver");
  c.solver.max_iter = integer_or(sol, "max_iter", 20000, "solver");
  c.solver.preconditioner = parse_preconditioner(sol.value("preconditioner", std::string("multigrid")));
  if (!(c.solver.tol > 0.0) || c.solver.max_iter < 1) {
    throw ConfigError("parameters 'solver.tol' > 0 and 'solver.max_iter' >= 1 required");
  }

  const json bounds = j.value("bounds", json::object());
  c.random_directions = integer_or(bounds, "random_directions", 20, "bounds");
  if (c.random_directions < 0) {
    throw ConfigError("parameter 'bounds.random_directions' must be >= 0");
  }

  if (j.contains("sublinearity")) {
    const json& s = j.at("sublinearity");
    SublinearityConfig sc;
    sc.radius = number_or(s, "radius", 0.25, "sublinearity");
    sc.sizes = sizes_of(s, "sublinearity");
    sc.seeds = integer_or(s, "seeds", 1, "sublinearity");
    if (!(sc.radius > 0.0) || sc.radius > 0.25) {
      throw ConfigError("parameter 'sublinearity.radius' must lie in (0, 0.25]");
    }
    if (sc.seeds < 1) {
      throw ConfigError("parameter 'sublinearity.seeds' must be >= 1");
    }
    for (int n : sc.sizes) {
      check_size(c.environment, n, "sublinearity.sizes");
    }
    c.sublinearity = sc;
  }

  if (j.contains("audit")) {
    const json& a = j.at("audit");
    AuditConfig ac;
    ac.sigma_prime = number_or(a, "sigma_prime", 0.5, "audit");
    ac.sigma = number_or(a, "sigma", 1.0, "audit");
    ac.radius = number_or(a, "radius", 0.25, "audit");
    if (a.contains("alpha")) {
      ac.alpha = number(a.at("alpha"), "audit.alpha");
    }
    ac.truncation = integer_or(a, "truncation", 64, "audit");
    ac.component = integer_or(a, "component", 0, "audit");
    ac.sizes = sizes_of(a, "audit");
    if (!(ac.sigma_prime >= 0.5 && ac.sigma_prime < ac.sigma && ac.sigma <= 1.0)) {
      throw ConfigError("parameters 'audit.sigma_prime' and 'audit.sigma' need 1/2 <= sigma' < sigma <= 1");
    }
    if (!(ac.radius > 0.0) || ac.radius > 0.25) {
      throw ConfigError("parameter 'audit.radius' must lie in (0, 0.25]");
    }
    if (ac.component < 0 || ac.component >= d) {
      throw ConfigError("parameter 'audit.component' out of range");
    }
    for (int n : ac.sizes) {
      check_size(c.environment, n, "audit.sizes");
    }
    // Rejects d < 2, unbounded rho and bad alpha / K before any compute.
    moser_exponents(c.p, c.q, d, ac.alpha.value_or(2.0 * holder_conjugate(c.p)), ac.truncation);
    c.audit = ac;
  }

  if (j.contains("montecarlo")) {
    const json& m = j.at("montecarlo");
    MonteCarloConfig mc;
    mc.paths = integer_or(m, "paths", 10000, "montecarlo");
    mc.t_max = number_or(m, "t_max", 1.0, "montecarlo");
    mc.record_stride = number_or(m, "record_stride", 0.0, "montecarlo");
    mc.theta = m.value("theta", std::string("none"));
    mc.theta_value = number_or(m, "theta_value", 1.0, "montecarlo");
    mc.trace_paths = integer_or(m, "trace_paths", 0, "montecarlo");
    mc.random_start = m.value("random_start", false);
    mc.ks_threshold = number_or(m, "ks_threshold", 0.01, "montecarlo");
    mc.cov_tolerance = number_or(m, "cov_tolerance", 0.05, "montecarlo");
    if (mc.paths < 1 || !(mc.t_max > 0.0) || !std::isfinite(mc.t_max)) {
      throw ConfigError("parameters 'montecarlo.paths' >= 1 and finite 'montecarlo.t_max' > 0 required");
    }
    if (mc.theta != "none" && mc.theta != "constant" && mc.theta != "Lambda" && mc.theta != "lambda") {
      throw ConfigError("parameter 'montecarlo.theta' must be none, constant, Lambda or lambda");
    }
    if (mc.theta == "constant" && !(mc.theta_value > 0.0)) {
      throw ConfigError("parameter 'montecarlo.theta_value' must be > 0");
    }
    if (mc.trace_paths < 0 || mc.trace_paths > mc.paths) {
      throw ConfigError("parameter 'montecarlo.trace_paths' must lie in [0, paths]");
    }
    c.montecarlo = mc;
  }

  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    OracleConfig oc;
    if (!o.contains("D") || !o.at("D").is_array() || o.at("D").size() != static_cast<std::size_t>(d)) {
      throw ConfigError("parameter 'oracle.D' must be a d x d array");
    }
    for (const auto& row : o.at("D")) {
      if (!row.is_array() || row.size() != static_cast<std::size_t>(d)) {
        throw ConfigError("parameter 'oracle.D' must be a d x d array");
      }
      std::vector<double> r;
      for (const auto& v : row) {
        r.push_back(number(v, "oracle.D"));
      }
      oc.D.push_back(std::move(r));
    }
    oc.tolerance = number_or(o, "tolerance", 0.02, "oracle");
    c.oracle = oc;
  }

  if (j.contains("stages")) {
    for (const auto& s : j.at("stages")) {
      const std::string name = s.get<std::string>();
      if (std::find(kStageOrder.begin(), kStageOrder.end(), name) == kStageOrder.end()) {
        throw ConfigError("unknown stage '" + name + "' in 'stages'");
      }
      c.stages.push_back(name);
    }
  }
  if (j.contains("output_dir")) {
    c.output_dir = j.at("output_dir").get<std::string>();
  }
  c.threads = integer_or(j, "threads", 1, "config");
  if (c.threads < 1) {
    throw ConfigError("parameter 'threads' must be >= 1");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

std::optional<OracleConfig> default_oracle(const RunConfig& config) {
  if (config.oracle) {
    return config.oracle;
  }
  const int d = config.environment.dimension;
  auto diag = [d](std::vector<double> v) {
    OracleConfig o;
    o.D.assign(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int i = 0; i < d; ++i) {
      o.D[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)];
    }
    return o;
  };
  if (std::holds_alternative<model::Identity>(config.environment.model)) {
    OracleConfig o = diag(std::vector<double>(static_cast<std::size_t>(d), 2.0));
    o.tolerance = 1e-8;
    return o;
  }
  if (const auto* s = std::get_if<model::ScaledIdentity>(&config.environment.model)) {
    OracleConfig o = diag(std::vector<double>(static_cast<std::size_t>(d), 2.0 * s->c));
    o.tolerance = 1e-8;
    return o;
  }
  if (const auto* l = std::get_if<model::Laminate>(&config.environment.model)) {
    // Series mean across the layers, parallel mean along them, using the
    // volume fraction the grid actually realises.
    const int n = config.cells_per_side;
    const double f = static_cast<double>(std::llround(l->volume_fraction * n)) / n;
    std::vector<double> v(static_cast<std::size_t>(d), 2.0 * (f * l->a_low + (1.0 - f) * l->a_high));
    v[0] = 2.0 / (f / l->a_low + (1.0 - f) / l->a_high);
    OracleConfig o = diag(v);
    o.tolerance = 1e-6;
    return o;
  }
  if (const auto* cb = std::get_if<model::Checkerboard>(&config.environment.model)) {
    if (d == 2) {
      OracleConfig o = diag(std::vector<double>(2, 2.0 * std::sqrt(cb->a_low * cb->a_high)));
      o.tolerance = 0.02;
      return o;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

json moment_json(const MomentReport& r) {
  return {{"p", encode(r.p)},
          {"q", encode(r.q)},
          {"emp_lambda_inv_q", encode(r.emp_lambda_inv_q)},
          {"emp_Lambda_p", encode(r.emp_Lambda_p)},
          {"condition_value", r.condition_value},
          {"threshold", r.threshold},
          {"admissible", r.admissible}};
}

json schedule_json(const MoserSchedule& s) {
  return {{"p", encode(s.p)},
          {"q", encode(s.q)},
          {"d", s.d},
          {"alpha", s.alpha},
          {"truncation", s.truncation},
          {"p_star", s.p_star},
          {"rho", s.rho},
          {"ratio", s.ratio},
          {"kappa", s.kappa},
          {"kappa_partial", s.kappa_partial},
          {"kappa_tail_bound", s.kappa_tail_bound},
          {"gamma", s.gamma},
          {"gamma_tail_bound", s.gamma_tail_bound},
          {"theta", s.theta},
          {"kappa_prime", s.kappa_prime},
          {"kappa_prime_partial", s.kappa_prime_partial},
          {"kappa_prime_tail_bound", s.kappa_prime_tail_bound},
          {"gamma_prime", s.gamma_prime}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot write " + path.string());
  }
  out << text;
}

std::vector<std::string> closure(const std::vector<std::string>& requested) {
  std::vector<std::string> want = requested;
  auto need = [&](const std::string& s) {
    if (std::find(want.begin(), want.end(), s) == want.end()) {
      want.push_back(s);
    }
  };
  auto has = [&](const std::string& s) { return std::find(want.begin(), want.end(), s) != want.end(); };
  if (has("simulate")) {
    need("effective");
  }
  if (has("effective")) {
    need("solve");
  }
  if (has("solve") || has("validate")) {
    need("gen");
  }
  std::vector<std::string> ordered;
  for (const auto& s : kStageOrder) {
    if (has(s)) {
      ordered.push_back(s);
    }
  }
  return ordered;
}

struct CheckList {
  json items = json::array();
  bool passed = true;
  void add(const std::string& name, bool ok, const std::string& detail) {
    items.push_back({{"name", name}, {"passed", ok}, {"detail", detail}});
    passed = passed && ok;
  }
};

} // namespace

nlohmann::json run_pipeline(RunConfig config, const std::vector<std::string>& requested, const RunOptions& options) {
  if (options.seed) {
    config.seed = *options.seed;
    config.environment.seed = *options.seed;
  }
  if (options.output_dir) {
    config.output_dir = *options.output_dir;
  }
  if (options.threads) {
    config.threads = *options.threads;
  }
  std::vector<std::string> stages = requested;
  if (stages.empty()) {
    stages = config.stages;
  }
  if (stages.empty()) {
    stages = {"gen", "validate", "solve", "effective"};
    if (config.sublinearity) {
      stages.push_back("sublinearity");
    }
    if (config.audit) {
      stages.push_back("audit");
    }
    if (config.montecarlo) {
      stages.push_back("simulate");
    }
  }
  stages = closure(stages);
  for (const auto& s : stages) {
    if (s == "sublinearity" && !config.sublinearity) {
      throw ConfigError("stage 'sublinearity' needs a 'sublinearity' block in the config");
    }
    if (s == "audit" && !config.audit) {
      throw ConfigError("stage 'audit' needs an 'audit' block in the config");
    }
    if (s == "simulate" && !config.montecarlo) {
      throw ConfigError("stage 'simulate' needs a 'montecarlo' block in the config");
    }
  }
  std::filesystem::create_directories(config.output_dir);

  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["tool_version"] = kToolVersion;
  report["config"] = config.source;
  report["seed"] = config.seed;
  report["stages"] = stages;
  json timings = json::object();
  CheckList checks;

  const EnvironmentSpec& spec = config.environment;
  const int n = config.cells_per_side;
  const double h = config.effective_spacing();
  std::optional<CoefficientField> field;
  std::optional<DirichletForm> form;
  std::optional<CorrectorField> correctors;
  std::optional<EffectiveMatrix> D;
  auto has = [&](const std::string& s) { return std::find(stages.begin(), stages.end(), s) != stages.end(); };

  if (has("gen")) {
    Clock t;
    field.emplace(generate_field(spec, n, h));
    write_field(config.output_dir / "field.ehf", *field);
    report["field"] = {{"model", spec.model_name()},
                       {"dimension", spec.dimension},
                       {"seed", spec.seed},
                       {"cells_per_side", n},
                       {"spacing", h},
                       {"hash", field->hash()},
                       {"degenerate", field->degenerate()},
                       {"file", "field.ehf"}};
    timings["gen"] = t.seconds();
  }

  if (has("validate")) {
    Clock t;
    const MomentReport mr = validate_moments(*field, config.p, config.q);
    json v = moment_json(mr);
    bool admissible = mr.admissible;
    if (config.moment_sweep) {
      const MomentSweep sw =
          moment_sweep(spec, config.p, config.q, config.moment_sweep->sizes, config.moment_sweep->seeds);
      json rows = json::array();
      for (std::size_t i = 0; i < sw.sizes.size(); ++i) {
        rows.push_back({{"cells_per_side", sw.sizes[i]},
                        {"emp_lambda_inv_q", encode(sw.lambda_inv_q[i])},
                        {"emp_Lambda_p", encode(sw.Lambda_p[i])}});
      }
      v["sweep"] = {{"rows", rows},
                    {"lambda_growth_slope", encode(sw.lambda_growth_slope)},
                    {"Lambda_growth_slope", encode(sw.Lambda_growth_slope)},
                    {"diverging", sw.diverging},
                    {"admissible", sw.admissible}};
      admissible = admissible && sw.admissible;
    }
    v["verdict_admissible"] = admissible;
    report["moments"] = v;
    checks.add("moments", admissible, admissible ? "moment condition holds" : "moment condition violated");
    timings["validate"] = t.seconds();
  }

  if (has("solve")) {
    Clock t;
    form.emplace(*field);
    correctors.emplace(solve_correctors(*form, config.solver.tol, config.solver.max_iter,
                                        config.solver.preconditioner));
    {
      std::ofstream out(config.output_dir / "chi.chi1", std::ios::binary);
      write_scalar_fields(out, to_scalar_fields(*correctors));
    }
    const HarmonicCoordinates hc = harmonic_coordinates(*form, *correctors);
    const CorrectorDiagnostics diag = mean_zero_and_energy_checks(*correctors, *form);
    json per = json::array();
    for (int k = 0; k < correctors->dim; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      per.push_back({{"component", k + 1},
                     {"iterations", correctors->stats[ku].iterations},
                     {"relative_residual", correctors->stats[ku].relative_residual},
                     {"residual_norm", correctors->stats[ku].residual_norm},
                     {"mean", diag.chi_mean[ku]},
                     {"gradient_mean", diag.gradient_mean[ku]},
                     {"energy_per_volume", diag.energy_per_volume[ku]},
                     {"harmonicity_residual", hc.harmonicity_residual[ku]}});
    }
    report["solve"] = {{"tol", config.solver.tol}, {"components", per}, {"file", "chi.chi1"}};
    timings["solve"] = t.seconds();
  }

  if (has("effective")) {
    Clock t;
    D.emplace(effective_matrix(*form, *correctors));
    const auto dirs = test_directions(spec.dimension, config.random_directions, config.seed);
    const BoundsReport br = check_bounds(*D, *field, dirs);
    json rows = json::array();
    for (const auto& r : br.rows) {
      rows.push_back({{"xi", r.xi},
                      {"value", r.value},
                      {"lower", r.lower},
                      {"upper", r.upper},
                      {"lower_ok", r.lower_ok},
                      {"upper_ok", r.upper_ok},
                      {"lower_tight", r.lower_tight},
                      {"upper_tight", r.upper_tight}});
    }
    report["effective"] = {{"D", encode(D->D)},
                           {"error_bar", encode(D->error_bar)},
                           {"asymmetry", D->asymmetry},
                           {"eigenvalues", std::vector<double>(D->eigenvalues.data(),
                                                               D->eigenvalues.data() + D->eigenvalues.size())},
                           {"field_hash", D->field_hash}};
    report["bounds"] = {{"slack", br.slack}, {"all_ok", br.all_ok}, {"rows", rows}};
    checks.add("bounds", br.all_ok, "variational bounds on " + std::to_string(br.rows.size()) + " directions");
    if (const auto oracle = default_oracle(config)) {
      double err = 0.0;
      double scale = 0.0;
      for (int i = 0; i < spec.dimension; ++i) {
        for (int j = 0; j < spec.dimension; ++j) {
          const double o = oracle->D[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          err = std::max(err, std::abs(D->D(i, j) - o));
          scale = std::max(scale, std::abs(o));
        }
      }
      const double rel = err / scale;
      const bool ok = rel <= oracle->tolerance;
      std::ostringstream os;
      os << "max |D - D_oracle| / max |D_oracle| = " << rel << " (tolerance " << oracle->tolerance << ")";
      json o = json::array();
      for (const auto& r : oracle->D) {
        o.push_back(r);
      }
      report["oracle"] = {{"D", o}, {"tolerance", oracle->tolerance}, {"relative_error", rel}, {"passed", ok}};
      checks.add("oracle", ok, os.str());
    }
    timings["effective"] = t.seconds();
  }

  if (has("sublinearity")) {
    Clock t;
    const auto& sc = *config.sublinearity;
    const SublinearityCurve curve =
        sublinearity_scan(spec, sc.radius, sc.sizes, sc.seeds, config.solver.tol, config.solver.max_iter);
    json rows = json::array();
    for (const auto& r : curve.rows) {
      rows.push_back({{"epsilon", r.epsilon}, {"sup_norm", r.sup_norm}, {"seed", r.seed}});
    }
    report["sublinearity"] = {{"radius", curve.radius},
                              {"rows", rows},
                              {"epsilons", curve.epsilons},
                              {"mean_sup_norms", curve.mean_sup_norms},
                              {"slope", curve.slope ? json(*curve.slope) : json(nullptr)},
                              {"decreasing_pairs", curve.decreasing_pairs},
                              {"file", "sublinearity.csv"}};
    write_text(config.output_dir / "sublinearity.csv", curve.to_csv());
    timings["sublinearity"] = t.seconds();
  }

  if (has("audit")) {
    Clock t;
    const auto& ac = *config.audit;
    const MoserSchedule sched = moser_exponents(config.p, config.q, spec.dimension,
                                                ac.alpha.value_or(2.0 * holder_conjugate(config.p)), ac.truncation);
    const MoserAuditReport ar = moser_audit(spec, sched, ac.radius, ac.sigma_prime, ac.sigma, ac.sizes,
                                            ac.component, config.solver.tol, config.solver.max_iter);
    json rows = json::array();
    for (const auto& r : ar.rows) {
      rows.push_back({{"epsilon", r.epsilon},
                      {"lhs", r.lhs},
                      {"moment_factor", r.moment_factor},
                      {"alpha_norm", r.alpha_norm},
                      {"rhs_core", r.rhs_core},
                      {"ratio", r.ratio}});
    }
    const auto spread = ar.spread();
    report["schedule"] = schedule_json(sched);
    report["audit"] = {{"radius", ar.radius},
                       {"sigma_prime", ar.sigma_prime},
                       {"sigma", ar.sigma},
                       {"component", ar.component + 1},
                       {"rows", rows},
                       {"max_ratio", ar.max_ratio},
                       {"min_ratio", ar.min_ratio},
                       {"spread", spread ? json(*spread) : json(nullptr)},
                       {"file", "audit.csv"}};
    write_text(config.output_dir / "audit.csv", ar.to_csv());
    timings["audit"] = t.seconds();
  }

  if (has("simulate")) {
    Clock t;
    const auto& mc = *config.montecarlo;
    WalkConfig wc;
    wc.t_max = mc.t_max;
    wc.paths = mc.paths;
    wc.seed = config.seed;
    wc.record_stride = mc.record_stride;
    wc.random_start = mc.random_start;
    wc.threads = config.threads;
    RecordSpec rs;
    rs.functionals = quadratic_variation_densities(*form, *correctors);
    std::vector<double> inv_lambda(field->num_cells());
    for (std::size_t c = 0; c < inv_lambda.size(); ++c) {
      inv_lambda[c] = 1.0 / field->lambda()[c];
    }
    rs.functionals.push_back({"lambda_inv", inv_lambda});
    rs.functionals.push_back({"Lambda", {field->Lambda().begin(), field->Lambda().end()}});
    if (mc.theta != "none") {
      if (mc.theta == "constant") {
        rs.theta.assign(field->num_cells(), mc.theta_value);
      } else if (mc.theta == "Lambda") {
        rs.theta.assign(field->Lambda().begin(), field->Lambda().end());
      } else {
        rs.theta.assign(field->lambda().begin(), field->lambda().end());
      }
      rs.clock_times = wc.sample_times();
    }
    rs.trace_paths = mc.trace_paths;
    const WalkResult walk = simulate_walk(*form, wc, rs);

    if (mc.trace_paths > 0) {
      const auto dir = config.output_dir / "walks";
      std::filesystem::create_directories(dir);
      for (const auto& p : walk.paths) {
        if (p.trace) {
          std::ostringstream name;
          name << "path_" << std::setw(6) << std::setfill('0') << p.path_id << ".wlk";
          std::ofstream out(dir / name.str(), std::ios::binary);
          write_walk(out, *p.trace);
        }
      }
    }
    {
      std::ostringstream os;
      os << std::setprecision(17) << "path";
      for (int a = 0; a < spec.dimension; ++a) {
        os << ",x" << a + 1;
      }
      os << '\n';
      const std::size_t last = walk.sample_times.size() - 1;
      for (std::size_t p = 0; p < walk.paths.size(); ++p) {
        os << p;
        for (double v : walk.displacement(p, last)) {
          os << ',' << v;
        }
        os << '\n';
      }
      write_text(config.output_dir / "endpoints.csv", os.str());
    }

    json sim;
    sim["paths"] = mc.paths;
    sim["t_max"] = mc.t_max;
    std::uint64_t jumps = 0;
    for (const auto& p : walk.paths) {
      jumps += p.jumps;
    }
    sim["total_jumps"] = jumps;
    const MartingaleReport mr = martingale_decomposition(walk, *correctors);
    sim["martingale"] = {{"time", mr.time},
                         {"decomposition_error", mr.decomposition_error},
                         {"qv_over_t", encode(mr.qv_over_t)},
                         {"martingale_cov", encode(mr.martingale_cov)},
                         {"qv_monotone", mr.qv_monotone},
                         {"increment_correlation", mr.increment_correlation}};
    if (mc.paths >= kMinCltPaths) {
      std::vector<std::vector<double>> dirs;
      for (int a = 0; a < spec.dimension; ++a) {
        std::vector<double> e(static_cast<std::size_t>(spec.dimension), 0.0);
        e[static_cast<std::size_t>(a)] = 1.0;
        dirs.push_back(e);
      }
      if (spec.dimension >= 2) {
        std::vector<double> diag(static_cast<std::size_t>(spec.dimension), 0.0);
        diag[0] = diag[1] = 1.0 / std::sqrt(2.0);
        dirs.push_back(diag);
      }
      const CltReport clt = clt_statistics(walk, D->D, walk.sample_times, dirs, mc.ks_threshold);
      json rows = json::array();
      bool ks_ok = true;
      for (const auto& r : clt.rows) {
        json ks = json::array();
        for (const auto& k : r.ks) {
          ks.push_back({{"xi", k.xi}, {"statistic", k.statistic}, {"p_value", k.p_value}, {"passed", k.pass}});
        }
        rows.push_back({{"time", r.time},
                        {"covariance_over_t", encode(r.covariance_over_t)},
                        {"relative_error", r.relative_error},
                        {"ks", ks}});
      }
      for (const auto& k : clt.rows.back().ks) {
        ks_ok = ks_ok && k.pass;
      }
      const double rel = clt.rows.back().relative_error;
      sim["clt"] = {{"target", encode(clt.target)},
                    {"ks_threshold", clt.ks_threshold},
                    {"note", clt.note},
                    {"rows", rows},
                    {"file", "clt.csv"}};
      write_text(config.output_dir / "clt.csv", clt.to_csv());
      std::ostringstream os;
      os << "covariance relative error " << rel << " (tolerance " << mc.cov_tolerance << ")";
      checks.add("clt_covariance", rel <= mc.cov_tolerance, os.str());
      checks.add("clt_ks", ks_ok, clt.note);
    }
    if (!rs.theta.empty()) {
      const TimeChangeReport tc = time_change_statistics(walk, rs.theta);
      Eigen::MatrixXd target = D->D / tc.theta_mean;
      sim["time_change"] = {{"theta", mc.theta},
                            {"time", tc.time},
                            {"covariance_over_t", encode(tc.covariance_over_t)},
                            {"target", encode(target)},
                            {"theta_mean", tc.theta_mean},
                            {"conservativeness", tc.conservativeness},
                            {"conservativeness_target", tc.conservativeness_target}};
    }
    const double tmix = mixing_time(D->D, field->box_side());
    json erg = json::object();
    for (const std::string name : {"lambda_inv", "Lambda"}) {
      const EnvironmentAverage ea = environment_average(walk, name, tmix);
      const auto& values = rs.functionals[walk.functional_index(name)].values;
      double spatial = 0.0;
      for (double v : values) {
        spatial += v;
      }
      spatial /= static_cast<double>(values.size());
      erg[name] = {{"time_average", ea.mean},
                   {"standard_error", ea.standard_error},
                   {"spatial_average", spatial},
                   {"horizon_ok", ea.horizon_ok}};
    }
    erg["mixing_time"] = tmix;
    sim["ergodic"] = erg;
    sim["endpoints_file"] = "endpoints.csv";
    report["simulate"] = sim;
    timings["simulate"] = t.seconds();
  }

  if (options.check) {
    report["check"] = {{"passed", checks.passed}, {"items", checks.items}};
  }
  report["timings"] = timings;
  write_text(config.output_dir / "report.json", report.dump(2) + "\n");
  return report;
}

bool report_check_passed(const nlohmann::json& report) {
  return !report.contains("check") || report.at("check").value("passed", false);
}

nlohmann::json load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open report " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("report " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("schema_version") || j.at("schema_version") != kReportSchemaVersion) {
    throw FormatError("report schema version mismatch (expected " + std::to_string(kReportSchemaVersion) + ")");
  }
  return j;
}

namespace {

std::string fixed(const json& v, int digits = 6) {
  if (v.is_string()) {
    return v.get<std::string>();
  }
  if (!v.is_number()) {
    return "n/a";
  }
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v.get<double>();
  return os.str();
}

std::string subscript(int i) {
  static const char* digits[] = {"₀", "₁", "₂", "₃", "₄", "₅", "₆", "₇", "₈", "₉"};
  return digits[i % 10];
}

std::string render_md(const json& r) {
  std::ostringstream os;
  os << "# ehom run report\n\n";
  if (r.contains("field")) {
    const auto& f = r.at("field");
    os << "Model `" << f.at("model").get<std::string>() << "`, d = " << f.at("dimension") << ", N = "
       << f.at("cells_per_side") << ", h = " << fixed(f.at("spacing"), 8) << ", seed " << f.at("seed") << ".\n\n";
  }
  if (r.contains("moments")) {
    const auto& m = r.at("moments");
    os << "## Moments\n\n| p | q | mean lambda^-q | mean Lambda^p | 1/p + 1/q | 2/d | admissible |\n"
       << "|---|---|---|---|---|---|---|\n| " << fixed(m.at("p"), 3) << " | " << fixed(m.at("q"), 3) << " | "
       << fixed(m.at("emp_lambda_inv_q")) << " | " << fixed(m.at("emp_Lambda_p")) << " | "
       << fixed(m.at("condition_value")) << " | " << fixed(m.at("threshold")) << " | "
       << (m.at("verdict_admissible").get<bool>() ? "yes" : "no") << " |\n\n";
  }
  if (r.contains("effective")) {
    const auto& D = r.at("effective").at("D");
    os << "## Effective matrix\n\n| entry | error bar |\n|---|---|\n";
    for (std::size_t i = 0; i < D.size(); ++i) {
      for (std::size_t j = 0; j < D.size(); ++j) {
        os << "| D" << subscript(static_cast<int>(i) + 1) << subscript(static_cast<int>(j) + 1) << " = "
           << fixed(D[i][j]) << " | "
           << fixed(r.at("effective").at("error_bar")[i][j], 12) << " |\n";
      }
    }
    os << "\n";
  }
  if (r.contains("bounds")) {
    os << "## Variational bounds\n\n| xi | lower | xi^T D xi | upper | ok |\n|---|---|---|---|---|\n";
    for (const auto& row : r.at("bounds").at("rows")) {
      os << "| (";
      for (std::size_t k = 0; k < row.at("xi").size(); ++k) {
        os << (k ? ", " : "") << fixed(row.at("xi")[k], 3);
      }
      os << ") | " << fixed(row.at("lower")) << " | " << fixed(row.at("value")) << " | " << fixed(row.at("upper"))
         << " | " << (row.at("lower_ok").get<bool>() && row.at("upper_ok").get<bool>() ? "yes" : "no") << " |\n";
    }
    os << "\n";
  }
  if (r.contains("sublinearity")) {
    const auto& s = r.at("sublinearity");
    os << "## Corrector sublinearity\n\nslope " << fixed(s.at("slope"), 3) << ", decreasing pairs "
       << s.at("decreasing_pairs") << ".\n\n| epsilon | mean sup norm |\n|---|---|\n";
    for (std::size_t i = 0; i < s.at("epsilons").size(); ++i) {
      os << "| " << fixed(s.at("epsilons")[i], 6) << " | " << fixed(s.at("mean_sup_norms")[i], 8) << " |\n";
    }
    os << "\n";
  }
  if (r.contains("audit")) {
    const auto& a = r.at("audit");
    os << "## Maximal inequality audit\n\nenvelope (max ratio) " << fixed(a.at("max_ratio"), 6) << ", min ratio "
       << fixed(a.at("min_ratio"), 6) << ", spread " << fixed(a.at("spread"), 3)
       << ".\n\n| epsilon | lhs | rhs core | ratio |\n|---|---|---|---|\n";
    for (const auto& row : a.at("rows")) {
      os << "| " << fixed(row.at("epsilon")) << " | " << fixed(row.at("lhs"), 8) << " | "
         << fixed(row.at("rhs_core"), 8) << " | " << fixed(row.at("ratio")) << " |\n";
    }
    os << "\n";
  }
  if (r.contains("simulate")) {
    const auto& s = r.at("simulate");
    os << "## Walk\n\n" << s.at("paths") << " paths to t = " << fixed(s.at("t_max"), 3) << ".\n\n";
    if (s.contains("clt")) {
      const auto& last = s.at("clt").at("rows").back();
      os << "Covariance / t relative error " << fixed(last.at("relative_error")) << ".\n\n| xi | KS | p |\n|---|---|---|\n";
      for (const auto& k : last.at("ks")) {
        os << "| (";
        for (std::size_t i = 0; i < k.at("xi").size(); ++i) {
          os << (i ? ", " : "") << fixed(k.at("xi")[i], 3);
        }
        os << ") | " << fixed(k.at("statistic")) << " | " << fixed(k.at("p_value"), 4) << " |\n";
      }
      os << "\n";
    }
  }
  if (r.contains("check")) {
    os << "## Checks\n\n";
    for (const auto& c : r.at("check").at("items")) {
      os << "- " << c.at("name").get<std::string>() << ": " << (c.at("passed").get<bool>() ? "pass" : "FAIL")
         << " (" << c.at("detail").get<std::string>() << ")\n";
    }
    os << "\n";
  }
  return os.str();
}

} // namespace

std::string render_report(const nlohmann::json& report, const std::string& format,
                          const std::filesystem::path& out_dir) {
  if (format == "json") {
    return report.dump(2) + "\n";
  }
  if (format == "md") {
    return render_md(report);
  }
  if (format != "csv") {
    throw ConfigError("unknown report format '" + format + "' (json, csv, md)");
  }
  std::filesystem::create_directories(out_dir);
  std::ostringstream listing;
  if (report.contains("sublinearity")) {
    std::ostringstream os;
    os << std::setprecision(17) << "epsilon,sup_norm,seed\n";
    for (const auto& r : report.at("sublinearity").at("rows")) {
      os << r.at("epsilon").get<double>() << ',' << r.at("sup_norm").get<double>() << ','
         << r.at("seed").get<std::uint64_t>() << '\n';
    }
    write_text(out_dir / "sublinearity.csv", os.str());
    listing << (out_dir / "sublinearity.csv").string() << '\n';
  }
  if (report.contains("audit")) {
    std::ostringstream os;
    os << std::setprecision(17) << "epsilon,lhs,rhs_core,ratio\n";
    for (const auto& r : report.at("audit").at("rows")) {
      os << r.at("epsilon").get<double>() << ',' << r.at("lhs").get<double>() << ','
         << r.at("rhs_core").get<double>() << ',' << r.at("ratio").get<double>() << '\n';
    }
    write_text(out_dir / "audit.csv", os.str());
    listing << (out_dir / "audit.csv").string() << '\n';
  }
  if (report.contains("simulate") && report.at("simulate").contains("clt")) {
    const auto& clt = report.at("simulate").at("clt");
    std::ostringstream os;
    os << std::setprecision(17) << "time,entry,covariance_over_t,target\n";
    for (const auto& r : clt.at("rows")) {
      const auto& c = r.at("covariance_over_t");
      for (std::size_t i = 0; i < c.size(); ++i) {
        for (std::size_t j = 0; j < c.size(); ++j) {
          os << r.at("time").get<double>() << ",d" << i + 1 << j + 1 << ',' << c[i][j].get<double>() << ','
             << clt.at("target")[i][j].get<double>() << '\n';
        }
      }
    }
    write_text(out_dir / "clt.csv", os.str());
    listing << (out_dir / "clt.csv").string() << '\n';
  }
  return listing.str();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NonConvergenceError*>(&e) != nullptr) {
    return kNonConvergence;
  }
  if (dynamic_cast<const ConfigError*>(&e) != nullptr || dynamic_cast<const SingularityError*>(&e) != nullptr ||
      dynamic_cast<const FormatError*>(&e) != nullptr || dynamic_cast<const RangeError*>(&e) != nullptr) {
    return kValidationFailure;
  }
  return kFailure;
}

} // namespace ehom::app
