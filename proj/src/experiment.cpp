#include "mcfusion/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mcfusion/asymptotics.hpp"
#include "mcfusion/montecarlo.hpp"

namespace mcfusion {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& message) { throw ConfigError(message); }

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail(where + ": expected an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) fail(where + ": unknown key '" + item.key() + "'");
  }
}

double get_number(const Json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  if (!v.is_number()) fail(where + "." + key + ": expected a number");
  return v.get<double>();
}

double number_or(const Json& j, const std::string& key, double fallback, const std::string& where) {
  return j.contains(key) ? get_number(j, key, where) : fallback;
}

std::int64_t get_integer(const Json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) fail(where + "." + key + ": expected an integer");
  return v.get<std::int64_t>();
}

std::int64_t integer_or(const Json& j, const std::string& key, std::int64_t fallback, const std::string& where) {
  return j.contains(key) ? get_integer(j, key, where) : fallback;
}

bool bool_or(const Json& j, const std::string& key, bool fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) fail(where + "." + key + ": expected true or false");
  return j.at(key).get<bool>();
}

std::vector<double> number_list(const Json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_array() || v.empty()) fail(where + "." + key + ": expected a nonempty array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    Json wrapper = {{"v", v[i]}};
    out.push_back(get_number(wrapper, "v", where + "." + key));
  }
  return out;
}

Json number_json(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return v;
}

std::optional<ExperimentKind> parse_kind(const std::string& name) {
  for (auto k : {ExperimentKind::Roc, ExperimentKind::Sweep, ExperimentKind::Exponent, ExperimentKind::BoundVsM,
                 ExperimentKind::Validate}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

std::string block_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Roc: return "roc";
    case ExperimentKind::Sweep: return "sweep";
    case ExperimentKind::Exponent: return "exponent";
    case ExperimentKind::BoundVsM: return "boundVsM";
    case ExperimentKind::Validate: return "validate";
  }
  return "";
}

SensingRecipe parse_sensing(const Json& j) {
  const std::string where = "sensing";
  if (!j.is_object() || !j.contains("model") || !j.at("model").is_string()) fail("sensing.model is required");
  const auto model = j.at("model").get<std::string>();
  SensingRecipe r;
  if (model == "soft" || model == "hard-from-soft") {
    check_keys(j, {"model", "L", "b0", "b1"}, where);
    r.kind = model == "soft" ? SensingRecipe::Kind::Soft : SensingRecipe::Kind::HardFromSoft;
    r.levels = static_cast<int>(integer_or(j, "L", 4, where));
    r.b0 = number_or(j, "b0", -2.5, where);
    r.b1 = number_or(j, "b1", 3.5, where);
  } else if (model == "explicit") {
    check_keys(j, {"model", "g0", "g1"}, where);
    r.kind = SensingRecipe::Kind::Explicit;
    r.g0 = number_list(j, "g0", where);
    r.g1 = number_list(j, "g1", where);
  } else if (model == "hard") {
    check_keys(j, {"model", "p0", "p1"}, where);
    r.kind = SensingRecipe::Kind::Hard;
    r.p0 = get_number(j, "p0", where);
    r.p1 = get_number(j, "p1", where);
  } else {
    fail("sensing.model must be soft, explicit, hard or hard-from-soft");
  }
  return r;
}

Json sensing_json(const SensingRecipe& r) {
  Json j;
  j["model"] = std::string(to_string(r.kind));
  switch (r.kind) {
    case SensingRecipe::Kind::Soft:
    case SensingRecipe::Kind::HardFromSoft:
      j["L"] = r.levels;
      j["b0"] = r.b0;
      j["b1"] = r.b1;
      break;
    case SensingRecipe::Kind::Explicit:
      j["g0"] = r.g0;
      j["g1"] = r.g1;
      break;
    case SensingRecipe::Kind::Hard:
      j["p0"] = r.p0;
      j["p1"] = r.p1;
      break;
  }
  return j;
}

ChannelRecipe parse_channel(const Json& j) {
  const std::string where = "channel";
  check_keys(j, {"A", "J", "N", "M", "mode", "h", "Amax", "geometry"}, where);
  ChannelRecipe r;
  if (j.contains("A")) r.gain = get_number(j, "A", where);
  r.noise = number_or(j, "J", 4.0, where);
  r.slots = static_cast<int>(integer_or(j, "N", 1, where));
  r.sensors = static_cast<int>(integer_or(j, "M", 2, where));
  if (j.contains("mode")) {
    const auto& m = j.at("mode");
    if (m == "steady") {
      r.mode = ChannelMode::SteadyState;
    } else if (m == "transient") {
      r.mode = ChannelMode::Transient;
    } else {
      fail("channel.mode must be steady or transient");
    }
  }
  if (j.contains("h")) r.cir = number_list(j, "h", where);
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    const std::string gw = "channel.geometry";
    check_keys(g, {"r1", "r2", "D", "T", "kMax"}, gw);
    DiffusionGeometry geom;
    geom.r1 = get_number(g, "r1", gw);
    geom.r2 = get_number(g, "r2", gw);
    geom.diffusion = get_number(g, "D", gw);
    geom.slot = number_or(g, "T", 100e-6, gw);
    geom.cir_length = g.contains("kMax") ? static_cast<int>(get_integer(g, "kMax", gw)) : -1;
    if (geom.cir_length < 0) {
      geom.cir_length = 0;
      geom.validate();
      geom.cir_length = default_cir_length(geom);
    }
    r.geometry = geom;
  }
  if (r.cir || r.geometry) {
    if (!j.contains("Amax")) fail("channel.Amax is required with h or geometry");
    r.max_release = get_number(j, "Amax", where);
  } else if (j.contains("Amax")) {
    fail("channel.Amax only applies with h or geometry");
  }
  return r;
}

Json channel_json(const ChannelRecipe& r) {
  Json j;
  if (r.gain) j["A"] = *r.gain;
  j["J"] = r.noise;
  j["N"] = r.slots;
  j["M"] = r.sensors;
  j["mode"] = std::string(to_string(r.mode));
  if (r.cir) j["h"] = *r.cir;
  if (r.geometry) {
    j["geometry"] = {{"r1", r.geometry->r1},
                     {"r2", r.geometry->r2},
                     {"D", r.geometry->diffusion},
                     {"T", r.geometry->slot},
                     {"kMax", r.geometry->cir_length}};
  }
  if (r.cir || r.geometry) j["Amax"] = r.max_release;
  return j;
}

double parse_target(const Json& j, const std::string& where) {
  const double t = get_number(j, "targetPfa", where);
  if (!(t > 0.0 && t <= 1.0)) fail(where + ".targetPfa must lie in (0, 1]");
  return t;
}

// ---------------------------------------------------------------------------
// Rows

struct RowContext {
  const ExperimentConfig& config;
  const SensingModel& model;
  const ChannelParams& params;
};

ResultRow base_row(const RowContext& ctx) {
  ResultRow r;
  r.experiment_id = ctx.config.id;
  r.experiment = std::string(to_string(ctx.config.kind));
  r.sensing = std::string(to_string(ctx.config.scenario.sensing.kind));
  r.levels = ctx.model.levels();
  r.gain = ctx.params.gain();
  r.noise = ctx.params.noise();
  r.slots = ctx.params.slots();
  r.sensors = ctx.params.sensors();
  // Analytic and bound rows describe the saturated channel; simulated rows
  // override this with the configured mode.
  r.mode = std::string(to_string(ChannelMode::SteadyState));
  return r;
}

void set_spec(ResultRow& r, const DetectorSpec& spec) {
  r.detector = std::string(to_string(spec.kind));
  r.scheme = std::string(to_string(scheme_of(spec.kind)));
  if (spec.kind == DetectorKind::TwoStage) {
    r.local_threshold = spec.local_threshold;
    r.global_threshold = spec.global_threshold;
  } else {
    r.threshold = spec.threshold;
  }
}

ResultRow analytic_row(const RowContext& ctx, const PerfPoint& p, const std::string& record) {
  auto r = base_row(ctx);
  r.record = record;
  set_spec(r, p.spec);
  r.method = std::string(to_string(p.method));
  r.pfa = p.pfa;
  r.pd = p.pd;
  r.pm = p.pm();
  r.ci_half_width = p.uncertainty;
  return r;
}

ResultRow simulated_row(const RowContext& ctx, const SimResult& s, const std::string& record) {
  auto r = base_row(ctx);
  r.record = record;
  set_spec(r, s.spec);
  r.method = std::string(to_string(Method::MonteCarlo));
  r.mode = std::string(to_string(ctx.config.scenario.channel.mode));
  r.pfa = s.pfa_hat;
  r.pd = 1.0 - s.pm_hat;
  r.pm = s.pm_hat;
  r.ci_half_width = s.ci_half_width();
  r.false_alarms = s.false_alarms;
  r.misses = s.misses;
  r.trials = s.trials;
  r.seed = s.seed;
  return r;
}

SimConfig sim_config(const ExperimentConfig& config, int threads) {
  SimConfig c;
  c.trials = config.trials;
  c.seed = config.seed.value_or(0);
  c.mode = config.scenario.channel.mode;
  c.threads = threads;
  return c;
}

std::vector<DetectorSpec> explicit_specs(DetectorKind kind, const ThresholdList& list) {
  std::vector<DetectorSpec> out;
  if (kind == DetectorKind::TwoStage) {
    for (const auto& [local, global] : std::get<1>(list)) {
      DetectorSpec s;
      s.kind = kind;
      s.local_threshold = local;
      s.global_threshold = global;
      out.push_back(s);
    }
  } else {
    for (double t : std::get<0>(list)) {
      DetectorSpec s;
      s.kind = kind;
      s.threshold = t;
      out.push_back(s);
    }
  }
  return out;
}

void run_roc(const ExperimentConfig& config, int threads, ExperimentOutcome& out) {
  const auto model = config.scenario.model();
  const auto params = config.scenario.params();
  const RowContext ctx{config, model, params};
  for (auto kind : config.detectors) {
    const DetectorAnalysis analysis(kind, model, params, config.analysis);
    const auto it = config.thresholds.find(kind);
    const auto specs = it != config.thresholds.end() ? explicit_specs(kind, it->second) : analysis.default_thresholds();
    const auto points = analysis.roc(specs);
    std::vector<DetectorSpec> ordered;
    for (const auto& p : points) {
      out.rows.push_back(analytic_row(ctx, p, "operating-point"));
      ordered.push_back(p.spec);
    }
    if (config.simulate) {
      for (const auto& s : estimate_perf(ordered, model, params, sim_config(config, threads))) {
        out.rows.push_back(simulated_row(ctx, s, "operating-point"));
      }
    }
    if (config.target_pfa) {
      const auto c = analysis.calibrate(*config.target_pfa);
      auto row = analytic_row(ctx, c.perf, "calibration");
      row.target_pfa = *config.target_pfa;
      row.feasible = c.feasible;
      out.rows.push_back(row);
      if (!c.feasible) {
        out.exit_code = std::max(out.exit_code, 3);
        out.messages.push_back(std::string(to_string(kind)) + ": no threshold meets the target Pfa");
      }
    }
  }
}

void run_sweep(const ExperimentConfig& config, int threads, ExperimentOutcome& out) {
  const double target = config.target_pfa.value_or(0.05);
  for (double v : config.axis_values) {
    const Scenario point = with_axis(config.scenario, config.axis, v);
    const auto model = point.model();
    const auto params = point.params();
    const RowContext ctx{config, model, params};
    std::vector<Calibration> calibrations;
    std::vector<DetectorSpec> specs;
    for (auto kind : config.detectors) {
      calibrations.push_back(calibrate_threshold(kind, model, params, target, config.analysis));
      specs.push_back(calibrations.back().spec);
    }
    std::vector<SimResult> simulated;
    if (config.simulate) {
      auto sim = sim_config(config, threads);
      if (config.axis == Axis::Trials) sim.trials = static_cast<std::int64_t>(v);
      simulated = estimate_perf(specs, model, params, sim);
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
      auto row = analytic_row(ctx, calibrations[i].perf, "calibration");
      row.axis = std::string(to_string(config.axis));
      row.axis_value = v;
      row.target_pfa = target;
      row.feasible = calibrations[i].feasible;
      out.rows.push_back(row);
      if (config.simulate) {
        auto sim_row = simulated_row(ctx, simulated[i], "operating-point");
        sim_row.axis = row.axis;
        sim_row.axis_value = v;
        sim_row.target_pfa = target;
        sim_row.feasible = calibrations[i].feasible;
        out.rows.push_back(sim_row);
      }
      if (!calibrations[i].feasible) {
        out.exit_code = std::max(out.exit_code, 3);
        out.messages.push_back(std::string(to_string(specs[i].kind)) + " at " + row.axis + "=" + format_number(v) +
                               ": no threshold meets the target Pfa");
      }
    }
  }
}

double resolve_theta(const std::string& theta, const ChernoffProblem& problem) {
  if (theta == "equalize") return problem.equalizing_theta();
  if (theta == "zero") return 0.0;
  return std::stod(theta);
}

void run_exponent(const ExperimentConfig& config, ExperimentOutcome& out) {
  const auto model = config.scenario.model();
  for (auto kind : config.detectors) {
    for (double A : config.gains) {
      const auto params = config.scenario.params().with_gain(A);
      const RowContext ctx{config, model, params};
      const auto problem = ChernoffProblem::for_detector(kind, model, params, config.s_max);
      const double theta = resolve_theta(config.theta, problem);
      std::vector<double> grid;
      for (int k = 1; k <= config.s_points; ++k) grid.push_back(config.s_max * k / config.s_points);
      const auto curve = exponent_curve(problem, grid, theta);
      auto row_for = [&](const std::string& record) {
        auto r = base_row(ctx);
        r.record = record;
        r.detector = std::string(to_string(kind));
        r.scheme = std::string(to_string(scheme_of(kind)));
        r.method = std::string(to_string(Method::ChernoffBound));
        r.axis = "A";
        r.axis_value = A;
        r.theta = theta;
        return r;
      };
      for (std::size_t k = 0; k < grid.size(); ++k) {
        auto r = row_for("exponent");
        r.s = grid[k];
        r.ex0 = curve.ex0[k];
        r.ex1 = curve.ex1[k];
        out.rows.push_back(r);
      }
      auto r0 = row_for("s-star-0");
      r0.s = curve.star0.s;
      r0.ex0 = curve.star0.exponent;
      r0.status = curve.star0.on_boundary ? "boundary" : "interior";
      out.rows.push_back(r0);
      auto r1 = row_for("s-star-1");
      r1.s = curve.star1.s;
      r1.ex1 = curve.star1.exponent;
      r1.status = curve.star1.on_boundary ? "boundary" : "interior";
      out.rows.push_back(r1);
    }
  }
}

void run_bound_vs_m(const ExperimentConfig& config, int threads, ExperimentOutcome& out) {
  const auto model = config.scenario.model();
  for (auto kind : config.detectors) {
    for (double A : config.gains) {
      const auto base = config.scenario.params().with_gain(A);
      const auto problem = ChernoffProblem::for_detector(kind, model, base, config.s_max);
      for (int M : config.sensor_counts) {
        const auto params = base.with_sensors(M);
        const RowContext ctx{config, model, params};
        const DetectorAnalysis analysis(kind, model, params, config.analysis);
        // Threshold that brings Pfa and Pm closest together.
        std::optional<PerfPoint> best;
        for (const auto& spec : analysis.default_thresholds()) {
          const auto p = analysis.evaluate(spec);
          if (!best || std::abs(p.pfa - p.pm()) < std::abs(best->pfa - best->pm())) best = p;
        }
        double gamma = best->spec.threshold;
        if (kind == DetectorKind::MRC && std::isfinite(gamma)) {
          gamma = -M * params.slots() * params.gain() + gamma * std::log1p(params.gain() / params.noise());
        }
        const auto bound = optimized_bounds(problem, gamma, M);
        auto analytic = analytic_row(ctx, *best, "operating-point");
        analytic.axis = "M";
        analytic.axis_value = M;
        out.rows.push_back(analytic);
        auto b = base_row(ctx);
        b.record = "bound";
        set_spec(b, best->spec);
        b.method = std::string(to_string(Method::ChernoffBound));
        b.axis = "M";
        b.axis_value = M;
        b.pfa = bound.bounds.pfa_upper;
        b.pm = bound.bounds.pm_upper;
        b.pd = 1.0 - bound.bounds.pm_upper;
        b.s = bound.star0.s;
        b.theta = gamma / M;
        b.ex0 = bound.star0.exponent;
        b.ex1 = bound.star1.exponent;
        const bool dominates = bound.bounds.pfa_upper >= best->pfa && bound.bounds.pm_upper >= best->pm();
        b.status = dominates ? "valid" : "violated";
        if (config.simulate) {
          const auto sim = estimate_perf(best->spec, model, params, sim_config(config, threads));
          auto sr = simulated_row(ctx, sim, "operating-point");
          sr.axis = "M";
          sr.axis_value = M;
          out.rows.push_back(sr);
          const double pe_hat = std::max(sim.pfa_hat, sim.pm_hat);
          const double pe_bound = std::max(bound.bounds.pfa_upper, bound.bounds.pm_upper);
          if (pe_hat > pe_bound + sim.ci_half_width()) b.status = "violated";
        }
        out.rows.push_back(b);
      }
    }
  }
}

void run_validate(const ExperimentConfig& config, int threads, ExperimentOutcome& out) {
  const auto model = config.scenario.model();
  const auto params = config.scenario.params();
  const RowContext ctx{config, model, params};
  const double lo = config.validate_min_probability;
  int compared = 0;
  int agreed = 0;
  for (auto kind : config.detectors) {
    const DetectorAnalysis analysis(kind, model, params, config.analysis);
    const auto chosen = validation_points(analysis, static_cast<std::size_t>(config.validate_points), lo);
    const auto want = static_cast<std::size_t>(config.validate_points);
    if (chosen.size() < want) {
      out.messages.push_back(std::string(to_string(kind)) + ": only " + std::to_string(chosen.size()) +
                             " operating points inside the comparison range");
    }
    std::vector<DetectorSpec> specs;
    for (const auto& p : chosen) specs.push_back(p.spec);
    const auto simulated = estimate_perf(specs, model, params, sim_config(config, threads));
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      const auto& a = chosen[i];
      const auto& s = simulated[i];
      const double tol_fa = binomial_half_width(a.pfa, s.trials) + a.uncertainty;
      const double tol_m = binomial_half_width(a.pm(), s.trials) + a.uncertainty;
      const bool ok = std::abs(s.pfa_hat - a.pfa) <= tol_fa && std::abs(s.pm_hat - a.pm()) <= tol_m;
      ++compared;
      agreed += ok ? 1 : 0;
      out.rows.push_back(analytic_row(ctx, a, "operating-point"));
      auto row = simulated_row(ctx, s, "operating-point");
      row.status = ok ? "agree" : "disagree";
      out.rows.push_back(row);
    }
  }
  auto summary = base_row(ctx);
  summary.record = "summary";
  const bool pass = compared > 0 && agreed == compared;
  summary.status = pass ? "PASS" : "FAIL";
  out.rows.push_back(summary);
  out.messages.push_back("validate: " + std::to_string(agreed) + "/" + std::to_string(compared) +
                         " operating points agree within the 3-sigma half-width: " + summary.status);
  if (!pass) out.exit_code = std::max(out.exit_code, 4);
}

std::string optional_cell(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }
std::string probability_cell(const std::optional<double>& v) { return v ? format_probability(*v) : "NA"; }
template <typename T>
std::string integer_cell(const std::optional<T>& v) {
  return v ? std::to_string(*v) : "NA";
}
std::string text_cell(const std::string& s) { return s.empty() ? "NA" : s; }

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  }) && id.front() != '.';
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Roc: return "roc";
    case ExperimentKind::Sweep: return "sweep";
    case ExperimentKind::Exponent: return "exponent";
    case ExperimentKind::BoundVsM: return "bound-vs-M";
    case ExperimentKind::Validate: return "validate";
  }
  return "?";
}

bool ExperimentConfig::needs_seed() const {
  switch (kind) {
    case ExperimentKind::Roc: return simulate;
    case ExperimentKind::Sweep: return simulate;
    case ExperimentKind::Exponent: return false;
    case ExperimentKind::BoundVsM: return simulate;
    case ExperimentKind::Validate: return true;
  }
  return true;
}

ExperimentConfig ExperimentConfig::parse(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("resolvedConfig")) {
    check_keys(j, {"tool", "version", "resolvedConfig", "outputs", "timings", "threads", "exitStatus", "messages"},
               "manifest");
    Json inner = j.at("resolvedConfig");
    j = std::move(inner);
  }
  check_keys(j,
             {"experiment", "id", "seed", "trials", "sensing", "channel", "detectors", "analysis", "roc", "sweep",
              "exponent", "boundVsM", "validate"},
             "config");
  ExperimentConfig c;
  if (!j.contains("experiment") || !j.at("experiment").is_string()) fail("config.experiment is required");
  const auto kind = parse_kind(j.at("experiment").get<std::string>());
  if (!kind) fail("config.experiment must be roc, sweep, exponent, bound-vs-M or validate");
  c.kind = *kind;
  for (auto other : {ExperimentKind::Roc, ExperimentKind::Sweep, ExperimentKind::Exponent, ExperimentKind::BoundVsM,
                     ExperimentKind::Validate}) {
    if (other != c.kind && j.contains(block_name(other))) {
      fail("config." + block_name(other) + " does not apply to a " + std::string(to_string(c.kind)) + " experiment");
    }
  }
  if (j.contains("id")) {
    if (!j.at("id").is_string()) fail("config.id must be a string");
    c.id = j.at("id").get<std::string>();
  }
  if (!valid_id(c.id)) fail("config.id may only contain letters, digits, '-', '_' and '.'");
  if (j.contains("seed")) {
    const auto& s = j.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      fail("config.seed must be a nonnegative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  c.trials = integer_or(j, "trials", c.trials, "config");
  if (c.trials < 1) fail("config.trials must be >= 1");

  c.scenario.sensing = j.contains("sensing") ? parse_sensing(j.at("sensing")) : SensingRecipe{};
  if (!j.contains("channel")) fail("config.channel is required");
  c.scenario.channel = parse_channel(j.at("channel"));

  const bool per_sensor_only = c.kind == ExperimentKind::Exponent || c.kind == ExperimentKind::BoundVsM;
  if (j.contains("detectors")) {
    const auto& d = j.at("detectors");
    if (!d.is_array()) fail("config.detectors must be an array of detector names");
    for (const auto& name : d) {
      if (!name.is_string()) fail("config.detectors must be an array of detector names");
      const auto k = parse_detector_kind(name.get<std::string>());
      if (!k) fail("unknown detector '" + name.get<std::string>() + "'");
      if (std::find(c.detectors.begin(), c.detectors.end(), *k) != c.detectors.end()) {
        fail("detector '" + name.get<std::string>() + "' listed twice");
      }
      c.detectors.push_back(*k);
    }
  } else if (per_sensor_only) {
    c.detectors = {DetectorKind::MRC};
  }
  if (c.detectors.empty()) fail("config.detectors must list at least one detector");
  if (per_sensor_only) {
    for (auto k : c.detectors) {
      if (!is_llr_sum_detector(k) && k != DetectorKind::MRC) {
        fail(std::string(to_string(k)) + " has no per-sensor statistic for Chernoff bounds");
      }
    }
  }

  if (j.contains("analysis")) {
    const auto& a = j.at("analysis");
    const std::string w = "analysis";
    check_keys(a, {"eps", "maxEnumeratedSensors", "maxThresholdAtoms", "uniformThresholdCount"}, w);
    c.analysis.eps = number_or(a, "eps", c.analysis.eps, w);
    c.analysis.max_enumerated_sensors =
        static_cast<int>(integer_or(a, "maxEnumeratedSensors", c.analysis.max_enumerated_sensors, w));
    c.analysis.max_threshold_atoms = static_cast<std::size_t>(
        integer_or(a, "maxThresholdAtoms", static_cast<std::int64_t>(c.analysis.max_threshold_atoms), w));
    c.analysis.uniform_threshold_count = static_cast<std::size_t>(
        integer_or(a, "uniformThresholdCount", static_cast<std::int64_t>(c.analysis.uniform_threshold_count), w));
    if (!(c.analysis.eps > 0.0 && c.analysis.eps < 1.0)) fail("analysis.eps must lie in (0, 1)");
    if (c.analysis.uniform_threshold_count < 2) fail("analysis.uniformThresholdCount must be >= 2");
  }

  const Json empty = Json::object();
  const std::string bw = block_name(c.kind);
  const Json& block = j.contains(bw) ? j.at(bw) : empty;
  switch (c.kind) {
    case ExperimentKind::Roc: {
      check_keys(block, {"thresholds", "simulate", "targetPfa"}, bw);
      c.simulate = bool_or(block, "simulate", false, bw);
      if (block.contains("targetPfa")) c.target_pfa = parse_target(block, bw);
      if (block.contains("thresholds")) {
        const auto& t = block.at("thresholds");
        if (!t.is_object()) fail("roc.thresholds must map detector names to lists");
        for (const auto& item : t.items()) {
          const auto k = parse_detector_kind(item.key());
          if (!k || std::find(c.detectors.begin(), c.detectors.end(), *k) == c.detectors.end()) {
            fail("roc.thresholds: '" + item.key() + "' is not a listed detector");
          }
          const auto& v = item.value();
          if (!v.is_array() || v.empty()) fail("roc.thresholds." + item.key() + ": expected a nonempty array");
          if (*k == DetectorKind::TwoStage) {
            std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
            for (const auto& e : v) {
              if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
                fail("roc.thresholds.TwoStage: expected [local, global] integer pairs");
              }
              pairs.emplace_back(e[0].get<std::int64_t>(), e[1].get<std::int64_t>());
            }
            c.thresholds[*k] = pairs;
          } else {
            c.thresholds[*k] = number_list(t, item.key(), "roc.thresholds");
          }
        }
      }
      break;
    }
    case ExperimentKind::Sweep: {
      check_keys(block, {"axis", "values", "targetPfa", "simulate"}, bw);
      if (!block.contains("axis") || !block.at("axis").is_string()) fail("sweep.axis is required");
      const auto axis = parse_axis(block.at("axis").get<std::string>());
      if (!axis) fail("sweep.axis must be one of A, J, M, N, L, trials");
      c.axis = *axis;
      if (!block.contains("values")) fail("sweep.values is required");
      c.axis_values = number_list(block, "values", bw);
      c.target_pfa = block.contains("targetPfa") ? parse_target(block, bw) : 0.05;
      c.simulate = bool_or(block, "simulate", true, bw);
      for (double v : c.axis_values) {
        try {
          (void)with_axis(c.scenario, c.axis, v).params();
          (void)with_axis(c.scenario, c.axis, v).model();
        } catch (const std::invalid_argument& e) {
          fail("sweep value " + format_number(v) + ": " + e.what());
        }
        if (c.axis == Axis::Trials && (!(v >= 1.0) || v != std::floor(v))) {
          fail("sweep.values: trials must be positive integers");
        }
      }
      break;
    }
    case ExperimentKind::Exponent:
    case ExperimentKind::BoundVsM: {
      if (c.kind == ExperimentKind::Exponent) {
        check_keys(block, {"A", "sMax", "points", "theta"}, bw);
        c.s_points = static_cast<int>(integer_or(block, "points", c.s_points, bw));
        if (c.s_points < 3) fail("exponent.points must be >= 3");
        if (block.contains("theta")) {
          const auto& t = block.at("theta");
          if (t.is_number()) {
            c.theta = t.dump();
          } else if (t == "equalize" || t == "zero") {
            c.theta = t.get<std::string>();
          } else {
            fail("exponent.theta must be \"equalize\", \"zero\" or a number");
          }
        }
      } else {
        check_keys(block, {"A", "M", "sMax", "simulate"}, bw);
        c.simulate = bool_or(block, "simulate", true, bw);
        if (!block.contains("M")) fail("boundVsM.M is required");
        for (double m : number_list(block, "M", bw)) {
          if (!(m >= 1.0) || m != std::floor(m)) fail("boundVsM.M must hold positive integers");
          c.sensor_counts.push_back(static_cast<int>(m));
        }
      }
      if (block.contains("A")) {
        c.gains = number_list(block, "A", bw);
        // The channel block may leave A out when the gains are listed here.
        auto& ch = c.scenario.channel;
        if (!ch.gain && !ch.cir && !ch.geometry) ch.gain = c.gains.front();
      } else if (c.scenario.channel.gain) {
        c.gains = {*c.scenario.channel.gain};
      } else {
        fail(bw + ".A is required when the channel has no gain A");
      }
      c.s_max = number_or(block, "sMax", c.s_max, bw);
      if (!(c.s_max > 0.0 && std::isfinite(c.s_max))) fail(bw + ".sMax must be positive");
      break;
    }
    case ExperimentKind::Validate: {
      check_keys(block, {"points", "minProbability"}, bw);
      c.validate_points = static_cast<int>(integer_or(block, "points", c.validate_points, bw));
      c.validate_min_probability = number_or(block, "minProbability", c.validate_min_probability, bw);
      if (c.validate_points < 2) fail("validate.points must be >= 2");
      if (!(c.validate_min_probability >= 0.0 && c.validate_min_probability < 0.5)) {
        fail("validate.minProbability must lie in [0, 0.5)");
      }
      break;
    }
  }
  if (c.needs_seed() && !c.seed) fail("config.seed is required for experiments that simulate");
  try {
    (void)c.scenario.model();
    (void)c.scenario.params();
  } catch (const std::invalid_argument& e) {
    fail(std::string("invalid model: ") + e.what());
  } catch (const std::domain_error& e) {
    fail(std::string("invalid model: ") + e.what());
  }
  return c;
}

std::string ExperimentConfig::resolved_json() const {
  Json j;
  j["experiment"] = std::string(to_string(kind));
  j["id"] = id;
  if (seed) j["seed"] = *seed;
  j["trials"] = trials;
  j["sensing"] = sensing_json(scenario.sensing);
  j["channel"] = channel_json(scenario.channel);
  Json d = Json::array();
  for (auto k : detectors) d.push_back(std::string(to_string(k)));
  j["detectors"] = d;
  j["analysis"] = {{"eps", analysis.eps},
                   {"maxEnumeratedSensors", analysis.max_enumerated_sensors},
                   {"maxThresholdAtoms", analysis.max_threshold_atoms},
                   {"uniformThresholdCount", analysis.uniform_threshold_count}};
  Json block;
  switch (kind) {
    case ExperimentKind::Roc: {
      block["simulate"] = simulate;
      if (target_pfa) block["targetPfa"] = *target_pfa;
      if (!thresholds.empty()) {
        Json t;
        for (const auto& [k, list] : thresholds) {
          Json values = Json::array();
          if (k == DetectorKind::TwoStage) {
            for (const auto& [l, g] : std::get<1>(list)) values.push_back({l, g});
          } else {
            for (double v : std::get<0>(list)) values.push_back(number_json(v));
          }
          t[std::string(to_string(k))] = values;
        }
        block["thresholds"] = t;
      }
      break;
    }
    case ExperimentKind::Sweep: {
      block["axis"] = std::string(to_string(axis));
      block["values"] = axis_values;
      block["targetPfa"] = target_pfa.value_or(0.05);
      block["simulate"] = simulate;
      break;
    }
    case ExperimentKind::Exponent: {
      block["A"] = gains;
      block["sMax"] = s_max;
      block["points"] = s_points;
      if (theta == "equalize" || theta == "zero") {
        block["theta"] = theta;
      } else {
        block["theta"] = Json::parse(theta);
      }
      break;
    }
    case ExperimentKind::BoundVsM: {
      block["A"] = gains;
      block["M"] = sensor_counts;
      block["sMax"] = s_max;
      block["simulate"] = simulate;
      break;
    }
    case ExperimentKind::Validate: {
      block["points"] = validate_points;
      block["minProbability"] = validate_min_probability;
      break;
    }
  }
  j[block_name(kind)] = block;
  return j.dump(2);
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> columns = {
      "experiment_id", "experiment", "record", "detector", "scheme", "method", "sensing", "L",
      "A", "J", "N", "M", "mode", "axis", "axis_value", "threshold",
      "local_threshold", "global_threshold", "target_pfa", "feasible", "pfa", "pd", "pm", "ci_half_width",
      "false_alarms", "misses", "trials", "seed", "s", "theta", "ex0", "ex1",
      "status"};
  return columns;
}

std::string csv_header() {
  std::string out;
  for (const auto& c : csv_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (value == kInf) return "inf";
  if (value == -kInf) return "-inf";
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.12g", value);
  return buffer;
}

std::string format_probability(double value) {
  if (value > 0.0 && value < 1e-300) return "<1e-300";
  return format_number(value);
}

std::string format_csv_row(const ResultRow& r) {
  const std::vector<std::string> cells = {
      text_cell(r.experiment_id),
      text_cell(r.experiment),
      text_cell(r.record),
      text_cell(r.detector),
      text_cell(r.scheme),
      text_cell(r.method),
      text_cell(r.sensing),
      integer_cell(r.levels),
      optional_cell(r.gain),
      optional_cell(r.noise),
      integer_cell(r.slots),
      integer_cell(r.sensors),
      text_cell(r.mode),
      text_cell(r.axis),
      optional_cell(r.axis_value),
      optional_cell(r.threshold),
      integer_cell(r.local_threshold),
      integer_cell(r.global_threshold),
      probability_cell(r.target_pfa),
      r.feasible ? (*r.feasible ? "true" : "false") : "NA",
      probability_cell(r.pfa),
      probability_cell(r.pd),
      probability_cell(r.pm),
      probability_cell(r.ci_half_width),
      integer_cell(r.false_alarms),
      integer_cell(r.misses),
      integer_cell(r.trials),
      integer_cell(r.seed),
      optional_cell(r.s),
      optional_cell(r.theta),
      optional_cell(r.ex0),
      optional_cell(r.ex1),
      text_cell(r.status)};
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

std::vector<PerfPoint> validation_points(const DetectorAnalysis& analysis, std::size_t count,
                                         double min_probability) {
  auto inside = [&](const PerfPoint& p) {
    return p.pfa >= min_probability && p.pfa <= 1.0 - min_probability && p.pd >= min_probability &&
           p.pd <= 1.0 - min_probability;
  };
  auto thresholds = analysis.default_thresholds();
  auto points = analysis.roc(thresholds);
  std::vector<PerfPoint> inner;
  std::copy_if(points.begin(), points.end(), std::back_inserter(inner), inside);
  if (inner.size() < count && analysis.kind() != DetectorKind::TwoStage) {
    // Coarse statistics: add thresholds between and beyond the grid values.
    std::vector<double> finite;
    for (const auto& s : thresholds) {
      if (std::isfinite(s.threshold)) finite.push_back(s.threshold);
    }
    std::sort(finite.begin(), finite.end());
    if (!finite.empty()) {
      auto extended = thresholds;
      auto add = [&](double t) {
        DetectorSpec s = thresholds.front();
        s.threshold = t;
        extended.push_back(s);
      };
      for (std::size_t i = 1; i < finite.size(); ++i) add(0.5 * (finite[i - 1] + finite[i]));
      add(finite.front() - 1.0);
      add(finite.back() + 1.0);
      points = analysis.roc(extended);
      inner.clear();
      std::copy_if(points.begin(), points.end(), std::back_inserter(inner), inside);
      if (inner.size() < count) inner = points;
    }
  }
  if (inner.size() <= count) return inner;
  std::vector<PerfPoint> chosen;
  for (std::size_t k = 0; k < count; ++k) chosen.push_back(inner[k * (inner.size() - 1) / (count - 1)]);
  return chosen;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, int threads) {
  ExperimentOutcome out;
  switch (config.kind) {
    case ExperimentKind::Roc: run_roc(config, threads, out); break;
    case ExperimentKind::Sweep: run_sweep(config, threads, out); break;
    case ExperimentKind::Exponent: run_exponent(config, out); break;
    case ExperimentKind::BoundVsM: run_bound_vs_m(config, threads, out); break;
    case ExperimentKind::Validate: run_validate(config, threads, out); break;
  }
  return out;
}

int run_config_file(const std::filesystem::path& config_path, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: cannot read config " << config_path << "\n";
    return 2;
  }
  std::stringstream text;
  text << in.rdbuf();
  ExperimentConfig config;
  try {
    config = ExperimentConfig::parse(text.str());
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  ExperimentOutcome outcome;
  try {
    outcome = run_experiment(config, options.threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << config.id << ": " << e.what() << "\n";
    return 1;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  std::error_code ec;
  std::filesystem::create_directories(options.output_dir, ec);
  const auto csv_name = config.id + ".csv";
  const auto manifest_name = config.id + ".manifest.json";
  {
    std::ofstream csv(options.output_dir / csv_name, std::ios::binary);
    csv << csv_header() << '\n';
    for (const auto& row : outcome.rows) csv << format_csv_row(row) << '\n';
    if (!csv) {
      std::cerr << "error: cannot write " << (options.output_dir / csv_name) << "\n";
      return 1;
    }
  }
  Json manifest;
  manifest["tool"] = "mcfusion";
  manifest["version"] = std::string(kToolVersion);
  manifest["resolvedConfig"] = Json::parse(config.resolved_json());
  manifest["outputs"] = {{"csv", csv_name}};
  manifest["timings"] = {{"wallSeconds", seconds}};
  manifest["threads"] = options.threads;
  manifest["exitStatus"] = outcome.exit_code;
  manifest["messages"] = outcome.messages;
  {
    std::ofstream m(options.output_dir / manifest_name);
    m << manifest.dump(2) << '\n';
    if (!m) {
      std::cerr << "error: cannot write " << (options.output_dir / manifest_name) << "\n";
      return 1;
    }
  }
  for (const auto& msg : outcome.messages) {
    if (!options.quiet || outcome.exit_code != 0) std::cerr << msg << "\n";
  }
  if (!options.quiet) {
    std::cout << config.id << ": " << outcome.rows.size() << " rows written to "
              << (options.output_dir / csv_name).string() << "\n";
  }
  return outcome.exit_code;
}

}  // namespace mcfusion
