// Acceptance checks AC1-AC10. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mcfusion/analysis.hpp"
#include "mcfusion/asymptotics.hpp"
#include "mcfusion/experiment.hpp"
#include "mcfusion/montecarlo.hpp"
#include "oracles.hpp"

using namespace mcfusion;

namespace {

constexpr std::uint64_t kSeed = 20240601;
constexpr std::array kAllDetectors{DetectorKind::OptDTM, DetectorKind::MaxLog, DetectorKind::MRC,
                                   DetectorKind::CV,     DetectorKind::TwoStage, DetectorKind::OptSTM};

struct Verdict {
  bool pass = true;
  std::string detail;
};

void note(Verdict& v, const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  if (!v.detail.empty()) v.detail += "; ";
  v.detail += buf;
}

std::string name(DetectorKind k) { return std::string(to_string(k)); }

// Pm at the calibrated threshold and at the next looser one.
struct CalibratedPm {
  double pfa = 0.0;
  double pm = 1.0;
  double looser_pm = 1.0;
};

CalibratedPm calibrated_pm(const DetectorAnalysis& analysis, double target) {
  const auto c = analysis.calibrate(target);
  CalibratedPm out{c.perf.pfa, c.perf.pm(), c.perf.pm()};
  if (const auto n = analysis.looser_neighbor(c.spec)) out.looser_pm = analysis.evaluate(*n).pm();
  return out;
}

// a no worse than b, allowing a one grid step looser threshold for a.
bool no_worse(const CalibratedPm& a, const CalibratedPm& b) {
  return a.pm <= b.pm || a.looser_pm <= b.pm;
}

SensingModel soft2_model() { return make_soft_model(2, -2.5, 3.5); }
ChannelParams soft2_params() { return ChannelParams::from_gain(15, 4, 1, 2); }

Verdict ac1() {
  Verdict v;
  const auto model = soft2_model();
  const auto params = soft2_params();
  SimConfig cfg;
  cfg.trials = 1'000'000;
  cfg.seed = kSeed;
  int agree = 0;
  int total = 0;
  for (auto kind : kAllDetectors) {
    const DetectorAnalysis analysis(kind, model, params);
    const auto points = validation_points(analysis, 8, 1e-3);
    std::vector<DetectorSpec> specs;
    for (const auto& p : points) specs.push_back(p.spec);
    const auto sims = estimate_perf(specs, model, params, cfg);
    int ok = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& a = points[i];
      const auto& s = sims[i];
      // 3-sigma band around the analytic probability, widened by its
      // truncation bound.
      const bool pfa_ok = std::abs(a.pfa - s.pfa_hat) <= binomial_half_width(a.pfa, s.trials) + a.uncertainty;
      const bool pm_ok = std::abs(a.pm() - s.pm_hat) <= binomial_half_width(a.pm(), s.trials) + a.uncertainty;
      ok += pfa_ok && pm_ok ? 1 : 0;
    }
    agree += ok;
    total += static_cast<int>(points.size());
    if (points.size() < 8 || ok != static_cast<int>(points.size())) v.pass = false;
    note(v, "%s %d/%zu", name(kind).c_str(), ok, points.size());
  }
  note(v, "total %d/%d", agree, total);
  return v;
}

Verdict ac2() {
  Verdict v;
  const auto model = soft2_model();
  const auto params = soft2_params();
  std::vector<CalibratedPm> pm;
  for (auto kind : {DetectorKind::OptDTM, DetectorKind::MaxLog, DetectorKind::MRC, DetectorKind::CV}) {
    pm.push_back(calibrated_pm(DetectorAnalysis(kind, model, params), 0.05));
  }
  v.pass = no_worse(pm[0], pm[1]) && no_worse(pm[1], pm[2]) && no_worse(pm[0], pm[3]);
  const char* names[] = {"OptDTM", "MaxLog", "MRC", "CV"};
  for (int i = 0; i < 4; ++i) {
    note(v, "%s Pm %.4g at Pfa %.4g (one step looser %.4g)", names[i], pm[i].pm, pm[i].pfa, pm[i].looser_pm);
  }
  return v;
}

Verdict ac3() {
  Verdict v;
  const auto model = make_soft_model(4, -2.5, 3.5);
  bool dtm_wins = false;
  bool stm_wins = false;
  for (double J : {1.0, 2.0, 4.0, 8.0, 20.0, 50.0}) {
    const auto params = ChannelParams::from_gain(10, J, 2, 2);
    const double dtm = calibrated_pm(DetectorAnalysis(DetectorKind::OptDTM, model, params), 0.05).pm;
    const double stm = calibrated_pm(DetectorAnalysis(DetectorKind::OptSTM, model, params), 0.05).pm;
    dtm_wins = dtm_wins || dtm < stm;
    stm_wins = stm_wins || stm < dtm;
    note(v, "J=%g DTM %.4g STM %.4g", J, dtm, stm);
  }
  v.pass = dtm_wins && stm_wins;
  return v;
}

Verdict ac4() {
  Verdict v;
  const auto soft = make_soft_model(4, -2.5, 3.5);
  const auto hard = hard_from_soft(soft).to_model();
  const auto params = ChannelParams::from_gain(15, 4, 2, 2);
  for (auto kind : kAllDetectors) {
    const auto s = calibrated_pm(DetectorAnalysis(kind, soft, params), 0.05);
    const auto h = calibrated_pm(DetectorAnalysis(kind, hard, params), 0.05);
    const bool ok = no_worse(s, h);
    v.pass = v.pass && ok;
    note(v, "%s soft %.4g (one step looser %.4g) hard %.4g%s", name(kind).c_str(), s.pm, s.looser_pm, h.pm,
         ok ? "" : " (worse)");
  }
  return v;
}

// Random sensing model with a nondecreasing likelihood ratio.
SensingModel random_mlr_model(RandomStream& rng) {
  const int L = 2 + static_cast<int>(rng() % 7);
  std::vector<double> g0(static_cast<std::size_t>(L));
  std::vector<double> ratio(static_cast<std::size_t>(L));
  for (auto& g : g0) g = 0.05 + uniform01(rng);
  double r = 0.2 + uniform01(rng);
  for (auto& x : ratio) {
    x = r;
    r += 2.0 * uniform01(rng);
  }
  std::vector<double> g1(g0.size());
  double s0 = 0.0;
  double s1 = 0.0;
  for (std::size_t i = 0; i < g0.size(); ++i) {
    g1[i] = g0[i] * ratio[i];
    s0 += g0[i];
    s1 += g1[i];
  }
  for (auto& g : g0) g /= s0;
  for (auto& g : g1) g /= s1;
  return SensingModel(g0, g1);
}

Verdict ac5() {
  Verdict v;
  RandomStream rng(kSeed);
  const int models = 50;
  auto tolerance = [](std::int64_t s, double top_mean, int N) {
    // Rounding of the log-domain difference scales with its terms.
    return 1e-14 * (static_cast<double>(s) * std::log(top_mean) + N * top_mean);
  };
  int monotone = 0;
  int sandwich = 0;
  for (int i = 0; i < models; ++i) {
    const auto model = random_mlr_model(rng);
    const double A = 1.0 + 30.0 * uniform01(rng);
    const double J = 0.5 + 10.0 * uniform01(rng);
    const int N = 1 + static_cast<int>(rng() % 4);
    const auto params = ChannelParams::from_gain(A, J, N, 1);
    const auto limit = static_cast<std::int64_t>(10.0 * N * (A + J));
    bool mono = model.has_monotone_likelihood_ratio();
    bool sand = true;
    double prev = llr_opt_dtm_sensor(0, model, params);
    for (std::int64_t s = 0; s <= limit; ++s) {
      const double opt = llr_opt_dtm_sensor(s, model, params);
      mono = mono && opt >= prev - tolerance(s, A + J, N);
      prev = opt;
      sand = sand && std::abs(opt - llr_maxlog_sensor(s, model, params)) <= std::log(model.levels()) + 1e-12;
    }
    monotone += mono ? 1 : 0;
    sandwich += sand ? 1 : 0;
  }

  // The STM statistic needs the ratio condition on the distribution of the
  // summed sensed values, which the per-sensor condition does not imply.
  int stm = 0;
  int drawn = 0;
  for (int accepted = 0; accepted < models;) {
    ++drawn;
    const auto model = random_mlr_model(rng);
    const int M = 2 + static_cast<int>(rng() % 3);
    const auto sum = sum_pmf(model, M);
    if (!sum.has_monotone_likelihood_ratio()) continue;
    ++accepted;
    const double A = 1.0 + 30.0 * uniform01(rng);
    const double J = 0.5 + 10.0 * uniform01(rng);
    const int N = 1 + static_cast<int>(rng() % 4);
    const auto params = ChannelParams::from_gain(A, J, N, M);
    const double top = M * A + J;
    const auto limit = static_cast<std::int64_t>(10.0 * N * top);
    bool mono = true;
    double prev = llr_stm(0, sum, params);
    for (std::int64_t s = 0; s <= limit; ++s) {
      const double val = llr_stm(s, sum, params);
      mono = mono && val >= prev - tolerance(s, top, N);
      prev = val;
    }
    stm += mono ? 1 : 0;
  }
  v.pass = monotone == models && sandwich == models && stm == models;
  note(v, "DTM monotone %d/%d, STM monotone %d/%d (%d drawn), Max-Log sandwich %d/%d", monotone, models, stm,
       models, drawn, sandwich, models);
  return v;
}

Verdict ac6() {
  Verdict v;
  const double eps = 1e-12;
  RandomStream rng(kSeed + 6);
  double worst = 0.0;
  bool ok = true;
  int instances = 0;
  while (instances < 20) {
    const int L = 2 + static_cast<int>(rng() % 3);
    const double b0 = -3 + 2 * uniform01(rng);
    const double b1 = b0 + 1 + 4 * uniform01(rng);
    const double A = 0.5 + 6 * uniform01(rng);
    const double J = 0.5 + 3 * uniform01(rng);
    const int N = 1 + static_cast<int>(rng() % 2);
    const int M = 1 + static_cast<int>(rng() % 3);
    const auto model = make_soft_model(L, b0, b1);
    const auto params = ChannelParams::from_gain(A, J, N, M);
    const auto W = std::max(per_sensor_count_pmf(model, params, Hypothesis::H0, eps).max_count(),
                            per_sensor_count_pmf(model, params, Hypothesis::H1, eps).max_count());
    if (W > 60) continue;
    ++instances;
    const auto ref = oracle::soft(L, b0, b1);
    const auto kind = std::array{DetectorKind::OptDTM, DetectorKind::MaxLog, DetectorKind::CV}[instances % 3];
    const PerSensorLlr llr(kind, model, params);
    std::vector<double> table;
    std::vector<long double> f0;
    std::vector<long double> f1;
    for (std::int64_t w = 0; w <= W; ++w) {
      table.push_back(llr(w));
      f0.push_back(oracle::mixture_pmf(w, ref.g0, ref, A, J, N));
      f1.push_back(oracle::mixture_pmf(w, ref.g1, ref, A, J, N));
    }
    std::vector<double> gammas{-kInf, 0.0, kInf};
    for (int k = 0; k < 6; ++k) {
      double t = 0.0;
      for (int m = 0; m < M; ++m) t += table[rng() % table.size()];
      if (std::isfinite(t)) gammas.push_back(t);
    }
    for (double gamma : gammas) {
      const auto p = exact_perf_llr_sum([&](std::int64_t s) { return llr(s); }, model, params, gamma);
      const auto [pfa, pd] = oracle::brute_force_llr_sum(table, f0, f1, M, gamma);
      const double err = std::max(std::abs(p.pfa - static_cast<double>(pfa)), std::abs(p.pd - static_cast<double>(pd)));
      worst = std::max(worst, err);
      ok = ok && err <= 1e-9 + M * eps;
    }
  }
  note(v, "enumeration vs brute force max error %.3g over %d instances", worst, instances);

  // MRC: enumeration of the per-sensor statistic vs the closed form.
  const auto soft = make_soft_model(4, -2.5, 3.5);
  double worst_mrc = 0.0;
  for (int M : {1, 2, 3}) {
    const auto params = ChannelParams::from_gain(8, 4, 2, M);
    const auto sum = sum_pmf(soft, M);
    for (std::int64_t g = -1; g < 70; ++g) {
      const double gamma = -M * 2 * 8.0 + static_cast<double>(g) * std::log1p(2.0) + 1e-9;
      const auto e = exact_perf_llr_sum([&](std::int64_t s) { return llr_mrc(s, params); }, soft, params, gamma);
      const auto c = mrc_perf_closed_form(sum, params, static_cast<double>(g));
      const double err = std::max(std::abs(e.pfa - c.pfa), std::abs(e.pd - c.pd));
      worst_mrc = std::max(worst_mrc, err);
      ok = ok && err <= 1e-9 + 2 * M * eps;
    }
  }
  note(v, "MRC enumeration vs closed form %.3g", worst_mrc);

  // STM closed form vs an M = 1 reduction whose sensed value is the sum.
  double worst_stm = 0.0;
  for (int M : {2, 3, 4}) {
    const auto sum = sum_pmf(soft, M);
    const SensingModel virt(std::vector<double>(sum.mass(Hypothesis::H0).begin(), sum.mass(Hypothesis::H0).end()),
                            std::vector<double>(sum.mass(Hypothesis::H1).begin(), sum.mass(Hypothesis::H1).end()));
    const auto params = ChannelParams::from_gain(6, 4, 2, M);
    const auto one = ChannelParams::from_gain(6.0 * M, 4, 2, 1);
    for (std::int64_t g = -1; g < 90; ++g) {
      const auto c = stm_perf_closed_form(sum, params, static_cast<double>(g));
      const auto e = exact_perf_llr_sum([](std::int64_t s) { return static_cast<double>(s); }, virt, one,
                                        static_cast<double>(g));
      const double err = std::max(std::abs(e.pfa - c.pfa), std::abs(e.pd - c.pd));
      worst_stm = std::max(worst_stm, err);
      ok = ok && err <= 1e-9 + eps;
    }
  }
  note(v, "STM closed form vs single-sensor reduction %.3g", worst_stm);
  v.pass = ok;
  return v;
}

Verdict ac7() {
  Verdict v;
  const auto model = HardSensingModel{0.1, 0.1}.to_model();
  SimConfig cfg;
  cfg.trials = 1'000'000;
  cfg.seed = kSeed;
  for (double A : {4.0, 6.0}) {
    const auto problem = ChernoffProblem::for_detector(DetectorKind::MRC, model, ChannelParams::from_gain(A, 4, 1, 1));
    double ratio5 = 0.0;
    double ratio20 = 0.0;
    for (int M : {1, 2, 5, 10, 20}) {
      const auto params = ChannelParams::from_gain(A, 4, 1, M);
      const DetectorAnalysis analysis(DetectorKind::MRC, model, params);
      // Count threshold that brings Pfa and Pm closest together.
      DetectorSpec best;
      double gap = kInf;
      for (const auto& spec : analysis.default_thresholds()) {
        if (!std::isfinite(spec.threshold)) continue;
        const auto p = analysis.evaluate(spec);
        if (std::abs(p.pfa - p.pm()) < gap) {
          gap = std::abs(p.pfa - p.pm());
          best = spec;
        }
      }
      const double gamma = -M * A + best.threshold * std::log1p(A / 4.0);
      const auto bound = optimized_bounds(problem, gamma, M).bounds;
      const double pe_bound = std::max(bound.pfa_upper, bound.pm_upper);
      const auto sim = estimate_perf(best, model, params, cfg);
      const double pe_hat = std::max(sim.pfa_hat, sim.pm_hat);
      const double width = std::max(sim.pfa_half_width, sim.pm_half_width);
      const bool dominated = pe_hat <= pe_bound + width;
      v.pass = v.pass && dominated;
      const double ratio = pe_hat > 0.0 ? std::log(pe_bound) / std::log(pe_hat) : 0.0;
      if (M == 5) ratio5 = ratio;
      if (M == 20) ratio20 = ratio;
      note(v, "A=%g M=%d Pe %.3g bound %.3g", A, M, pe_hat, pe_bound);
    }
    const bool tighter = std::abs(1.0 - ratio20) < std::abs(1.0 - ratio5);
    v.pass = v.pass && tighter;
    note(v, "A=%g ratio M=5 %.3f M=20 %.3f", A, ratio5, ratio20);
  }
  return v;
}

Verdict ac8() {
  Verdict v;
  const auto model = HardSensingModel{0.1, 0.1}.to_model();
  double prev_s = kInf;
  double prev_ex = -kInf;
  for (double A : {4.0, 6.0, 8.0, 10.0}) {
    const auto problem = ChernoffProblem::for_detector(DetectorKind::MRC, model, ChannelParams::from_gain(A, 4, 1, 1));
    const auto [s0, s1] = problem.optimize_s(0.0);
    v.pass = v.pass && !s0.on_boundary && s0.s < prev_s && s0.exponent > prev_ex;
    prev_s = s0.s;
    prev_ex = s0.exponent;
    note(v, "A=%g s*=%.4f Ex=%.4f", A, s0.s, s0.exponent);
  }
  return v;
}

Verdict ac9() {
  Verdict v;
  const auto model = make_soft_model(4, -2.5, 3.5);
  const auto params = ChannelParams::from_gain(1e3, 1, 1000, 2);
  const auto sum = sum_pmf(model, 2);
  const double dtm = llr_opt_dtm_sensor(1'000'000, model, params);
  const double stm = llr_stm(1'000'000, sum, params);
  v.pass = std::isfinite(dtm) && std::isfinite(stm);
  note(v, "OptDTM %.6g, OptSTM %.6g", dtm, stm);
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict ac10() {
  Verdict v;
  const auto root = std::filesystem::temp_directory_path() / "mcfusion_acceptance";
  std::filesystem::remove_all(root);
  const auto config = std::filesystem::path(MCFUSION_CONFIG_DIR) / "sweep_noise.json";
  std::string reference;
  for (int threads : {1, 4, 16}) {
    RunOptions opt;
    opt.output_dir = root / std::to_string(threads);
    opt.threads = threads;
    opt.quiet = true;
    std::filesystem::create_directories(opt.output_dir);
    const int status = run_config_file(config, opt);
    const auto csv = slurp(opt.output_dir / "sweep_noise.csv");
    if (status != 0 || csv.empty()) v.pass = false;
    if (threads == 1) {
      reference = csv;
    } else if (csv != reference) {
      v.pass = false;
    }
    note(v, "%d threads: exit %d, %zu bytes", threads, status, csv.size());
  }
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"AC1 dual-engine agreement", ac1},  {"AC2 detector ordering", ac2},
      {"AC3 DTM/STM crossover", ac3},      {"AC4 soft beats hard", ac4},
      {"AC5 monotonicity suites", ac5},    {"AC6 oracle equivalence", ac6},
      {"AC7 Chernoff validity", ac7},      {"AC8 exponent shape", ac8},
      {"AC9 numerical stability", ac9},    {"AC10 reproducibility", ac10}};
  int failures = 0;
  for (const auto& [label, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failures += v.pass ? 0 : 1;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", label, v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
