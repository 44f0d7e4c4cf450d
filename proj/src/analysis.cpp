#include "mcfusion/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/binomial.hpp>

#include "mcfusion/numeric.hpp"

namespace mcfusion {

namespace {

// Rounding allowance for the pruning bounds; the exact comparison is
// always made on the sensor-order partial sum.
double pruning_slack(double gamma, double partial, double span_bound) {
  return 1e-9 * (1.0 + std::abs(gamma) + std::abs(partial) + span_bound);
}

double count_tail(double gamma, double mean) {
  if (gamma == -kInf) return 1.0;
  if (gamma == kInf) return 0.0;
  return poisson_tail(static_cast<std::int64_t>(std::floor(gamma)), mean);
}

// sum_{m > global}^{M} C(M, m) p^m (1 - p)^{M - m}
double vote_exceeds(int sensors, std::int64_t global, double p) {
  double total = 0.0;
  for (int m = static_cast<int>(std::max<std::int64_t>(global + 1, 0)); m <= sensors; ++m) {
    total += boost::math::binomial_coefficient<double>(static_cast<unsigned>(sensors), static_cast<unsigned>(m)) *
             std::pow(p, m) * std::pow(1.0 - p, sensors - m);
  }
  return std::clamp(total, 0.0, 1.0);
}

PerfPoint sum_rule_closed_form(const SumSensingPMF& sum, const ChannelParams& params, double gamma,
                               double noise_scale, DetectorKind kind) {
  const double N = static_cast<double>(params.slots());
  const auto G0 = sum.mass(Hypothesis::H0);
  const auto G1 = sum.mass(Hypothesis::H1);
  PerfPoint p;
  p.spec.kind = kind;
  p.spec.threshold = gamma;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    const double mean = N * noise_scale * params.noise() + sum.grid_value(i) * N * params.gain();
    const double tail = count_tail(gamma, mean);
    p.pfa += G0[i] * tail;
    p.pd += G1[i] * tail;
  }
  p.pfa = std::clamp(p.pfa, 0.0, 1.0);
  p.pd = std::clamp(p.pd, 0.0, 1.0);
  return p;
}

std::int64_t mixture_quantile(const SensingModel& model, const ChannelParams& params, double eps) {
  std::int64_t limit = 0;
  for (int l = 0; l < model.levels(); ++l) {
    const double mean = static_cast<double>(params.slots()) * steady_mean(model.grid_value(l), params);
    limit = std::max(limit, poisson_upper_quantile(mean, eps));
  }
  return limit;
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Analytic: return "analytic";
    case Method::MonteCarlo: return "monte-carlo";
    case Method::ChernoffBound: return "chernoff-bound";
  }
  return "?";
}

CountPMF::CountPMF(std::vector<double> mass, double tail) : mass_(std::move(mass)), tail_(tail) {
  if (mass_.empty()) throw std::invalid_argument("CountPMF: empty support");
  if (!(tail_ >= 0.0 && tail_ <= 1.0)) throw std::invalid_argument("CountPMF: tail must lie in [0, 1]");
}

double CountPMF::mass(std::int64_t w) const {
  if (w < 0 || w > max_count()) return 0.0;
  return mass_[static_cast<std::size_t>(w)];
}

double CountPMF::mean() const {
  double m = 0.0;
  for (std::size_t w = 0; w < mass_.size(); ++w) m += static_cast<double>(w) * mass_[w];
  return m;
}

CountPMF per_sensor_count_pmf(const SensingModel& model, const ChannelParams& params, Hypothesis h,
                              double eps, std::int64_t min_max_count) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("per_sensor_count_pmf: eps must lie in (0, 1)");
  const auto g = model.mass(h);
  std::vector<double> means;
  std::vector<double> weights;
  for (int l = 0; l < model.levels(); ++l) {
    if (g[static_cast<std::size_t>(l)] == 0.0) continue;
    means.push_back(static_cast<double>(params.slots()) * steady_mean(model.grid_value(l), params));
    weights.push_back(g[static_cast<std::size_t>(l)]);
  }
  auto mixture_tail = [&](std::int64_t w) {
    double t = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) t += weights[i] * poisson_tail(w, means[i]);
    return t;
  };
  // Every component below eps bounds the mixture; then shrink to the
  // smallest W that still meets eps.
  std::int64_t hi = 0;
  for (double mean : means) hi = std::max(hi, poisson_upper_quantile(mean, eps));
  std::int64_t lo = -1;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (mixture_tail(mid) <= eps) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const std::int64_t W = std::max(hi, min_max_count);
  std::vector<double> mass(static_cast<std::size_t>(W) + 1, 0.0);
  for (std::int64_t w = 0; w <= W; ++w) {
    double m = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) m += weights[i] * poisson_pmf(w, means[i]);
    mass[static_cast<std::size_t>(w)] = m;
  }
  return CountPMF(std::move(mass), mixture_tail(W));
}

LlrSumEngine::LlrSumEngine(std::span<const double> llr, const CountPMF& f0, const CountPMF& f1, int sensors)
    : sensors_(sensors) {
  if (sensors < 1) throw std::invalid_argument("LlrSumEngine: M must be >= 1");
  if (llr.size() != f0.size() || llr.size() != f1.size()) {
    throw std::invalid_argument("LlrSumEngine: LLR table and count PMFs must share a support");
  }
  std::vector<Atom> raw;
  for (std::size_t w = 0; w < llr.size(); ++w) {
    const double v = llr[w];
    const double p0 = f0.mass()[w];
    const double p1 = f1.mass()[w];
    if (p0 == 0.0 && p1 == 0.0) continue;
    if (std::isnan(v)) throw std::invalid_argument("LlrSumEngine: NaN LLR value");
    if (v == kInf) {
      pos0_ += p0;
      pos1_ += p1;
    } else if (v != -kInf) {
      raw.push_back({v, p0, p1});
    }
  }
  if (raw.empty() && pos0_ == 0.0 && pos1_ == 0.0) {
    throw std::domain_error("LlrSumEngine: degenerate statistic (every value is -inf)");
  }
  std::sort(raw.begin(), raw.end(), [](const Atom& a, const Atom& b) { return a.llr > b.llr; });
  for (const auto& a : raw) {
    if (!atoms_.empty() && atoms_.back().llr == a.llr) {
      atoms_.back().p0 += a.p0;
      atoms_.back().p1 += a.p1;
    } else {
      atoms_.push_back(a);
    }
  }
  prefix0_.assign(atoms_.size() + 1, 0.0);
  prefix1_.assign(atoms_.size() + 1, 0.0);
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    prefix0_[i + 1] = prefix0_[i] + atoms_[i].p0;
    prefix1_[i + 1] = prefix1_[i] + atoms_[i].p1;
  }
  finite0_ = prefix0_.back();
  finite1_ = prefix1_.back();
  truncation_ = static_cast<double>(sensors) * std::max(f0.tail(), f1.tail());
}

double LlrSumEngine::min_total() const {
  return atoms_.empty() ? 0.0 : static_cast<double>(sensors_) * atoms_.back().llr;
}

double LlrSumEngine::max_total() const {
  return atoms_.empty() ? 0.0 : static_cast<double>(sensors_) * atoms_.front().llr;
}

void LlrSumEngine::accumulate(int remaining, double partial, double w0, double w1, double gamma,
                              double& pfa, double& pd) const {
  const auto n = atoms_.size();
  if (remaining == 1) {
    // Atoms are descending, so the exceeding set is a prefix.
    std::size_t lo = 0;
    std::size_t hi = n;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (partial + atoms_[mid].llr > gamma) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    pfa += w0 * prefix0_[lo];
    pd += w1 * prefix1_[lo];
    return;
  }
  const int rest = remaining - 1;
  const double top = atoms_.front().llr;
  const double bottom = atoms_.back().llr;
  const double rest_max = rest * top;
  const double rest_min = rest * bottom;
  const double slack = pruning_slack(gamma, partial, rest * (std::abs(top) + std::abs(bottom)) +
                                                         std::abs(top) + std::abs(bottom));
  // Prefix of atoms for which every completion exceeds gamma.
  std::size_t certain = 0;
  while (certain < n && partial + atoms_[certain].llr + rest_min > gamma + slack) ++certain;
  if (certain > 0) {
    pfa += w0 * prefix0_[certain] * std::pow(finite0_, rest);
    pd += w1 * prefix1_[certain] * std::pow(finite1_, rest);
  }
  for (std::size_t j = certain; j < n; ++j) {
    const auto& a = atoms_[j];
    if (partial + a.llr + rest_max <= gamma - slack) break;
    const double n0 = w0 * a.p0;
    const double n1 = w1 * a.p1;
    if (n0 == 0.0 && n1 == 0.0) continue;
    accumulate(rest, partial + a.llr, n0, n1, gamma, pfa, pd);
  }
}

std::pair<double, double> LlrSumEngine::probabilities(double gamma) const {
  if (std::isnan(gamma)) throw std::invalid_argument("LlrSumEngine: NaN threshold");
  double pfa = 0.0;
  double pd = 0.0;
  if (gamma == -kInf) {
    pfa = std::pow(finite0_, sensors_);
    pd = std::pow(finite1_, sensors_);
  } else if (gamma != kInf && !atoms_.empty()) {
    accumulate(sensors_, 0.0, 1.0, 1.0, gamma, pfa, pd);
  }
  if (gamma != kInf) {
    // Some sensor reports +inf and none reports -inf.
    pfa += std::pow(finite0_ + pos0_, sensors_) - std::pow(finite0_, sensors_);
    pd += std::pow(finite1_ + pos1_, sensors_) - std::pow(finite1_, sensors_);
  }
  return {std::clamp(pfa, 0.0, 1.0), std::clamp(pd, 0.0, 1.0)};
}

std::optional<std::vector<double>> LlrSumEngine::achievable_totals(std::size_t cap) const {
  const double tuples = std::pow(static_cast<double>(atoms_.size()), sensors_);
  if (tuples > static_cast<double>(cap)) return std::nullopt;
  std::vector<double> totals;
  totals.reserve(static_cast<std::size_t>(tuples));
  std::vector<std::size_t> index(static_cast<std::size_t>(sensors_), 0);
  const auto n = atoms_.size();
  if (n == 0) return totals;
  while (true) {
    double total = 0.0;
    for (auto i : index) total += atoms_[i].llr;
    totals.push_back(total);
    int m = sensors_ - 1;
    while (m >= 0 && ++index[static_cast<std::size_t>(m)] == n) {
      index[static_cast<std::size_t>(m)] = 0;
      --m;
    }
    if (m < 0) break;
  }
  std::sort(totals.begin(), totals.end());
  // Totals that differ only by summation-order rounding form one cluster,
  // represented by its largest member.
  std::vector<double> distinct;
  for (double t : totals) {
    if (!distinct.empty() && t - distinct.back() <= 1e-12 * std::max(1.0, std::abs(t))) {
      distinct.back() = t;
    } else {
      distinct.push_back(t);
    }
  }
  return distinct;
}

PerfPoint exact_perf_llr_sum(const std::function<double(std::int64_t)>& llr, const SensingModel& model,
                             const ChannelParams& params, double gamma, const AnalysisOptions& options) {
  if (params.sensors() > options.max_enumerated_sensors) {
    throw std::invalid_argument("exact_perf_llr_sum: M exceeds the enumeration cap");
  }
  const auto probe0 = per_sensor_count_pmf(model, params, Hypothesis::H0, options.eps);
  const auto probe1 = per_sensor_count_pmf(model, params, Hypothesis::H1, options.eps);
  const auto W = std::max(probe0.max_count(), probe1.max_count());
  const auto f0 = per_sensor_count_pmf(model, params, Hypothesis::H0, options.eps, W);
  const auto f1 = per_sensor_count_pmf(model, params, Hypothesis::H1, options.eps, W);
  std::vector<double> table(static_cast<std::size_t>(W) + 1);
  for (std::int64_t w = 0; w <= W; ++w) table[static_cast<std::size_t>(w)] = llr(w);
  const LlrSumEngine engine(table, f0, f1, params.sensors());
  const auto [pfa, pd] = engine.probabilities(gamma);
  PerfPoint p;
  p.spec.threshold = gamma;
  p.pfa = pfa;
  p.pd = pd;
  p.uncertainty = engine.truncation_bound();
  return p;
}

PerfPoint stm_perf_closed_form(const SumSensingPMF& sum, const ChannelParams& params, double gamma) {
  return sum_rule_closed_form(sum, params, gamma, 1.0, DetectorKind::OptSTM);
}

PerfPoint mrc_perf_closed_form(const SumSensingPMF& sum, const ChannelParams& params, double gamma) {
  return sum_rule_closed_form(sum, params, gamma, static_cast<double>(sum.sensors()), DetectorKind::MRC);
}

PerfPoint two_stage_perf(const SensingModel& model, const ChannelParams& params, std::int64_t local_threshold,
                         std::int64_t global_threshold) {
  const int M = params.sensors();
  if (global_threshold < 0 || global_threshold > M) {
    throw std::invalid_argument("two_stage_perf: global threshold must lie in [0, M]");
  }
  double local_pfa = 0.0;
  double local_pd = 0.0;
  const double N = static_cast<double>(params.slots());
  for (int l = 0; l < model.levels(); ++l) {
    const double mean = N * params.noise() + N * model.grid_value(l) * params.gain();
    const double tail = poisson_tail(local_threshold, mean);
    local_pfa += model.mass(Hypothesis::H0, l) * tail;
    local_pd += model.mass(Hypothesis::H1, l) * tail;
  }
  PerfPoint p;
  p.spec.kind = DetectorKind::TwoStage;
  p.spec.local_threshold = local_threshold;
  p.spec.global_threshold = global_threshold;
  p.pfa = vote_exceeds(M, global_threshold, std::clamp(local_pfa, 0.0, 1.0));
  p.pd = vote_exceeds(M, global_threshold, std::clamp(local_pd, 0.0, 1.0));
  return p;
}

DetectorAnalysis::DetectorAnalysis(DetectorKind kind, SensingModel model, ChannelParams params,
                                   AnalysisOptions options)
    : kind_(kind), model_(std::move(model)), params_(std::move(params)), options_(options) {
  switch (kind_) {
    case DetectorKind::MRC:
    case DetectorKind::OptSTM:
      sum_ = sum_pmf(model_, params_.sensors());
      break;
    case DetectorKind::TwoStage:
      local_limit_ = mixture_quantile(model_, params_, options_.eps);
      break;
    default: {
      if (params_.sensors() > options_.max_enumerated_sensors) {
        throw std::invalid_argument("DetectorAnalysis: M exceeds the enumeration cap");
      }
      const auto probe0 = per_sensor_count_pmf(model_, params_, Hypothesis::H0, options_.eps);
      const auto probe1 = per_sensor_count_pmf(model_, params_, Hypothesis::H1, options_.eps);
      const auto W = std::max(probe0.max_count(), probe1.max_count());
      const auto f0 = per_sensor_count_pmf(model_, params_, Hypothesis::H0, options_.eps, W);
      const auto f1 = per_sensor_count_pmf(model_, params_, Hypothesis::H1, options_.eps, W);
      const PerSensorLlr llr(kind_, model_, params_, W + 1);
      std::vector<double> table(static_cast<std::size_t>(W) + 1);
      for (std::int64_t w = 0; w <= W; ++w) table[static_cast<std::size_t>(w)] = llr(w);
      engine_.emplace(table, f0, f1, params_.sensors());
      totals_ = engine_->achievable_totals(options_.max_threshold_atoms);
    }
  }
}

std::int64_t DetectorAnalysis::count_limit() const {
  const double N = static_cast<double>(params_.slots());
  const double noise = kind_ == DetectorKind::MRC ? params_.sensors() * params_.noise() : params_.noise();
  std::int64_t limit = 0;
  for (std::size_t i = 0; i < sum_->size(); ++i) {
    limit = std::max(limit, poisson_upper_quantile(N * noise + N * sum_->grid_value(i) * params_.gain(),
                                                   options_.eps));
  }
  return limit;
}

DetectorSpec DetectorAnalysis::with_threshold(double gamma) const {
  DetectorSpec s;
  s.kind = kind_;
  s.threshold = gamma;
  return s;
}

PerfPoint DetectorAnalysis::evaluate(const DetectorSpec& spec) const {
  if (spec.kind != kind_) throw std::invalid_argument("DetectorAnalysis: detector kind mismatch");
  spec.validate(params_.sensors());
  PerfPoint p;
  switch (kind_) {
    case DetectorKind::MRC: p = mrc_perf_closed_form(*sum_, params_, spec.threshold); break;
    case DetectorKind::OptSTM: p = stm_perf_closed_form(*sum_, params_, spec.threshold); break;
    case DetectorKind::TwoStage:
      p = two_stage_perf(model_, params_, spec.local_threshold, spec.global_threshold);
      break;
    default: {
      const auto [pfa, pd] = engine_->probabilities(spec.threshold);
      p.pfa = pfa;
      p.pd = pd;
      p.uncertainty = engine_->truncation_bound();
    }
  }
  p.spec = spec;
  p.method = Method::Analytic;
  return p;
}

std::vector<DetectorSpec> DetectorAnalysis::default_thresholds() const {
  std::vector<DetectorSpec> out;
  switch (kind_) {
    case DetectorKind::MRC:
    case DetectorKind::OptSTM: {
      const auto limit = count_limit();
      for (std::int64_t c = -1; c <= limit; ++c) out.push_back(with_threshold(static_cast<double>(c)));
      out.push_back(with_threshold(kInf));
      break;
    }
    case DetectorKind::TwoStage: {
      for (std::int64_t g = 0; g < params_.sensors(); ++g) {
        for (std::int64_t c = -1; c <= local_limit_; ++c) {
          DetectorSpec s;
          s.kind = kind_;
          s.local_threshold = c;
          s.global_threshold = g;
          out.push_back(s);
        }
      }
      DetectorSpec never;
      never.kind = kind_;
      never.local_threshold = -1;
      never.global_threshold = params_.sensors();
      out.push_back(never);
      break;
    }
    default: {
      out.push_back(with_threshold(-kInf));
      if (totals_) {
        for (double t : *totals_) out.push_back(with_threshold(t));
      } else {
        const double lo = engine_->min_total();
        const double hi = engine_->max_total();
        const auto n = options_.uniform_threshold_count;
        for (std::size_t i = 0; i < n; ++i) {
          out.push_back(with_threshold(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1)));
        }
      }
      out.push_back(with_threshold(kInf));
    }
  }
  return out;
}

std::vector<PerfPoint> DetectorAnalysis::roc(std::span<const DetectorSpec> thresholds) const {
  std::vector<PerfPoint> points;
  points.reserve(thresholds.size());
  for (const auto& s : thresholds) points.push_back(evaluate(s));
  std::stable_sort(points.begin(), points.end(), [](const PerfPoint& a, const PerfPoint& b) {
    return a.pfa != b.pfa ? a.pfa < b.pfa : a.pd < b.pd;
  });
  return points;
}

Calibration DetectorAnalysis::calibrate(double target_pfa) const {
  if (!(target_pfa > 0.0 && target_pfa <= 1.0)) {
    throw std::invalid_argument("calibrate: target Pfa must lie in (0, 1]");
  }
  Calibration c;
  auto finish = [&](const DetectorSpec& spec, bool never_alarm) {
    c.spec = spec;
    c.perf = evaluate(spec);
    c.feasible = !never_alarm;
    return c;
  };
  switch (kind_) {
    case DetectorKind::MRC:
    case DetectorKind::OptSTM: {
      auto pfa_at = [&](std::int64_t t) { return evaluate(with_threshold(static_cast<double>(t))).pfa; };
      std::int64_t hi = count_limit();
      if (pfa_at(hi) > target_pfa) return finish(with_threshold(kInf), true);
      std::int64_t lo = -2;  // sentinel: Pfa treated as above target
      while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (pfa_at(mid) <= target_pfa) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      return finish(with_threshold(static_cast<double>(hi)), false);
    }
    case DetectorKind::TwoStage: {
      std::optional<PerfPoint> best;
      for (std::int64_t g = 0; g <= params_.sensors(); ++g) {
        for (std::int64_t l = -1; l <= local_limit_; ++l) {
          const auto p = two_stage_perf(model_, params_, l, g);
          if (p.pfa > target_pfa) continue;
          if (!best || p.pm() < best->pm() || (p.pm() == best->pm() && p.pfa > best->pfa)) best = p;
          if (g == params_.sensors()) break;  // every local threshold is equivalent
        }
      }
      return finish(best->spec, best->spec.global_threshold == params_.sensors());
    }
    default: {
      auto pfa_at = [&](double t) { return engine_->probabilities(t).first; };
      if (pfa_at(-kInf) <= target_pfa) return finish(with_threshold(-kInf), false);
      if (totals_) {
        const auto& t = *totals_;
        const auto it = std::partition_point(t.begin(), t.end(), [&](double v) { return pfa_at(v) > target_pfa; });
        if (it == t.end()) return finish(with_threshold(kInf), true);
        return finish(with_threshold(*it), false);
      }
      double lo = engine_->min_total() - 1.0;
      double hi = engine_->max_total();
      if (pfa_at(hi) > target_pfa) return finish(with_threshold(kInf), true);
      for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (pfa_at(mid) <= target_pfa) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      return finish(with_threshold(hi), false);
    }
  }
}

std::optional<DetectorSpec> DetectorAnalysis::looser_neighbor(const DetectorSpec& spec) const {
  switch (kind_) {
    case DetectorKind::MRC:
    case DetectorKind::OptSTM:
      if (spec.threshold == -kInf || spec.threshold <= -1.0) return std::nullopt;
      if (spec.threshold == kInf) return with_threshold(static_cast<double>(count_limit()));
      return with_threshold(spec.threshold - 1.0);
    case DetectorKind::TwoStage: {
      if (spec.global_threshold == params_.sensors()) {
        DetectorSpec s = spec;
        s.global_threshold = params_.sensors() - 1;
        s.local_threshold = local_limit_;
        return s;
      }
      if (spec.local_threshold <= -1) return std::nullopt;
      DetectorSpec s = spec;
      s.local_threshold -= 1;
      return s;
    }
    default: {
      if (!totals_) return std::nullopt;
      const auto& t = *totals_;
      if (spec.threshold == -kInf || t.empty()) return std::nullopt;
      const auto it = std::lower_bound(t.begin(), t.end(), spec.threshold);
      if (it == t.begin()) return with_threshold(-kInf);
      return with_threshold(*std::prev(it));
    }
  }
}

std::vector<PerfPoint> roc_curve(DetectorKind kind, const SensingModel& model, const ChannelParams& params,
                                 std::span<const DetectorSpec> thresholds, const AnalysisOptions& options) {
  if (thresholds.empty()) throw std::invalid_argument("roc_curve: empty threshold set");
  return DetectorAnalysis(kind, model, params, options).roc(thresholds);
}

Calibration calibrate_threshold(DetectorKind kind, const SensingModel& model, const ChannelParams& params,
                                double target_pfa, const AnalysisOptions& options) {
  return DetectorAnalysis(kind, model, params, options).calibrate(target_pfa);
}

}  // namespace mcfusion
