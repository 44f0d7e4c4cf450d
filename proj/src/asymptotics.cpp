#include "mcfusion/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mcfusion/numeric.hpp"

namespace mcfusion {

namespace {

// -log sum exp(s * llr + log_f) over outcomes with positive mass.
double tilted_exponent(double s, std::span<const double> llr, std::span<const double> log_f) {
  if (s == 0.0) return 0.0;
  std::vector<double> terms;
  terms.reserve(llr.size());
  for (std::size_t w = 0; w < llr.size(); ++w) {
    if (log_f[w] == -kInf) continue;
    const double t = s * llr[w];
    if (t == -kInf) continue;
    terms.push_back(t + log_f[w]);
  }
  return -log_sum_exp(terms);
}

double log_mixture_pmf(std::int64_t w, const SensingModel& model, const ChannelParams& params, Hypothesis h) {
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(model.levels()));
  for (int l = 0; l < model.levels(); ++l) {
    const double g = model.mass(h, l);
    if (g == 0.0) continue;
    const double mean = static_cast<double>(params.slots()) * steady_mean(model.grid_value(l), params);
    terms.push_back(std::log(g) + poisson_log_pmf(w, mean));
  }
  return log_sum_exp(terms);
}

constexpr double kGolden = 0.6180339887498949;
constexpr int kCoarseGrid = 64;
constexpr double kSTolerance = 1e-4;

}  // namespace

double chernoff_exponent(double s, const CountPMF& f, std::span<const double> llr) {
  if (llr.size() != f.size()) throw std::invalid_argument("chernoff_exponent: LLR table and PMF sizes differ");
  std::vector<double> log_f(f.size());
  for (std::size_t w = 0; w < f.size(); ++w) log_f[w] = std::log(f.mass()[w]);
  return tilted_exponent(s, llr, log_f);
}

ChernoffProblem::ChernoffProblem(std::vector<double> llr, std::vector<double> log_f0, std::vector<double> log_f1,
                                 double s_max)
    : llr_(std::move(llr)), log_f0_(std::move(log_f0)), log_f1_(std::move(log_f1)), s_max_(s_max) {
  if (llr_.empty() || llr_.size() != log_f0_.size() || llr_.size() != log_f1_.size()) {
    throw std::invalid_argument("ChernoffProblem: LLR table and PMFs must share a nonempty support");
  }
  if (!(s_max_ > 0.0 && std::isfinite(s_max_))) throw std::invalid_argument("ChernoffProblem: s_max must be > 0");
}

ChernoffProblem ChernoffProblem::for_detector(DetectorKind kind, const SensingModel& model,
                                              const ChannelParams& params, double s_max) {
  const PerSensorLlr statistic(kind, model, params);
  std::vector<double> llr;
  std::vector<double> log_f0;
  std::vector<double> log_f1;
  // Peak of each tilted sequence seen so far, for s in {-s_max, s_max} and
  // both hypotheses.
  double peak[4] = {-kInf, -kInf, -kInf, -kInf};
  double last[4] = {-kInf, -kInf, -kInf, -kInf};
  std::int64_t start = 0;
  for (int l = 0; l < model.levels(); ++l) {
    const double mean = static_cast<double>(params.slots()) * steady_mean(model.grid_value(l), params);
    start = std::max(start, poisson_upper_quantile(mean, 1e-30));
  }
  constexpr std::int64_t kMaxSupport = 2'000'000;
  for (std::int64_t w = 0; w < kMaxSupport; ++w) {
    llr.push_back(statistic(w));
    log_f0.push_back(log_mixture_pmf(w, model, params, Hypothesis::H0));
    log_f1.push_back(log_mixture_pmf(w, model, params, Hypothesis::H1));
    bool settled = w >= start;
    int k = 0;
    for (double s : {-s_max, s_max}) {
      for (const auto* lf : {&log_f0, &log_f1}) {
        const double lfw = lf->back();
        const double t = lfw == -kInf ? -kInf : s * llr.back() + lfw;
        // Infinite terms make the exponent divergent whatever the support.
        if (std::isfinite(t)) {
          peak[k] = std::max(peak[k], t);
          if (!(t < peak[k] - 80.0 && t <= last[k])) settled = false;
        }
        last[k] = t;
        ++k;
      }
    }
    if (settled) break;
  }
  return ChernoffProblem(std::move(llr), std::move(log_f0), std::move(log_f1), s_max);
}

double ChernoffProblem::exponent(double s, Hypothesis h) const {
  return tilted_exponent(s, llr_, log_mass(h));
}

double ChernoffProblem::mean_llr(Hypothesis h) const {
  const auto lf = log_mass(h);
  double mean = 0.0;
  for (std::size_t w = 0; w < llr_.size(); ++w) {
    if (lf[w] == -kInf) continue;
    mean += std::exp(lf[w]) * llr_[w];
  }
  return mean;
}

ChernoffBounds ChernoffProblem::bounds(double s0, double s1, double gamma, int sensors) const {
  if (!(s0 > 0.0) || !(s1 < 0.0)) throw std::invalid_argument("chernoff bounds: need s0 > 0 > s1");
  const double M = static_cast<double>(sensors);
  ChernoffBounds b;
  b.pfa_upper = std::min(1.0, std::exp(-M * exponent(s0, Hypothesis::H0) - s0 * gamma));
  b.pm_upper = std::min(1.0, std::exp(-M * exponent(s1, Hypothesis::H1) - s1 * gamma));
  return b;
}

SOptimum ChernoffProblem::maximize(Hypothesis h, double theta) const {
  const double sign = h == Hypothesis::H0 ? 1.0 : -1.0;
  auto value = [&](double magnitude) {
    const double s = sign * magnitude;
    const double v = exponent(s, h) + s * theta;
    return std::isnan(v) ? -kInf : v;
  };
  const double step = s_max_ / kCoarseGrid;
  int best = 1;
  double best_value = value(step);
  for (int k = 2; k <= kCoarseGrid; ++k) {
    const double v = value(k * step);
    if (v > best_value) {
      best = k;
      best_value = v;
    }
  }
  double a = std::max((best - 1) * step, 1e-9 * s_max_);
  double b = std::min((best + 1) * step, s_max_);
  double c = b - kGolden * (b - a);
  double d = a + kGolden * (b - a);
  double fc = value(c);
  double fd = value(d);
  while (b - a > kSTolerance) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kGolden * (b - a);
      fc = value(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kGolden * (b - a);
      fd = value(d);
    }
  }
  SOptimum opt;
  double magnitude = 0.5 * (a + b);
  double v = value(magnitude);
  if (best_value > v) {  // the grid point wins if the search drifted
    magnitude = best * step;
    v = best_value;
  }
  opt.s = sign * magnitude;
  opt.exponent = v;
  opt.on_boundary = magnitude < step || magnitude > s_max_ - kSTolerance;
  return opt;
}

std::pair<SOptimum, SOptimum> ChernoffProblem::optimize_s(double theta) const {
  return {maximize(Hypothesis::H0, theta), maximize(Hypothesis::H1, theta)};
}

double ChernoffProblem::equalizing_theta() const {
  double lo = mean_llr(Hypothesis::H0);
  double hi = mean_llr(Hypothesis::H1);
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    lo = kInf;
    hi = -kInf;
    for (double v : llr_) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(lo < hi)) throw std::domain_error("equalizing_theta: statistic has no spread");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto [e0, e1] = optimize_s(mid);
    if (e0.exponent > e1.exponent) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

ChernoffBounds chernoff_bounds(double s0, double s1, double gamma, int sensors, const CountPMF& f0,
                               const CountPMF& f1, std::span<const double> llr) {
  if (!(s0 > 0.0) || !(s1 < 0.0)) throw std::invalid_argument("chernoff_bounds: need s0 > 0 > s1");
  const double M = static_cast<double>(sensors);
  ChernoffBounds b;
  b.pfa_upper = std::min(1.0, std::exp(-M * chernoff_exponent(s0, f0, llr) - s0 * gamma));
  b.pm_upper = std::min(1.0, std::exp(-M * chernoff_exponent(s1, f1, llr) - s1 * gamma));
  return b;
}

ExponentCurve exponent_curve(const ChernoffProblem& problem, std::span<const double> s_grid, double theta) {
  ExponentCurve curve;
  curve.theta = theta;
  for (double s : s_grid) {
    if (!(s > 0.0)) throw std::invalid_argument("exponent_curve: grid values must be positive |s|");
    curve.s_grid.push_back(s);
    curve.ex0.push_back(problem.exponent(s, Hypothesis::H0) + s * theta);
    curve.ex1.push_back(problem.exponent(-s, Hypothesis::H1) - s * theta);
  }
  std::tie(curve.star0, curve.star1) = problem.optimize_s(theta);
  return curve;
}

OptimizedBound optimized_bounds(const ChernoffProblem& problem, double gamma, int sensors) {
  if (sensors < 1) throw std::invalid_argument("optimized_bounds: M must be >= 1");
  OptimizedBound out;
  std::tie(out.star0, out.star1) = problem.optimize_s(gamma / sensors);
  out.bounds = problem.bounds(out.star0.s, out.star1.s, gamma, sensors);
  return out;
}

}  // namespace mcfusion
