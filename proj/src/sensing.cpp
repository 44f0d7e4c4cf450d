#include "mcfusion/sensing.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mcfusion {

namespace {

constexpr double kMassTolerance = 1e-9;

std::vector<double> checked_normalized(std::vector<double> mass, const char* name) {
  double total = 0.0;
  for (double m : mass) {
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw std::invalid_argument(std::string(name) + ": masses must be finite and nonnegative");
    }
    total += m;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw std::invalid_argument(std::string(name) + ": masses must sum to 1");
  }
  for (double& m : mass) m /= total;
  return mass;
}

bool ratio_condition(std::span<const double> g0, std::span<const double> g1) {
  // g1(x) g0(x') >= g1(x') g0(x) for x > x', written without divisions so
  // zero masses are handled.
  for (std::size_t hi = 1; hi < g0.size(); ++hi) {
    for (std::size_t lo = 0; lo < hi; ++lo) {
      const double lhs = g1[hi] * g0[lo];
      const double rhs = g1[lo] * g0[hi];
      if (lhs < rhs * (1.0 - 1e-12)) return false;
    }
  }
  return true;
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

}  // namespace

SensingModel::SensingModel(std::vector<double> g0, std::vector<double> g1) {
  if (g0.size() < 2 || g0.size() != g1.size()) {
    throw std::invalid_argument("SensingModel: g0 and g1 need the same length L >= 2");
  }
  g0_ = checked_normalized(std::move(g0), "g0");
  g1_ = checked_normalized(std::move(g1), "g1");
  const int L = levels();
  grid_.resize(g0_.size());
  for (int l = 0; l < L; ++l) grid_[l] = static_cast<double>(l) / static_cast<double>(L - 1);
}

double SensingModel::grid_value(int level) const {
  return grid_.at(static_cast<std::size_t>(level));
}

bool SensingModel::has_monotone_likelihood_ratio() const { return ratio_condition(g0_, g1_); }

SensingModel make_soft_model(int levels, double b0, double b1) {
  if (levels < 2) throw std::invalid_argument("make_soft_model: L must be at least 2");
  std::vector<double> g0(static_cast<std::size_t>(levels));
  std::vector<double> g1(g0.size());
  // Exponents are shifted by their maxima before exponentiating.
  const double shift0 = std::max(0.0, b0);
  const double shift1 = std::max(0.0, b1);
  for (int l = 0; l < levels; ++l) {
    const double x = static_cast<double>(l) / static_cast<double>(levels - 1);
    g0[l] = std::exp(b0 * x - shift0);
    g1[l] = std::exp(b1 * x - shift1);
  }
  const double s0 = std::accumulate(g0.begin(), g0.end(), 0.0);
  const double s1 = std::accumulate(g1.begin(), g1.end(), 0.0);
  for (auto& v : g0) v /= s0;
  for (auto& v : g1) v /= s1;
  return SensingModel(std::move(g0), std::move(g1));
}

SensingModel make_ideal_model(int levels) {
  if (levels < 2) throw std::invalid_argument("make_ideal_model: L must be at least 2");
  std::vector<double> g0(static_cast<std::size_t>(levels), 0.0);
  std::vector<double> g1(g0.size(), 0.0);
  g0.front() = 1.0;
  g1.back() = 1.0;
  return SensingModel(std::move(g0), std::move(g1));
}

void HardSensingModel::validate() const {
  if (!(p0 >= 0.0 && p0 <= 1.0 && p1 >= 0.0 && p1 <= 1.0)) {
    throw std::invalid_argument("HardSensingModel: p0 and p1 must lie in [0, 1]");
  }
}

SensingModel HardSensingModel::to_model() const {
  validate();
  return SensingModel({1.0 - p0, p0}, {p1, 1.0 - p1});
}

HardSensingModel hard_from_soft(const SensingModel& model) {
  const int L = model.levels();
  HardSensingModel hard;
  for (int l = 0; l < L; ++l) {
    // Compare 2l against L-1 in integers so the midpoint test is exact.
    const int twice = 2 * l;
    const double m0 = model.mass(Hypothesis::H0, l);
    const double m1 = model.mass(Hypothesis::H1, l);
    if (twice == L - 1) {
      hard.p0 += 0.5 * m0;
      hard.p1 += 0.5 * m1;
    } else if (twice > L - 1) {
      hard.p0 += m0;
    } else {
      hard.p1 += m1;
    }
  }
  hard.p0 = std::min(1.0, hard.p0);
  hard.p1 = std::min(1.0, hard.p1);
  return hard;
}

int sample_level(std::span<const double> mass, RandomStream& rng) {
  const double u = uniform01(rng);
  double cdf = 0.0;
  const int last = static_cast<int>(mass.size()) - 1;
  for (int l = 0; l < last; ++l) {
    cdf += mass[static_cast<std::size_t>(l)];
    if (u < cdf) return l;
  }
  // Guard against the accumulated cdf falling just short of 1: return the
  // last level carrying mass.
  for (int l = last; l > 0; --l) {
    if (mass[static_cast<std::size_t>(l)] > 0.0) return l;
  }
  return 0;
}

std::vector<double> sample_sensing(const SensingModel& model, Hypothesis h, int sensors,
                                   RandomStream& rng) {
  std::vector<double> values;
  if (sensors <= 0) return values;
  values.reserve(static_cast<std::size_t>(sensors));
  const auto mass = model.mass(h);
  for (int m = 0; m < sensors; ++m) values.push_back(model.grid_value(sample_level(mass, rng)));
  return values;
}

SumSensingPMF::SumSensingPMF(int levels, int sensors, std::vector<double> g0,
                             std::vector<double> g1)
    : levels_(levels), sensors_(sensors), g0_(std::move(g0)), g1_(std::move(g1)) {
  const auto expected = static_cast<std::size_t>(sensors) * static_cast<std::size_t>(levels - 1) + 1;
  if (levels < 2 || sensors < 1 || g0_.size() != expected || g1_.size() != expected) {
    throw std::invalid_argument("SumSensingPMF: support must have M(L-1)+1 points");
  }
}

bool SumSensingPMF::has_monotone_likelihood_ratio() const { return ratio_condition(g0_, g1_); }

SumSensingPMF sum_pmf(const SensingModel& model, int sensors) {
  if (sensors < 1) throw std::invalid_argument("sum_pmf: M must be at least 1");
  auto g0 = std::vector<double>(model.mass(Hypothesis::H0).begin(), model.mass(Hypothesis::H0).end());
  auto g1 = std::vector<double>(model.mass(Hypothesis::H1).begin(), model.mass(Hypothesis::H1).end());
  std::vector<double> G0 = g0;
  std::vector<double> G1 = g1;
  for (int m = 1; m < sensors; ++m) {
    G0 = convolve(G0, g0);
    G1 = convolve(G1, g1);
  }
  return SumSensingPMF(model.levels(), sensors, std::move(G0), std::move(G1));
}

}  // namespace mcfusion
