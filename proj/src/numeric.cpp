#include "mcfusion/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace mcfusion {

namespace {

constexpr double kInversionLimit = 30.0;

}  // namespace

double log_sum_exp(std::span<const double> terms) {
  double peak = -kInf;
  for (double t : terms) peak = std::max(peak, t);
  if (peak == -kInf) return -kInf;
  if (peak == kInf) return kInf;
  double acc = 0.0;
  for (double t : terms) {
    if (t != -kInf) acc += std::exp(t - peak);
  }
  return peak + std::log(acc);
}

double poisson_log_pmf(std::int64_t k, double mean) {
  if (k < 0) return -kInf;
  if (mean == 0.0) return k == 0 ? 0.0 : -kInf;
  const double kd = static_cast<double>(k);
  return kd * std::log(mean) - mean - std::lgamma(kd + 1.0);
}

double poisson_pmf(std::int64_t k, double mean) {
  return std::exp(poisson_log_pmf(k, mean));
}

double poisson_tail(std::int64_t x, double mean) {
  if (mean < 0.0 || std::isnan(mean)) {
    throw std::invalid_argument("poisson_tail: mean must be nonnegative");
  }
  if (x < 0) return 1.0;
  if (mean == 0.0) return 0.0;
  // P(X > x) = P(X >= x + 1) = regularized lower incomplete gamma P(x + 1, mean).
  return boost::math::gamma_p(static_cast<double>(x) + 1.0, mean);
}

double poisson_cdf(std::int64_t x, double mean) {
  if (mean < 0.0 || std::isnan(mean)) {
    throw std::invalid_argument("poisson_cdf: mean must be nonnegative");
  }
  if (x < 0) return 0.0;
  if (mean == 0.0) return 1.0;
  return boost::math::gamma_q(static_cast<double>(x) + 1.0, mean);
}

std::int64_t poisson_upper_quantile(double mean, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::invalid_argument("poisson_upper_quantile: eps must lie in (0, 1)");
  }
  if (mean == 0.0) return 0;
  // Exponential search for an upper bracket, then bisection on the
  // monotone tail.
  std::int64_t lo = -1;
  std::int64_t hi = static_cast<std::int64_t>(std::ceil(mean));
  while (poisson_tail(hi, mean) > eps) {
    lo = hi;
    hi = 2 * hi + 1;
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (poisson_tail(mid, mean) > eps) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

std::int64_t sample_poisson(double mean, RandomStream& rng) {
  if (mean <= 0.0) return 0;
  if (mean < kInversionLimit) {
    // Sequential search through the CDF.
    const double u = uniform01(rng);
    double term = std::exp(-mean);
    double cdf = term;
    std::int64_t k = 0;
    while (u >= cdf) {
      ++k;
      term *= mean / static_cast<double>(k);
      const double next = cdf + term;
      if (next == cdf) break;  // remaining mass below double resolution
      cdf = next;
    }
    return k;
  }
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

}  // namespace mcfusion
