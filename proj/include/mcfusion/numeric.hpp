#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>

namespace mcfusion {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Random stream used everywhere a sample is drawn. The engine is fully
/// specified by the standard, so seeded runs are portable.
using RandomStream = std::mt19937_64;

/// Uniform draw on [0, 1) from the top 53 bits of one engine output.
inline double uniform01(RandomStream& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// log(sum(exp(terms))). Terms equal to -inf are skipped; an empty or
/// all -inf input yields -inf.
double log_sum_exp(std::span<const double> terms);

/// log P(Poisson(mean) = k). mean == 0 is the point mass at zero.
double poisson_log_pmf(std::int64_t k, double mean);
double poisson_pmf(std::int64_t k, double mean);

/// H(x, mean) = P(Poisson(mean) > x). H(x, mean) = 1 for x < 0.
double poisson_tail(std::int64_t x, double mean);

/// P(Poisson(mean) <= x), evaluated on the complementary branch so that
/// small lower tails keep their relative accuracy.
double poisson_cdf(std::int64_t x, double mean);

/// Smallest w >= 0 with P(Poisson(mean) > w) <= eps.
std::int64_t poisson_upper_quantile(double mean, double eps);

/// Exact Poisson variate: inversion for small means, the standard
/// library's rejection sampler above.
std::int64_t sample_poisson(double mean, RandomStream& rng);

}  // namespace mcfusion
