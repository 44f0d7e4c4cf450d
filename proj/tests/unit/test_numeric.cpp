#include <cmath>
#include <vector>

#include "doctest.h"
#include "mcfusion/numeric.hpp"
#include "oracles.hpp"

using namespace mcfusion;

TEST_CASE("log_sum_exp handles empty, infinite and large inputs") {
  CHECK(log_sum_exp(std::vector<double>{}) == -kInf);
  CHECK(log_sum_exp(std::vector<double>{-kInf, -kInf}) == -kInf);
  CHECK(log_sum_exp(std::vector<double>{1000.0, 1000.0}) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(log_sum_exp(std::vector<double>{-1000.0, -kInf}) == -1000.0);
  CHECK(log_sum_exp(std::vector<double>{kInf, 0.0}) == kInf);
  CHECK(log_sum_exp(std::vector<double>{0.0, std::log(3.0)}) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("poisson_tail edge cases") {
  for (double mean : {0.3, 4.0, 19.0}) CHECK(poisson_tail(0, mean) == doctest::Approx(-std::expm1(-mean)));
  CHECK(poisson_tail(0, 0.0) == 0.0);
  CHECK(poisson_tail(7, 0.0) == 0.0);
  CHECK(poisson_tail(-1, 5.0) == 1.0);
  CHECK(poisson_tail(-1, 0.0) == 1.0);
  CHECK_THROWS(poisson_tail(3, -1.0));
}

TEST_CASE("poisson_tail matches direct upper sums to 1e-12 relative") {
  for (double mean : {0.5, 4.0, 19.0, 100.0}) {
    for (std::int64_t x = 0; x <= static_cast<std::int64_t>(3 * mean + 20); x += 3) {
      const double expected = static_cast<double>(oracle::poisson_upper_sum(x, mean));
      if (expected < 1e-280) continue;
      CHECK(std::abs(poisson_tail(x, mean) - expected) <= 1e-12 * expected);
    }
  }
}

TEST_CASE("poisson_cdf complements poisson_tail and keeps small lower tails") {
  for (double mean : {2.0, 30.0}) {
    for (std::int64_t x = 0; x < 60; ++x) {
      CHECK(poisson_cdf(x, mean) + poisson_tail(x, mean) == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
  const double lower = poisson_cdf(5, 100.0);
  const double expected = static_cast<double>(1 - oracle::poisson_upper_sum(5, 100.0L));
  CHECK(lower > 0.0);
  long double direct = 0;
  for (int k = 0; k <= 5; ++k) direct += oracle::poisson_pmf(k, 100.0L);
  CHECK(std::abs(lower - static_cast<double>(direct)) <= 1e-12 * static_cast<double>(direct));
  (void)expected;
}

TEST_CASE("poisson pmf agrees with the product form") {
  for (double mean : {0.0, 0.7, 12.0, 250.0}) {
    for (std::int64_t k = 0; k < 400; k += 7) {
      const double expected = static_cast<double>(oracle::poisson_pmf(k, mean));
      CHECK(poisson_pmf(k, mean) == doctest::Approx(expected).epsilon(1e-11));
    }
  }
  CHECK(poisson_log_pmf(0, 0.0) == 0.0);
  CHECK(poisson_log_pmf(2, 0.0) == -kInf);
}

TEST_CASE("poisson_upper_quantile is the smallest w with tail <= eps") {
  for (double mean : {0.0, 0.2, 4.0, 57.5, 1000.0}) {
    for (double eps : {1e-3, 1e-12, 1e-30}) {
      const auto w = poisson_upper_quantile(mean, eps);
      CHECK(poisson_tail(w, mean) <= eps);
      if (w > 0) CHECK(poisson_tail(w - 1, mean) > eps);
    }
  }
}

TEST_CASE("sample_poisson reproduces the mean and variance on both branches") {
  RandomStream rng(7);
  for (double mean : {0.0, 3.5, 29.0, 50.0, 400.0}) {
    const int n = 200000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = static_cast<double>(sample_poisson(mean, rng));
      CHECK(v >= 0.0);
      sum += v;
      sq += v * v;
    }
    const double m = sum / n;
    const double var = sq / n - m * m;
    CHECK(std::abs(m - mean) <= 3.0 * std::sqrt(mean / n) + 1e-12);
    // Variance of the sample variance of a Poisson: (mean + 2 mean^2) / n.
    CHECK(std::abs(var - mean) <= 3.0 * std::sqrt((mean + 2 * mean * mean) / n) + 1e-12);
  }
}

TEST_CASE("uniform01 stays in [0, 1)") {
  RandomStream rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform01(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
