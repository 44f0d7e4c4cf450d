#include <cmath>
#include <numeric>

#include "doctest.h"
#include "mcfusion/sensing.hpp"
#include "oracles.hpp"

using namespace mcfusion;

namespace {

double total(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("make_soft_model examples") {
  const auto flat = make_soft_model(2, 0.0, 0.0);
  CHECK(flat.mass(Hypothesis::H0, 0) == doctest::Approx(0.5));
  CHECK(flat.mass(Hypothesis::H1, 1) == doctest::Approx(0.5));

  const auto same = make_soft_model(3, -1.0, -1.0);
  for (int l = 0; l < 3; ++l) CHECK(same.mass(Hypothesis::H0, l) == same.mass(Hypothesis::H1, l));

  const auto m = make_soft_model(4, -2.5, 3.5);
  const auto ref = oracle::soft(4, -2.5L, 3.5L);
  for (int l = 0; l < 4; ++l) {
    CHECK(m.mass(Hypothesis::H0, l) == doctest::Approx(static_cast<double>(ref.g0[l])).epsilon(1e-14));
    CHECK(m.mass(Hypothesis::H1, l) == doctest::Approx(static_cast<double>(ref.g1[l])).epsilon(1e-14));
    CHECK(m.grid_value(l) == doctest::Approx(l / 3.0));
  }
  CHECK(std::abs(total(m.mass(Hypothesis::H0)) - 1.0) <= 1e-12);
  CHECK(std::abs(total(m.mass(Hypothesis::H1)) - 1.0) <= 1e-12);
  CHECK(m.grid().front() == 0.0);
  CHECK(m.grid().back() == 1.0);
  CHECK(m.has_monotone_likelihood_ratio());
  CHECK_THROWS(make_soft_model(1, 0.0, 0.0));
}

TEST_CASE("SensingModel validation") {
  CHECK_THROWS(SensingModel({0.5, 0.6}, {0.5, 0.5}));
  CHECK_THROWS(SensingModel({-0.1, 1.1}, {0.5, 0.5}));
  CHECK_THROWS(SensingModel({0.5, 0.5}, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
  CHECK_THROWS(SensingModel({1.0}, {1.0}));
  CHECK_FALSE(SensingModel({0.2, 0.8}, {0.8, 0.2}).has_monotone_likelihood_ratio());
}

TEST_CASE("hard_from_soft examples") {
  const auto ideal = hard_from_soft(make_ideal_model(2));
  CHECK(ideal.p0 == 0.0);
  CHECK(ideal.p1 == 0.0);
  CHECK(hard_from_soft(make_soft_model(2, 0.0, 0.0)).p0 == doctest::Approx(0.5));

  const auto ref = oracle::soft(4, -2.5L, 3.5L);
  const auto h = hard_from_soft(make_soft_model(4, -2.5, 3.5));
  // Even L: 0.5 is not a grid point; levels 2, 3 lie above it.
  CHECK(h.p0 == doctest::Approx(static_cast<double>(ref.g0[2] + ref.g0[3])).epsilon(1e-14));
  CHECK(h.p1 == doctest::Approx(static_cast<double>(ref.g1[0] + ref.g1[1])).epsilon(1e-14));

  // Odd L: half the mass at 0.5 counts.
  const auto odd = make_soft_model(3, -1.0, 2.0);
  const auto ho = hard_from_soft(odd);
  CHECK(ho.p0 == doctest::Approx(0.5 * odd.mass(Hypothesis::H0, 1) + odd.mass(Hypothesis::H0, 2)));
  CHECK(ho.p1 == doctest::Approx(0.5 * odd.mass(Hypothesis::H1, 1) + odd.mass(Hypothesis::H1, 0)));

  const auto model = HardSensingModel{0.1, 0.2}.to_model();
  CHECK(model.mass(Hypothesis::H0, 1) == doctest::Approx(0.1));
  CHECK(model.mass(Hypothesis::H1, 0) == doctest::Approx(0.2));
  CHECK_THROWS(HardSensingModel{1.2, 0.0}.validate());
}

TEST_CASE("sample_sensing") {
  RandomStream rng(11);
  for (double v : sample_sensing(make_ideal_model(3), Hypothesis::H0, 50, rng)) CHECK(v == 0.0);
  CHECK(sample_sensing(make_ideal_model(), Hypothesis::H1, 0, rng).empty());

  const SensingModel m({0.9, 0.1}, {0.5, 0.5});
  const int n = 1000000;
  int ones = 0;
  for (double v : sample_sensing(m, Hypothesis::H0, n, rng)) ones += v == 1.0 ? 1 : 0;
  CHECK(std::abs(ones / static_cast<double>(n) - 0.1) <= 3.0 * std::sqrt(0.09 / n));

  RandomStream a(5);
  RandomStream b(5);
  CHECK(sample_sensing(m, Hypothesis::H1, 100, a) == sample_sensing(m, Hypothesis::H1, 100, b));
}

TEST_CASE("sum_pmf examples") {
  const auto m = make_soft_model(4, -2.5, 3.5);
  const auto one = sum_pmf(m, 1);
  for (int l = 0; l < 4; ++l) CHECK(one.mass(Hypothesis::H0)[static_cast<std::size_t>(l)] == m.mass(Hypothesis::H0, l));

  const double p0 = 0.15;
  const auto hard = sum_pmf(HardSensingModel{p0, 0.1}.to_model(), 2);
  CHECK(hard.size() == 3u);
  CHECK(hard.mass(Hypothesis::H0)[0] == doctest::Approx((1 - p0) * (1 - p0)));
  CHECK(hard.mass(Hypothesis::H0)[1] == doctest::Approx(2 * p0 * (1 - p0)));
  CHECK(hard.mass(Hypothesis::H0)[2] == doctest::Approx(p0 * p0));
}

TEST_CASE("sum_pmf matches exhaustive enumeration for L <= 4, M <= 4") {
  for (int L = 2; L <= 4; ++L) {
    for (int M = 1; M <= 4; ++M) {
      const auto model = make_soft_model(L, -1.3 * L, 0.7 * L);
      const auto ref = oracle::sum_distribution(oracle::soft(L, -1.3L * L, 0.7L * L), M);
      const auto sum = sum_pmf(model, M);
      REQUIRE(sum.size() == ref.first.size());
      for (std::size_t i = 0; i < sum.size(); ++i) {
        CHECK(std::abs(sum.mass(Hypothesis::H0)[i] - static_cast<double>(ref.first[i])) <= 1e-10);
        CHECK(std::abs(sum.mass(Hypothesis::H1)[i] - static_cast<double>(ref.second[i])) <= 1e-10);
      }
      CHECK(std::abs(total(sum.mass(Hypothesis::H0)) - 1.0) <= 1e-10);
      CHECK(sum.grid_value(sum.size() - 1) == doctest::Approx(static_cast<double>(M)));
      CHECK(sum.has_monotone_likelihood_ratio());
    }
  }
}

TEST_CASE("ratio condition holds for every grid pair of the standard soft model") {
  const auto m = make_soft_model(4, -2.5, 3.5);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < a; ++b) {
      CHECK(m.mass(Hypothesis::H1, a) / m.mass(Hypothesis::H1, b) >=
            m.mass(Hypothesis::H0, a) / m.mass(Hypothesis::H0, b));
    }
  }
}
