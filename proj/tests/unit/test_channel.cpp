#include <cmath>
#include <numeric>

#include "doctest.h"
#include "mcfusion/channel.hpp"

using namespace mcfusion;

TEST_CASE("hitting probabilities: r1 = r2 absorbs everything in the first slot") {
  const auto h = hitting_probabilities({1e-6, 1e-6, 1e-9, 100e-6, 5});
  REQUIRE(h.size() == 6u);
  CHECK(h[0] == 1.0);
  for (std::size_t k = 1; k < h.size(); ++k) CHECK(h[k] == 0.0);
}

TEST_CASE("hitting probabilities: large D approaches r2/r1") {
  const auto h = hitting_probabilities({2e-6, 1e-6, 1e3, 100e-6, 2});
  CHECK(h[0] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("hitting probabilities: partial sums telescope to the erfc closed form") {
  const DiffusionGeometry g{2e-6, 1e-6, 1e-9, 100e-6, 40};
  const auto h = hitting_probabilities(g);
  double partial = 0.0;
  for (int k = 0; k <= g.cir_length; ++k) {
    CHECK(h[static_cast<std::size_t>(k)] >= 0.0);
    partial += h[static_cast<std::size_t>(k)];
    const double closed = (g.r2 / g.r1) * std::erfc((g.r1 - g.r2) / std::sqrt(4.0 * g.diffusion * (k + 1) * g.slot));
    CHECK(std::abs(partial - closed) <= 1e-12);
  }
  CHECK(partial <= g.r2 / g.r1);
}

TEST_CASE("geometry validation") {
  CHECK_THROWS(hitting_probabilities({0.5e-6, 1e-6, 1e-9, 1e-4, 3}));
  CHECK_THROWS(hitting_probabilities({2e-6, 1e-6, 0.0, 1e-4, 3}));
  CHECK_THROWS(hitting_probabilities({2e-6, 1e-6, 1e-9, 1e-4, -1}));
}

TEST_CASE("default CIR length meets the residual rule or hits the cap") {
  const DiffusionGeometry fast{1.2e-6, 1e-6, 1e-6, 100e-6, 0};
  const int k = default_cir_length(fast);
  const double cap = fast.r2 / fast.r1;
  auto captured = [&](int taps) {
    return cap * std::erfc((fast.r1 - fast.r2) / std::sqrt(4.0 * fast.diffusion * (taps + 1) * fast.slot));
  };
  CHECK(k <= 10000);
  if (k < 10000) {
    CHECK(cap - captured(k) < 1e-6 * captured(k));
    if (k > 0) CHECK(cap - captured(k - 1) >= 1e-6 * captured(k - 1));
  }
  // Slow diffusion never reaches the rule within the cap.
  CHECK(default_cir_length({2e-6, 1e-6, 1e-12, 100e-6, 0}) == 10000);
}

TEST_CASE("steady_mean examples") {
  CHECK(steady_mean(0.0, ChannelParams::from_gain(15, 4, 1, 2)) == 4.0);
  CHECK(steady_mean(1.0, ChannelParams::from_gain(15, 4, 1, 2)) == 19.0);
  CHECK(steady_mean(0.5, ChannelParams::from_gain(6, 4, 1, 2)) == 7.0);
}

TEST_CASE("transient_means examples and saturation") {
  const auto single = ChannelParams::from_gain(6, 4, 5, 1);
  for (double m : transient_means(0.7, single)) CHECK(m == steady_mean(0.7, single));

  const auto two = ChannelParams::from_cir({0.6, 0.2}, 10, 1, 4, 1);
  const auto means = transient_means(1.0, two);
  REQUIRE(means.size() == 4u);
  CHECK(means[0] == doctest::Approx(7.0));
  CHECK(means[1] == doctest::Approx(9.0));
  CHECK(means[2] == doctest::Approx(9.0));
  CHECK(means[3] == steady_mean(1.0, two));
  for (double m : transient_means(0.0, two)) CHECK(m == 1.0);

  const auto geo = ChannelParams::from_cir(hitting_probabilities({2e-6, 1e-6, 1e-9, 100e-6, 6}), 500, 2, 10, 1);
  const auto t = transient_means(0.8, geo);
  for (std::size_t n = 1; n < t.size(); ++n) CHECK(t[n] >= t[n - 1]);
  for (std::size_t n = 7; n < t.size(); ++n) CHECK(t[n] == steady_mean(0.8, geo));
}

TEST_CASE("ChannelParams invariants and copies") {
  const auto p = ChannelParams::from_cir({0.3, 0.1}, 50, 4, 2, 3);
  CHECK(p.gain() == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(p.snr() == doctest::Approx(5.0));
  const auto q = p.with_gain(10.0);
  CHECK(q.gain() == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(q.max_release() == doctest::Approx(25.0));
  CHECK(q.cir() == p.cir());
  CHECK(p.with_noise(1.0).noise() == 1.0);
  CHECK(p.with_slots(7).slots() == 7);
  CHECK(p.with_sensors(5).sensors() == 5);
  CHECK_THROWS(ChannelParams::from_cir({0.8, 0.5}, 10, 1, 1, 1));
  CHECK_THROWS(ChannelParams::from_gain(5, -1, 1, 1));
  CHECK_THROWS(ChannelParams::from_gain(5, 1, 0, 1));
}
