#include "mcfusion/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mcfusion {

namespace {

constexpr int kMaxCirLength = 10'000;
constexpr double kTailFraction = 1e-6;

// (r2/r1) erfc((r1 - r2) / sqrt(4 D t)): probability of absorption by time t.
double absorbed_by(const DiffusionGeometry& g, double t) {
  return g.r2 / g.r1 * std::erfc((g.r1 - g.r2) / std::sqrt(4.0 * g.diffusion * t));
}

void check_common(double noise, int slots, int sensors) {
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw std::invalid_argument("ChannelParams: J must be finite and nonnegative");
  }
  if (slots < 1 || sensors < 1) throw std::invalid_argument("ChannelParams: N and M must be >= 1");
}

}  // namespace

void DiffusionGeometry::validate() const {
  if (!(r2 > 0.0)) throw std::invalid_argument("DiffusionGeometry: r2 must be positive");
  if (r1 < r2) throw std::invalid_argument("DiffusionGeometry: transmitter lies inside the receiver (r1 < r2)");
  if (!(diffusion > 0.0) || !(slot > 0.0)) {
    throw std::invalid_argument("DiffusionGeometry: D and T must be positive");
  }
  if (cir_length < 0) throw std::invalid_argument("DiffusionGeometry: kMax must be >= 0");
}

std::vector<double> hitting_probabilities(const DiffusionGeometry& geom) {
  geom.validate();
  std::vector<double> h(static_cast<std::size_t>(geom.cir_length) + 1);
  double previous = absorbed_by(geom, geom.slot);
  h[0] = previous;
  for (int k = 1; k <= geom.cir_length; ++k) {
    const double current = absorbed_by(geom, static_cast<double>(k + 1) * geom.slot);
    h[static_cast<std::size_t>(k)] = std::max(0.0, current - previous);
    previous = current;
  }
  return h;
}

int default_cir_length(DiffusionGeometry geom) {
  geom.cir_length = 0;
  geom.validate();
  const double cap = geom.r2 / geom.r1;
  for (int k = 0; k < kMaxCirLength; ++k) {
    const double captured = absorbed_by(geom, static_cast<double>(k + 1) * geom.slot);
    if (captured > 0.0 && cap - captured < kTailFraction * captured) return k;
  }
  return kMaxCirLength;
}

ChannelParams::ChannelParams(std::vector<double> cir, double max_release, double noise, int slots,
                             int sensors)
    : cir_(std::move(cir)),
      max_release_(max_release),
      gain_(0.0),
      noise_(noise),
      slots_(slots),
      sensors_(sensors) {
  check_common(noise, slots, sensors);
  if (cir_.empty()) throw std::invalid_argument("ChannelParams: CIR needs at least one tap");
  double total = 0.0;
  for (double h : cir_) {
    if (!(h >= 0.0 && h <= 1.0)) throw std::invalid_argument("ChannelParams: taps must lie in [0, 1]");
    total += h;
  }
  if (total > 1.0 + 1e-12) throw std::invalid_argument("ChannelParams: taps must sum to at most 1");
  if (!(max_release >= 0.0) || !std::isfinite(max_release)) {
    throw std::invalid_argument("ChannelParams: Amax must be finite and nonnegative");
  }
  gain_ = max_release_ * total;
}

ChannelParams ChannelParams::from_gain(double gain, double noise, int slots, int sensors) {
  return ChannelParams({1.0}, gain, noise, slots, sensors);
}

ChannelParams ChannelParams::from_cir(std::vector<double> cir, double max_release, double noise,
                                      int slots, int sensors) {
  return ChannelParams(std::move(cir), max_release, noise, slots, sensors);
}

ChannelParams ChannelParams::with_gain(double gain) const {
  const double total = std::accumulate(cir_.begin(), cir_.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("with_gain: CIR carries no mass");
  return ChannelParams(cir_, gain / total, noise_, slots_, sensors_);
}

ChannelParams ChannelParams::with_noise(double noise) const {
  return ChannelParams(cir_, max_release_, noise, slots_, sensors_);
}

ChannelParams ChannelParams::with_slots(int slots) const {
  return ChannelParams(cir_, max_release_, noise_, slots, sensors_);
}

ChannelParams ChannelParams::with_sensors(int sensors) const {
  return ChannelParams(cir_, max_release_, noise_, slots_, sensors);
}

double steady_mean(double x, const ChannelParams& params) {
  return x * params.gain() + params.noise();
}

std::vector<double> transient_means(double x, const ChannelParams& params) {
  std::vector<double> means(static_cast<std::size_t>(params.slots()));
  const auto& h = params.cir();
  double partial = 0.0;
  for (int n = 1; n <= params.slots(); ++n) {
    const auto k = static_cast<std::size_t>(n - 1);
    if (k < h.size()) partial += h[k];
    // Past kMax the mean is exactly the steady-state value.
    means[k] = k + 1 >= h.size() ? steady_mean(x, params)
                                 : params.noise() + x * params.max_release() * partial;
  }
  return means;
}

}  // namespace mcfusion
