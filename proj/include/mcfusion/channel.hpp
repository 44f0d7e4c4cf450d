#pragma once

#include <vector>

namespace mcfusion {

/// Point transmitter at distance r1 from the center of an absorbing
/// spherical receiver of radius r2 (SI units).
struct DiffusionGeometry {
  double r1 = 0.0;
  double r2 = 0.0;
  double diffusion = 0.0;  // m^2/s
  double slot = 0.0;       // s
  int cir_length = 0;      // last tap index kMax

  void validate() const;
};

/// h_0..h_kMax: probability that a molecule released at the start of a
/// slot is absorbed during the k-th following slot.
std::vector<double> hitting_probabilities(const DiffusionGeometry& geom);

/// Smallest kMax whose untruncated remainder of the D -> infinity cap r2/r1
/// falls below 1e-6 of the captured gain, capped at 10^4 taps.
int default_cir_length(DiffusionGeometry geom);

/// Reporting-channel parameters shared by all sensors.
class ChannelParams {
 public:
  /// Single-tap channel with per-slot gain A (h = {1}, Amax = A).
  static ChannelParams from_gain(double gain, double noise, int slots, int sensors);
  /// Multi-tap channel; A = Amax * sum(h).
  static ChannelParams from_cir(std::vector<double> cir, double max_release, double noise,
                                int slots, int sensors);

  double gain() const { return gain_; }
  double noise() const { return noise_; }
  int slots() const { return slots_; }
  int sensors() const { return sensors_; }
  double max_release() const { return max_release_; }
  const std::vector<double>& cir() const { return cir_; }
  int cir_length() const { return static_cast<int>(cir_.size()) - 1; }
  double snr() const { return gain_ / noise_; }

  /// Copies with one parameter replaced. with_gain rescales Amax so the
  /// CIR shape is kept.
  ChannelParams with_gain(double gain) const;
  ChannelParams with_noise(double noise) const;
  ChannelParams with_slots(int slots) const;
  ChannelParams with_sensors(int sensors) const;

 private:
  ChannelParams(std::vector<double> cir, double max_release, double noise, int slots, int sensors);

  std::vector<double> cir_;
  double max_release_;
  double gain_;
  double noise_;
  int slots_;
  int sensors_;
};

/// Per-slot Poisson mean x*A + J once the CIR has saturated.
double steady_mean(double x, const ChannelParams& params);

/// Per-slot means for slots n = 1..N while the CIR builds up:
/// J + x * Amax * sum_{k <= min(n-1, kMax)} h_k.
std::vector<double> transient_means(double x, const ChannelParams& params);

}  // namespace mcfusion
