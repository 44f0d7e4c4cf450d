#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mcfusion/numeric.hpp"

namespace mcfusion {

enum class Hypothesis { H0 = 0, H1 = 1 };

/// Quantized sensed-value distributions under both hypotheses. Level l
/// corresponds to the sensed value l / (L - 1).
class SensingModel {
 public:
  /// Masses are validated (nonnegative, each summing to 1 within 1e-9)
  /// and renormalized. Both vectors must have the same length L >= 2.
  SensingModel(std::vector<double> g0, std::vector<double> g1);

  int levels() const { return static_cast<int>(g0_.size()); }
  double grid_value(int level) const;
  std::span<const double> grid() const { return grid_; }
  std::span<const double> mass(Hypothesis h) const {
    return h == Hypothesis::H0 ? std::span<const double>(g0_) : std::span<const double>(g1_);
  }
  double mass(Hypothesis h, int level) const { return mass(h)[static_cast<std::size_t>(level)]; }

  /// g1(x)/g1(x') >= g0(x)/g0(x') for every pair of grid points x > x'.
  /// This is the monotone-likelihood-ratio condition under which the
  /// optimal per-sensor LLR is nondecreasing in the received count.
  bool has_monotone_likelihood_ratio() const;

 private:
  std::vector<double> grid_;
  std::vector<double> g0_;
  std::vector<double> g1_;
};

/// g_i(x) proportional to exp(b_i x) on the L-point grid.
SensingModel make_soft_model(int levels, double b0, double b1);

/// g0 = delta at 0, g1 = delta at 1 on an L-point grid.
SensingModel make_ideal_model(int levels = 2);

/// Per-sensor false-alarm (p0) and missed-detection (p1) probabilities of
/// a hard-decision (L = 2) sensor.
struct HardSensingModel {
  double p0 = 0.0;
  double p1 = 0.0;

  void validate() const;
  SensingModel to_model() const;
};

/// Hard model matched to a soft one: mass above 0.5 (plus half the mass at
/// 0.5 when 0.5 is a grid point) maps to a local alarm.
HardSensingModel hard_from_soft(const SensingModel& model);

/// Draws M i.i.d. sensed values under the given hypothesis. M == 0 yields
/// an empty vector.
std::vector<double> sample_sensing(const SensingModel& model, Hypothesis h, int sensors,
                                   RandomStream& rng);

/// Level index variant of sample_sensing; draws one level by inversion.
int sample_level(std::span<const double> mass, RandomStream& rng);

/// Distribution of the sum of M i.i.d. sensed values. Entry l holds the
/// probability that the sum equals l / (L - 1), l = 0..M(L-1).
class SumSensingPMF {
 public:
  SumSensingPMF(int levels, int sensors, std::vector<double> g0, std::vector<double> g1);

  int levels() const { return levels_; }
  int sensors() const { return sensors_; }
  std::size_t size() const { return g0_.size(); }
  double grid_value(std::size_t index) const {
    return static_cast<double>(index) / static_cast<double>(levels_ - 1);
  }
  std::span<const double> mass(Hypothesis h) const {
    return h == Hypothesis::H0 ? std::span<const double>(g0_) : std::span<const double>(g1_);
  }

  /// Ratio condition on the sum distribution (the STM analogue of
  /// SensingModel::has_monotone_likelihood_ratio).
  bool has_monotone_likelihood_ratio() const;

 private:
  int levels_;
  int sensors_;
  std::vector<double> g0_;
  std::vector<double> g1_;
};

/// M-fold self-convolution of g0 and g1 on the lattice of spacing 1/(L-1).
SumSensingPMF sum_pmf(const SensingModel& model, int sensors);

}  // namespace mcfusion
