#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mcfusion/analysis.hpp"
#include "mcfusion/channel.hpp"
#include "mcfusion/detectors.hpp"
#include "mcfusion/numeric.hpp"
#include "mcfusion/scenario.hpp"
#include "mcfusion/sensing.hpp"

namespace mcfusion {

struct SimConfig {
  std::int64_t trials = 1'000'000;
  std::uint64_t seed = 0;
  ChannelMode mode = ChannelMode::SteadyState;
  /// Worker threads; 0 means one per hardware thread. Results do not
  /// depend on this value.
  int threads = 1;
  /// Trials per random substream. Part of the reproducibility contract:
  /// changing it changes the sampled values.
  std::int64_t block_size = 4096;

  void validate() const;
};

struct SimResult {
  DetectorSpec spec;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  std::int64_t false_alarms = 0;  // decisions for H1 among H0 trials
  std::int64_t misses = 0;        // decisions for H0 among H1 trials
  double pfa_hat = 0.0;
  double pm_hat = 0.0;
  /// 3-sigma binomial half-widths, 3 sqrt(p(1-p)/n) at the estimate.
  double pfa_half_width = 0.0;
  double pm_half_width = 0.0;

  double ci_half_width() const { return pfa_half_width > pm_half_width ? pfa_half_width : pm_half_width; }
  PerfPoint as_perf() const;
};

/// 3 sqrt(p(1-p)/n).
double binomial_half_width(double p, std::int64_t trials);

/// One observation under hypothesis h: sensed values drawn from g_h, then
/// Poisson counts over N slots. STM slots see the sum of the sensor
/// contributions plus a single noise term J.
ObservationBatch sample_observation(Hypothesis h, const SensingModel& model, const ChannelParams& params,
                                    Scheme scheme, ChannelMode mode, RandomStream& rng);

/// Substream for one block of trials under one hypothesis and scheme.
RandomStream block_stream(std::uint64_t seed, Hypothesis h, Scheme scheme, std::int64_t block);

/// Simulates every detector in `specs` on common random numbers: all
/// specs of the same scheme see the same observations. Results follow the
/// order of `specs`.
std::vector<SimResult> estimate_perf(std::span<const DetectorSpec> specs, const SensingModel& model,
                                     const ChannelParams& params, const SimConfig& config);
SimResult estimate_perf(const DetectorSpec& spec, const SensingModel& model, const ChannelParams& params,
                        const SimConfig& config);

/// One row of a parameter sweep.
struct SweepRow {
  double axis_value = 0.0;
  Calibration calibration;
  SimResult simulated;
};

/// For each axis value, recalibrates every detector to target_pfa
/// analytically and simulates the calibrated rule. Rows come out grouped
/// by axis value, detectors in the given order. Infeasible calibrations
/// stay in the output with calibration.feasible == false. The channel
/// mode is taken from the scenario, not from config.
std::vector<SweepRow> sweep(Axis axis, std::span<const double> values, const Scenario& scenario,
                            std::span<const DetectorKind> detectors, double target_pfa, const SimConfig& config,
                            const AnalysisOptions& options = {});

}  // namespace mcfusion
