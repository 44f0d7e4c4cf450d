#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mcfusion/channel.hpp"
#include "mcfusion/detectors.hpp"
#include "mcfusion/sensing.hpp"

namespace mcfusion {

enum class Method { Analytic, MonteCarlo, ChernoffBound };
std::string_view to_string(Method method);

/// One operating point of a detector.
struct PerfPoint {
  DetectorSpec spec;
  double pfa = 0.0;
  double pd = 0.0;
  Method method = Method::Analytic;
  /// Additive bound on the error of pfa and pd (truncation for analytic
  /// points, the 3-sigma half-width for Monte Carlo ones).
  double uncertainty = 0.0;

  double pm() const { return 1.0 - pd; }
};

/// PMF of sigma = sum of N slot counts from one sensor, truncated to
/// 0..W. tail() is the probability mass beyond W.
class CountPMF {
 public:
  CountPMF(std::vector<double> mass, double tail);

  std::int64_t max_count() const { return static_cast<std::int64_t>(mass_.size()) - 1; }
  std::size_t size() const { return mass_.size(); }
  std::span<const double> mass() const { return mass_; }
  double mass(std::int64_t w) const;
  double tail() const { return tail_; }
  double mean() const;

 private:
  std::vector<double> mass_;
  double tail_;
};

/// L_i(w) = sum_x g_i(x) Poisson(w; N(xA+J)), truncated at the smallest W
/// (at least min_max_count) whose mixture tail is <= eps.
CountPMF per_sensor_count_pmf(const SensingModel& model, const ChannelParams& params, Hypothesis h,
                              double eps, std::int64_t min_max_count = 0);

struct AnalysisOptions {
  double eps = 1e-12;            // per-sensor truncation of count PMFs
  int max_enumerated_sensors = 6;
  std::size_t max_threshold_atoms = 65'536;  // cap on enumerated LLR-total tuples
  std::size_t uniform_threshold_count = 512;
};

/// Exact Pfa/Pd of a decision rule sum_m llr(sigma_m) > gamma over M
/// independent sensors. The per-sensor LLR distribution is collapsed to
/// atoms (equal values merged), and the set of exceeding count vectors is
/// enumerated depth-first with bound-based pruning.
class LlrSumEngine {
 public:
  LlrSumEngine(std::span<const double> llr, const CountPMF& f0, const CountPMF& f1, int sensors);

  /// (Pfa, Pd) restricted to the truncated support.
  std::pair<double, double> probabilities(double gamma) const;
  double truncation_bound() const { return truncation_; }
  int sensors() const { return sensors_; }
  /// Range of finite total LLR values.
  double min_total() const;
  double max_total() const;
  std::size_t atom_count() const { return atoms_.size(); }
  /// Sorted distinct finite totals as computed by summing in sensor order,
  /// or nullopt when more than cap tuples would be needed.
  std::optional<std::vector<double>> achievable_totals(std::size_t cap) const;

 private:
  struct Atom {
    double llr;
    double p0;
    double p1;
  };

  void accumulate(int remaining, double partial, double w0, double w1, double gamma, double& pfa,
                  double& pd) const;

  std::vector<Atom> atoms_;  // finite LLR values, descending
  std::vector<double> prefix0_;
  std::vector<double> prefix1_;
  double finite0_ = 0.0, finite1_ = 0.0;
  double pos0_ = 0.0, pos1_ = 0.0;  // mass at +inf
  double truncation_ = 0.0;
  int sensors_;
};

/// Exact Pfa/Pd for the rule sum_m llr(sigma_m) > gamma, any per-sensor statistic.
PerfPoint exact_perf_llr_sum(const std::function<double(std::int64_t)>& llr, const SensingModel& model,
                             const ChannelParams& params, double gamma,
                             const AnalysisOptions& options = {});

/// STM sum rule sigma_total > gamma: sum_x G_i(x) H(gamma, NJ + xNA).
PerfPoint stm_perf_closed_form(const SumSensingPMF& sum, const ChannelParams& params, double gamma);
/// MRC total-count rule; the STM closed form with the noise scaled by M.
PerfPoint mrc_perf_closed_form(const SumSensingPMF& sum, const ChannelParams& params, double gamma);
/// Local count test followed by a (global+1)-out-of-M vote.
PerfPoint two_stage_perf(const SensingModel& model, const ChannelParams& params,
                         std::int64_t local_threshold, std::int64_t global_threshold);

struct Calibration {
  DetectorSpec spec;
  PerfPoint perf;
  /// False when only the never-alarm threshold meets the target.
  bool feasible = true;
};

/// Analytic evaluation of one detector kind for a fixed model and channel;
/// caches the structures shared across thresholds.
class DetectorAnalysis {
 public:
  DetectorAnalysis(DetectorKind kind, SensingModel model, ChannelParams params,
                   AnalysisOptions options = {});

  DetectorKind kind() const { return kind_; }
  PerfPoint evaluate(const DetectorSpec& spec) const;
  /// Threshold grid covering the whole ROC, from always-alarm to
  /// never-alarm.
  std::vector<DetectorSpec> default_thresholds() const;
  std::vector<PerfPoint> roc(std::span<const DetectorSpec> thresholds) const;
  Calibration calibrate(double target_pfa) const;
  /// Adjacent threshold with the next larger Pfa (one grid step looser).
  std::optional<DetectorSpec> looser_neighbor(const DetectorSpec& spec) const;
  const LlrSumEngine* engine() const { return engine_ ? &*engine_ : nullptr; }

 private:
  DetectorSpec with_threshold(double gamma) const;
  std::int64_t count_limit() const;

  DetectorKind kind_;
  SensingModel model_;
  ChannelParams params_;
  AnalysisOptions options_;
  std::optional<SumSensingPMF> sum_;
  std::optional<LlrSumEngine> engine_;
  std::optional<std::vector<double>> totals_;
  std::int64_t local_limit_ = 0;
};

/// PerfPoints sorted by Pfa.
std::vector<PerfPoint> roc_curve(DetectorKind kind, const SensingModel& model, const ChannelParams& params,
                                 std::span<const DetectorSpec> thresholds,
                                 const AnalysisOptions& options = {});

Calibration calibrate_threshold(DetectorKind kind, const SensingModel& model, const ChannelParams& params,
                                double target_pfa, const AnalysisOptions& options = {});

}  // namespace mcfusion
