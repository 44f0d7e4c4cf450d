#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mcfusion/channel.hpp"
#include "mcfusion/sensing.hpp"

namespace mcfusion {

/// DTM: one molecule type per sensor, so counts are attributable.
/// STM: a shared molecule type, so only the per-slot total is observed.
enum class Scheme { DTM, STM };

enum class DetectorKind { OptDTM, OptSTM, MaxLog, MRC, CV, TwoStage };

std::string_view to_string(Scheme scheme);
std::string_view to_string(DetectorKind kind);
std::optional<DetectorKind> parse_detector_kind(std::string_view name);
Scheme scheme_of(DetectorKind kind);

/// True for detectors that threshold a sum of per-sensor LLR values.
bool is_llr_sum_detector(DetectorKind kind);

/// Molecule counts seen by the fusion center over N slots.
class ObservationBatch {
 public:
  /// counts is row-major: counts[m * N + n] for sensor m and slot n.
  static ObservationBatch dtm(int sensors, int slots, std::vector<std::int64_t> counts);
  static ObservationBatch stm(std::vector<std::int64_t> counts);

  Scheme scheme() const { return scheme_; }
  int sensors() const { return sensors_; }
  int slots() const { return slots_; }
  std::int64_t count(int sensor, int slot) const;
  /// sigma^{m}: total over slots for one sensor (DTM only).
  std::int64_t sensor_sum(int sensor) const;
  std::span<const std::int64_t> sensor_sums() const { return sums_; }
  /// Total over every slot (and sensor, for DTM).
  std::int64_t total() const { return total_; }

 private:
  ObservationBatch(Scheme scheme, int sensors, int slots, std::vector<std::int64_t> counts);

  Scheme scheme_;
  int sensors_;
  int slots_;
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> sums_;
  std::int64_t total_ = 0;
};

/// A decision statistic and its threshold(s). For MRC and OptSTM the
/// threshold is an integer molecule count (or +/-inf); for the LLR-sum
/// detectors it is a real LLR threshold. TwoStage uses the local/global
/// pair instead.
struct DetectorSpec {
  DetectorKind kind = DetectorKind::OptDTM;
  double threshold = 0.0;
  std::int64_t local_threshold = 0;
  std::int64_t global_threshold = 0;

  void validate(int sensors) const;
};

/// Optimal per-sensor LLR as a function of sigma = sum_n y_n, evaluated
/// as a difference of log-sum-exp reductions.
double llr_opt_dtm_sensor(std::int64_t sigma, const SensingModel& model, const ChannelParams& params);
double llr_opt_dtm_total(const ObservationBatch& batch, const SensingModel& model,
                         const ChannelParams& params);
double llr_maxlog_sensor(std::int64_t sigma, const SensingModel& model, const ChannelParams& params);
/// -N A + sigma log(1 + A/J). Requires J > 0.
double llr_mrc(std::int64_t sigma, const ChannelParams& params);

/// Grid value maximizing the Poisson likelihood of sigma; ties go to the
/// smallest value.
double cv_estimate(std::int64_t sigma, const ChannelParams& params, std::span<const double> grid);
int cv_estimate_level(std::int64_t sigma, const ChannelParams& params, std::span<const double> grid);
/// log(g1(x)/g0(x)) at the CV estimate. A zero mass maps to a +/-inf
/// sentinel; zero mass under both hypotheses maps to 0.
double llr_cv(std::int64_t sigma, const SensingModel& model, const ChannelParams& params);

/// Optimal STM LLR of the total count over the sum-of-sensed-values PMF.
double llr_stm(std::int64_t sigma_total, const SumSensingPMF& sum, const ChannelParams& params);

/// 1 iff statistic > threshold. Ties and NaN (conflicting infinite
/// evidence) decide H0.
int decide(double statistic, double threshold);
int decide_mrc(const ObservationBatch& batch, double count_threshold);
int decide_stm_sum(const ObservationBatch& batch, double count_threshold);
int decide_two_stage(const ObservationBatch& batch, std::int64_t local_threshold,
                     std::int64_t global_threshold);

/// Sum of per-sensor LLR values in sensor order; +inf and -inf together
/// give NaN, which decide() maps to H0.
double sum_llr(std::span<const double> values);

/// Per-sensor statistic of an LLR-sum detector (OptDTM, MaxLog, MRC or CV)
/// with a lookup table for sigma below table_size. Values are bitwise
/// identical to the direct functions.
class PerSensorLlr {
 public:
  PerSensorLlr(DetectorKind kind, SensingModel model, ChannelParams params,
               std::int64_t table_size = 0);

  double operator()(std::int64_t sigma) const;
  DetectorKind kind() const { return kind_; }
  const SensingModel& model() const { return model_; }
  const ChannelParams& params() const { return params_; }

 private:
  double evaluate(std::int64_t sigma) const;

  DetectorKind kind_;
  SensingModel model_;
  ChannelParams params_;
  std::vector<double> table_;
};

/// Applies a detector to a batch. LLR-sum detectors need `llr`, built for
/// the same kind.
int apply_detector(const DetectorSpec& spec, const ObservationBatch& batch, const PerSensorLlr* llr);

}  // namespace mcfusion
