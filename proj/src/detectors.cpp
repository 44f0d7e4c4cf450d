#include "mcfusion/detectors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mcfusion {

namespace {

constexpr std::array<std::pair<DetectorKind, std::string_view>, 6> kDetectorNames{{
    {DetectorKind::OptDTM, "OptDTM"},
    {DetectorKind::OptSTM, "OptSTM"},
    {DetectorKind::MaxLog, "MaxLog"},
    {DetectorKind::MRC, "MRC"},
    {DetectorKind::CV, "CV"},
    {DetectorKind::TwoStage, "TwoStage"},
}};

// -N mu + sigma log(mu): log of exp(-N mu) mu^sigma. A zero mean is the
// Poisson point mass at 0, so the kernel is 0 for sigma = 0 and -inf
// otherwise.
double poisson_kernel(std::int64_t sigma, double mean, int slots) {
  if (mean == 0.0) return sigma == 0 ? 0.0 : -kInf;
  return -static_cast<double>(slots) * mean + static_cast<double>(sigma) * std::log(mean);
}

double log_mass(double m) { return m > 0.0 ? std::log(m) : -kInf; }

// Difference of two log-likelihoods, mapping impossible observations to
// sentinels.
double llr_from_logs(double log1, double log0) {
  if (log1 == -kInf && log0 == -kInf) return 0.0;
  if (log0 == -kInf) return kInf;
  if (log1 == -kInf) return -kInf;
  return log1 - log0;
}

void require_nonnegative(std::int64_t sigma) {
  if (sigma < 0) throw std::invalid_argument("molecule counts must be nonnegative");
}

}  // namespace

std::string_view to_string(Scheme scheme) { return scheme == Scheme::DTM ? "DTM" : "STM"; }

std::string_view to_string(DetectorKind kind) {
  for (const auto& [k, name] : kDetectorNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<DetectorKind> parse_detector_kind(std::string_view name) {
  for (const auto& [k, n] : kDetectorNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

Scheme scheme_of(DetectorKind kind) {
  return kind == DetectorKind::OptSTM ? Scheme::STM : Scheme::DTM;
}

bool is_llr_sum_detector(DetectorKind kind) {
  return kind == DetectorKind::OptDTM || kind == DetectorKind::MaxLog || kind == DetectorKind::CV;
}

ObservationBatch::ObservationBatch(Scheme scheme, int sensors, int slots,
                                   std::vector<std::int64_t> counts)
    : scheme_(scheme), sensors_(sensors), slots_(slots), counts_(std::move(counts)) {
  if (sensors < 1 || slots < 1) throw std::invalid_argument("ObservationBatch: empty batch");
  if (counts_.size() != static_cast<std::size_t>(sensors) * static_cast<std::size_t>(slots)) {
    throw std::invalid_argument("ObservationBatch: count matrix has the wrong size");
  }
  sums_.assign(static_cast<std::size_t>(sensors), 0);
  for (int m = 0; m < sensors; ++m) {
    for (int n = 0; n < slots; ++n) {
      const auto c = counts_[static_cast<std::size_t>(m) * static_cast<std::size_t>(slots) + n];
      if (c < 0) throw std::invalid_argument("ObservationBatch: counts must be nonnegative");
      sums_[static_cast<std::size_t>(m)] += c;
    }
    total_ += sums_[static_cast<std::size_t>(m)];
  }
}

ObservationBatch ObservationBatch::dtm(int sensors, int slots, std::vector<std::int64_t> counts) {
  return ObservationBatch(Scheme::DTM, sensors, slots, std::move(counts));
}

ObservationBatch ObservationBatch::stm(std::vector<std::int64_t> counts) {
  const int slots = static_cast<int>(counts.size());
  return ObservationBatch(Scheme::STM, 1, slots, std::move(counts));
}

std::int64_t ObservationBatch::count(int sensor, int slot) const {
  if (sensor < 0 || sensor >= sensors_ || slot < 0 || slot >= slots_) {
    throw std::out_of_range("ObservationBatch::count");
  }
  return counts_[static_cast<std::size_t>(sensor) * static_cast<std::size_t>(slots_) + slot];
}

std::int64_t ObservationBatch::sensor_sum(int sensor) const {
  if (scheme_ != Scheme::DTM) throw std::logic_error("per-sensor sums exist only for DTM");
  return sums_.at(static_cast<std::size_t>(sensor));
}

void DetectorSpec::validate(int sensors) const {
  switch (kind) {
    case DetectorKind::TwoStage:
      if (global_threshold < 0 || global_threshold > sensors) {
        throw std::invalid_argument("TwoStage: global threshold must lie in [0, M]");
      }
      if (local_threshold < -1) throw std::invalid_argument("TwoStage: local threshold must be >= -1");
      break;
    case DetectorKind::MRC:
    case DetectorKind::OptSTM:
      if (std::isnan(threshold) || (std::isfinite(threshold) && threshold != std::floor(threshold))) {
        throw std::invalid_argument("count thresholds must be integers or +/-inf");
      }
      break;
    default:
      if (std::isnan(threshold)) throw std::invalid_argument("LLR threshold is NaN");
  }
}

double llr_opt_dtm_sensor(std::int64_t sigma, const SensingModel& model, const ChannelParams& params) {
  require_nonnegative(sigma);
  const int L = model.levels();
  std::vector<double> t0(static_cast<std::size_t>(L));
  std::vector<double> t1(t0.size());
  for (int l = 0; l < L; ++l) {
    const double k = poisson_kernel(sigma, steady_mean(model.grid_value(l), params), params.slots());
    t0[l] = log_mass(model.mass(Hypothesis::H0, l)) + k;
    t1[l] = log_mass(model.mass(Hypothesis::H1, l)) + k;
  }
  return llr_from_logs(log_sum_exp(t1), log_sum_exp(t0));
}

double llr_opt_dtm_total(const ObservationBatch& batch, const SensingModel& model,
                         const ChannelParams& params) {
  if (batch.scheme() != Scheme::DTM) throw std::invalid_argument("llr_opt_dtm_total: DTM batch required");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(batch.sensors()));
  for (auto s : batch.sensor_sums()) values.push_back(llr_opt_dtm_sensor(s, model, params));
  return sum_llr(values);
}

double llr_maxlog_sensor(std::int64_t sigma, const SensingModel& model, const ChannelParams& params) {
  require_nonnegative(sigma);
  double best0 = -kInf;
  double best1 = -kInf;
  for (int l = 0; l < model.levels(); ++l) {
    const double k = poisson_kernel(sigma, steady_mean(model.grid_value(l), params), params.slots());
    best0 = std::max(best0, log_mass(model.mass(Hypothesis::H0, l)) + k);
    best1 = std::max(best1, log_mass(model.mass(Hypothesis::H1, l)) + k);
  }
  return llr_from_logs(best1, best0);
}

double llr_mrc(std::int64_t sigma, const ChannelParams& params) {
  require_nonnegative(sigma);
  if (!(params.noise() > 0.0)) throw std::invalid_argument("llr_mrc: undefined for J = 0");
  return -static_cast<double>(params.slots()) * params.gain() +
         static_cast<double>(sigma) * std::log1p(params.gain() / params.noise());
}

int cv_estimate_level(std::int64_t sigma, const ChannelParams& params, std::span<const double> grid) {
  require_nonnegative(sigma);
  int best = 0;
  double best_value = -kInf;
  for (std::size_t l = 0; l < grid.size(); ++l) {
    const double v = poisson_kernel(sigma, steady_mean(grid[l], params), params.slots());
    if (v > best_value) {
      best_value = v;
      best = static_cast<int>(l);
    }
  }
  return best;
}

double cv_estimate(std::int64_t sigma, const ChannelParams& params, std::span<const double> grid) {
  return grid[static_cast<std::size_t>(cv_estimate_level(sigma, params, grid))];
}

double llr_cv(std::int64_t sigma, const SensingModel& model, const ChannelParams& params) {
  const int l = cv_estimate_level(sigma, params, model.grid());
  return llr_from_logs(log_mass(model.mass(Hypothesis::H1, l)), log_mass(model.mass(Hypothesis::H0, l)));
}

double llr_stm(std::int64_t sigma_total, const SumSensingPMF& sum, const ChannelParams& params) {
  require_nonnegative(sigma_total);
  std::vector<double> t0(sum.size());
  std::vector<double> t1(sum.size());
  const auto G0 = sum.mass(Hypothesis::H0);
  const auto G1 = sum.mass(Hypothesis::H1);
  for (std::size_t i = 0; i < sum.size(); ++i) {
    const double k = poisson_kernel(sigma_total, steady_mean(sum.grid_value(i), params), params.slots());
    t0[i] = log_mass(G0[i]) + k;
    t1[i] = log_mass(G1[i]) + k;
  }
  return llr_from_logs(log_sum_exp(t1), log_sum_exp(t0));
}

int decide(double statistic, double threshold) { return statistic > threshold ? 1 : 0; }

int decide_mrc(const ObservationBatch& batch, double count_threshold) {
  if (batch.scheme() != Scheme::DTM) throw std::invalid_argument("decide_mrc: DTM batch required");
  return decide(static_cast<double>(batch.total()), count_threshold);
}

int decide_stm_sum(const ObservationBatch& batch, double count_threshold) {
  if (batch.scheme() != Scheme::STM) throw std::invalid_argument("decide_stm_sum: STM batch required");
  return decide(static_cast<double>(batch.total()), count_threshold);
}

int decide_two_stage(const ObservationBatch& batch, std::int64_t local_threshold,
                     std::int64_t global_threshold) {
  if (batch.scheme() != Scheme::DTM) throw std::invalid_argument("decide_two_stage: DTM batch required");
  std::int64_t votes = 0;
  for (auto s : batch.sensor_sums()) votes += s > local_threshold ? 1 : 0;
  return votes > global_threshold ? 1 : 0;
}

double sum_llr(std::span<const double> values) {
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

PerSensorLlr::PerSensorLlr(DetectorKind kind, SensingModel model, ChannelParams params,
                           std::int64_t table_size)
    : kind_(kind), model_(std::move(model)), params_(std::move(params)) {
  if (kind != DetectorKind::OptDTM && kind != DetectorKind::MaxLog && kind != DetectorKind::MRC &&
      kind != DetectorKind::CV) {
    throw std::invalid_argument("PerSensorLlr: not a per-sensor LLR detector");
  }
  table_.reserve(static_cast<std::size_t>(std::max<std::int64_t>(table_size, 0)));
  for (std::int64_t s = 0; s < table_size; ++s) table_.push_back(evaluate(s));
}

double PerSensorLlr::evaluate(std::int64_t sigma) const {
  switch (kind_) {
    case DetectorKind::OptDTM: return llr_opt_dtm_sensor(sigma, model_, params_);
    case DetectorKind::MaxLog: return llr_maxlog_sensor(sigma, model_, params_);
    case DetectorKind::MRC: return llr_mrc(sigma, params_);
    case DetectorKind::CV: return llr_cv(sigma, model_, params_);
    default: break;
  }
  throw std::logic_error("PerSensorLlr: unreachable");
}

double PerSensorLlr::operator()(std::int64_t sigma) const {
  if (sigma >= 0 && static_cast<std::size_t>(sigma) < table_.size()) {
    return table_[static_cast<std::size_t>(sigma)];
  }
  return evaluate(sigma);
}

int apply_detector(const DetectorSpec& spec, const ObservationBatch& batch, const PerSensorLlr* llr) {
  switch (spec.kind) {
    case DetectorKind::OptSTM: return decide_stm_sum(batch, spec.threshold);
    case DetectorKind::MRC: return decide_mrc(batch, spec.threshold);
    case DetectorKind::TwoStage:
      return decide_two_stage(batch, spec.local_threshold, spec.global_threshold);
    default: break;
  }
  if (llr == nullptr || llr->kind() != spec.kind) {
    throw std::invalid_argument("apply_detector: matching per-sensor LLR required");
  }
  if (batch.scheme() != Scheme::DTM) throw std::invalid_argument("apply_detector: DTM batch required");
  double total = 0.0;
  for (auto s : batch.sensor_sums()) total += (*llr)(s);
  return decide(total, spec.threshold);
}

}  // namespace mcfusion
