#include "mcfusion/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <thread>

namespace mcfusion {

namespace {

// Per-level slot means, built once per simulation.
class Sampler {
 public:
  Sampler(const SensingModel& model, const ChannelParams& params, Scheme scheme, ChannelMode mode)
      : model_(model), scheme_(scheme), sensors_(params.sensors()), slots_(params.slots()), noise_(params.noise()) {
    for (int l = 0; l < model.levels(); ++l) {
      const double x = model.grid_value(l);
      std::vector<double> means = mode == ChannelMode::Transient
                                      ? transient_means(x, params)
                                      : std::vector<double>(static_cast<std::size_t>(slots_), steady_mean(x, params));
      if (scheme == Scheme::STM) {
        for (auto& m : means) m -= noise_;  // the signal part only; J is added once per slot
      }
      means_.push_back(std::move(means));
    }
  }

  int sensors() const { return sensors_; }
  int slots() const { return slots_; }

  /// Levels first (sensor order), then counts (row-major for DTM, slot
  /// order for STM).
  void draw(Hypothesis h, RandomStream& rng, std::vector<int>& levels, std::vector<std::int64_t>& counts) const {
    const auto mass = model_.mass(h);
    levels.resize(static_cast<std::size_t>(sensors_));
    for (auto& l : levels) l = sample_level(mass, rng);
    if (scheme_ == Scheme::DTM) {
      counts.resize(static_cast<std::size_t>(sensors_) * static_cast<std::size_t>(slots_));
      std::size_t i = 0;
      for (int l : levels) {
        for (double mean : means_[static_cast<std::size_t>(l)]) counts[i++] = sample_poisson(mean, rng);
      }
    } else {
      counts.resize(static_cast<std::size_t>(slots_));
      for (int n = 0; n < slots_; ++n) {
        double mean = 0.0;
        for (int l : levels) mean += means_[static_cast<std::size_t>(l)][static_cast<std::size_t>(n)];
        counts[static_cast<std::size_t>(n)] = sample_poisson(mean + noise_, rng);
      }
    }
  }

 private:
  const SensingModel& model_;
  Scheme scheme_;
  int sensors_;
  int slots_;
  double noise_;
  std::vector<std::vector<double>> means_;
};

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Specs that threshold one scalar statistic. decide(stat, t) = 1 iff
// t < stat, so the alarming thresholds are a prefix of the sorted list.
struct ScalarGroup {
  std::vector<double> thresholds;    // ascending
  std::vector<std::size_t> members;  // spec index for each threshold
};

// Decision counts of every spec in `group` under one hypothesis.
std::vector<std::int64_t> count_decisions(Hypothesis h, Scheme scheme, const std::vector<const DetectorSpec*>& group,
                                          const SensingModel& model, const ChannelParams& params,
                                          const SimConfig& config) {
  const Sampler sampler(model, params, scheme, config.mode);
  const double top_mean = static_cast<double>(params.slots()) * (params.gain() + params.noise());
  const auto table_size = poisson_upper_quantile(top_mean, 1e-15) + 1;

  // Statistic 0 is the total count; LLR-sum kinds follow.
  std::vector<DetectorKind> llr_kinds;
  std::vector<PerSensorLlr> statistics;
  std::vector<ScalarGroup> scalar(1);
  std::vector<std::size_t> two_stage;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& spec = *group[i];
    if (spec.kind == DetectorKind::TwoStage) {
      two_stage.push_back(i);
      continue;
    }
    std::size_t slot = 0;
    if (is_llr_sum_detector(spec.kind)) {
      const auto it = std::find(llr_kinds.begin(), llr_kinds.end(), spec.kind);
      slot = static_cast<std::size_t>(it - llr_kinds.begin()) + 1;
      if (it == llr_kinds.end()) {
        llr_kinds.push_back(spec.kind);
        statistics.emplace_back(spec.kind, model, params, table_size);
        scalar.emplace_back();
      }
    }
    scalar[slot].members.push_back(i);
  }
  for (auto& g : scalar) {
    std::sort(g.members.begin(), g.members.end(),
              [&](std::size_t a, std::size_t b) { return group[a]->threshold < group[b]->threshold; });
    for (auto i : g.members) g.thresholds.push_back(group[i]->threshold);
  }

  const std::int64_t blocks = (config.trials + config.block_size - 1) / config.block_size;
  const int workers = static_cast<int>(std::min<std::int64_t>(resolve_threads(config.threads), blocks));
  std::atomic<std::int64_t> next{0};
  // Per worker: prefix-alarm counts per scalar group (difference form),
  // then direct counts for two-stage specs.
  struct Tally {
    std::vector<std::vector<std::int64_t>> prefix;
    std::vector<std::int64_t> direct;
  };
  std::vector<Tally> tallies(static_cast<std::size_t>(workers));
  for (auto& t : tallies) {
    for (const auto& g : scalar) t.prefix.emplace_back(g.thresholds.size() + 1, 0);
    t.direct.assign(group.size(), 0);
  }
  auto work = [&](Tally& tally) {
    std::vector<int> levels;
    std::vector<std::int64_t> counts;
    std::vector<std::int64_t> sums(static_cast<std::size_t>(sampler.sensors()));
    std::vector<double> stat(scalar.size());
    for (std::int64_t b; (b = next.fetch_add(1)) < blocks;) {
      RandomStream rng = block_stream(config.seed, h, scheme, b);
      const std::int64_t n = std::min(config.block_size, config.trials - b * config.block_size);
      for (std::int64_t t = 0; t < n; ++t) {
        sampler.draw(h, rng, levels, counts);
        std::int64_t total_count = 0;
        for (auto c : counts) total_count += c;
        stat[0] = static_cast<double>(total_count);
        if (scheme == Scheme::DTM) {
          for (int m = 0; m < sampler.sensors(); ++m) {
            std::int64_t s = 0;
            for (int k = 0; k < sampler.slots(); ++k) s += counts[static_cast<std::size_t>(m * sampler.slots() + k)];
            sums[static_cast<std::size_t>(m)] = s;
          }
          for (std::size_t k = 0; k < statistics.size(); ++k) {
            double total = 0.0;
            for (auto s : sums) total += statistics[k](s);
            stat[k + 1] = total;
          }
        }
        for (std::size_t k = 0; k < scalar.size(); ++k) {
          const auto& th = scalar[k].thresholds;
          if (th.empty()) continue;
          // A NaN statistic compares false everywhere and alarms nowhere.
          const auto alarms = std::lower_bound(th.begin(), th.end(), stat[k]) - th.begin();
          ++tally.prefix[k][0];
          --tally.prefix[k][static_cast<std::size_t>(alarms)];
        }
        for (auto i : two_stage) {
          std::int64_t votes = 0;
          for (auto s : sums) votes += s > group[i]->local_threshold ? 1 : 0;
          tally.direct[i] += votes > group[i]->global_threshold ? 1 : 0;
        }
      }
    }
  };
  if (workers <= 1) {
    work(tallies[0]);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, std::ref(tallies[static_cast<std::size_t>(w)]));
    for (auto& t : pool) t.join();
  }
  std::vector<std::int64_t> hits(group.size(), 0);
  for (const auto& tally : tallies) {
    for (auto i : two_stage) hits[i] += tally.direct[i];
    for (std::size_t k = 0; k < scalar.size(); ++k) {
      std::int64_t running = 0;
      for (std::size_t j = 0; j < scalar[k].members.size(); ++j) {
        running += tally.prefix[k][j];
        hits[scalar[k].members[j]] += running;
      }
    }
  }
  return hits;
}

}  // namespace

void SimConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("SimConfig: trials must be >= 1");
  if (threads < 0) throw std::invalid_argument("SimConfig: threads must be >= 0");
  if (block_size < 1) throw std::invalid_argument("SimConfig: block size must be >= 1");
}

double binomial_half_width(double p, std::int64_t trials) {
  return 3.0 * std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(trials));
}

PerfPoint SimResult::as_perf() const {
  PerfPoint p;
  p.spec = spec;
  p.pfa = pfa_hat;
  p.pd = 1.0 - pm_hat;
  p.method = Method::MonteCarlo;
  p.uncertainty = ci_half_width();
  return p;
}

RandomStream block_stream(std::uint64_t seed, Hypothesis h, Scheme scheme, std::int64_t block) {
  const auto b = static_cast<std::uint64_t>(block);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(scheme),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return RandomStream(seq);
}

ObservationBatch sample_observation(Hypothesis h, const SensingModel& model, const ChannelParams& params,
                                    Scheme scheme, ChannelMode mode, RandomStream& rng) {
  const Sampler sampler(model, params, scheme, mode);
  std::vector<int> levels;
  std::vector<std::int64_t> counts;
  sampler.draw(h, rng, levels, counts);
  if (scheme == Scheme::DTM) return ObservationBatch::dtm(params.sensors(), params.slots(), std::move(counts));
  return ObservationBatch::stm(std::move(counts));
}

std::vector<SimResult> estimate_perf(std::span<const DetectorSpec> specs, const SensingModel& model,
                                     const ChannelParams& params, const SimConfig& config) {
  config.validate();
  for (const auto& s : specs) s.validate(params.sensors());
  std::vector<SimResult> results(specs.size());
  for (Scheme scheme : {Scheme::DTM, Scheme::STM}) {
    std::vector<const DetectorSpec*> group;
    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (scheme_of(specs[i].kind) == scheme) {
        group.push_back(&specs[i]);
        index.push_back(i);
      }
    }
    if (group.empty()) continue;
    const auto alarms = count_decisions(Hypothesis::H0, scheme, group, model, params, config);
    const auto detections = count_decisions(Hypothesis::H1, scheme, group, model, params, config);
    for (std::size_t k = 0; k < group.size(); ++k) {
      auto& r = results[index[k]];
      r.spec = *group[k];
      r.trials = config.trials;
      r.seed = config.seed;
      r.false_alarms = alarms[k];
      r.misses = config.trials - detections[k];
      const double n = static_cast<double>(config.trials);
      r.pfa_hat = static_cast<double>(r.false_alarms) / n;
      r.pm_hat = static_cast<double>(r.misses) / n;
      r.pfa_half_width = binomial_half_width(r.pfa_hat, config.trials);
      r.pm_half_width = binomial_half_width(r.pm_hat, config.trials);
    }
  }
  return results;
}

SimResult estimate_perf(const DetectorSpec& spec, const SensingModel& model, const ChannelParams& params,
                        const SimConfig& config) {
  return estimate_perf(std::span<const DetectorSpec>(&spec, 1), model, params, config).front();
}

std::vector<SweepRow> sweep(Axis axis, std::span<const double> values, const Scenario& scenario,
                            std::span<const DetectorKind> detectors, double target_pfa, const SimConfig& config,
                            const AnalysisOptions& options) {
  if (detectors.empty()) throw std::invalid_argument("sweep: empty detector list");
  std::vector<SweepRow> rows;
  for (double v : values) {
    const Scenario point = with_axis(scenario, axis, v);
    SimConfig cfg = config;
    if (axis == Axis::Trials) {
      if (!(v >= 1.0) || v != std::floor(v)) throw std::invalid_argument("sweep: trials must be a positive integer");
      cfg.trials = static_cast<std::int64_t>(v);
    }
    cfg.mode = point.channel.mode;
    const auto model = point.model();
    const auto params = point.params();
    std::vector<Calibration> calibrations;
    std::vector<DetectorSpec> specs;
    for (auto kind : detectors) {
      calibrations.push_back(calibrate_threshold(kind, model, params, target_pfa, options));
      specs.push_back(calibrations.back().spec);
    }
    const auto simulated = estimate_perf(specs, model, params, cfg);
    for (std::size_t i = 0; i < specs.size(); ++i) rows.push_back({v, calibrations[i], simulated[i]});
  }
  return rows;
}

}  // namespace mcfusion
