#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mcfusion/analysis.hpp"
#include "mcfusion/channel.hpp"
#include "mcfusion/detectors.hpp"
#include "mcfusion/sensing.hpp"

namespace mcfusion {

/// Ex_i(s) = -log sum_w exp(s * llr[w]) f_i(w), in the log domain. Outcomes
/// with zero mass are skipped. Returns -inf when an infinite LLR with
/// positive mass is amplified by the sign of s; s == 0 gives 0.
double chernoff_exponent(double s, const CountPMF& f, std::span<const double> llr);

struct ChernoffBounds {
  double pfa_upper = 1.0;
  double pm_upper = 1.0;
};

struct SOptimum {
  double s = 0.0;
  /// Exponent Ex_i(s) + s * theta at the optimum.
  double exponent = 0.0;
  /// True when the best point sits on the edge of the search interval.
  bool on_boundary = false;
};

/// Per-sensor statistic together with the log count PMFs under H0 and
/// H1. The support has to reach far enough that the tilted sums for
/// |s| <= s_max are captured; the masses are kept in the log domain
/// because the tilted terms live deep in the Poisson tails.
class ChernoffProblem {
 public:
  ChernoffProblem(std::vector<double> llr, std::vector<double> log_f0, std::vector<double> log_f1,
                  double s_max);
  /// Extends the support until every tilted term for s = +/-s_max has
  /// dropped e^-80 below its peak.
  static ChernoffProblem for_detector(DetectorKind kind, const SensingModel& model,
                                      const ChannelParams& params, double s_max = 2.0);

  double s_max() const { return s_max_; }
  std::span<const double> llr() const { return llr_; }
  std::span<const double> log_mass(Hypothesis h) const {
    return h == Hypothesis::H0 ? std::span<const double>(log_f0_) : std::span<const double>(log_f1_);
  }
  double exponent(double s, Hypothesis h) const;
  /// E[llr] under H_i over the retained support.
  double mean_llr(Hypothesis h) const;

  /// PfaUpp = exp(-M Ex_0(s0) - s0 gamma), PmUpp = exp(-M Ex_1(s1) - s1 gamma),
  /// both clamped to at most 1. Requires s0 > 0 > s1.
  ChernoffBounds bounds(double s0, double s1, double gamma, int sensors) const;

  /// Maximizes Ex_0(s) + s theta over (0, s_max] and Ex_1(s) + s theta
  /// over [-s_max, 0): a coarse grid followed by golden-section search to
  /// |ds| < 1e-4. With theta = gamma / M this minimizes the bounds.
  std::pair<SOptimum, SOptimum> optimize_s(double theta) const;

  /// theta at which the two optimized exponents coincide.
  double equalizing_theta() const;

 private:
  SOptimum maximize(Hypothesis h, double theta) const;

  std::vector<double> llr_;
  std::vector<double> log_f0_;
  std::vector<double> log_f1_;
  double s_max_;
};

ChernoffBounds chernoff_bounds(double s0, double s1, double gamma, int sensors, const CountPMF& f0,
                               const CountPMF& f1, std::span<const double> llr);

/// Exponents along |s|: ex0[k] = Ex_0(s_k) + s_k theta and
/// ex1[k] = Ex_1(-s_k) - s_k theta.
struct ExponentCurve {
  double theta = 0.0;
  std::vector<double> s_grid;
  std::vector<double> ex0;
  std::vector<double> ex1;
  SOptimum star0;
  SOptimum star1;
};

ExponentCurve exponent_curve(const ChernoffProblem& problem, std::span<const double> s_grid, double theta);

/// Bounds at the optimized s for a given LLR threshold.
struct OptimizedBound {
  SOptimum star0;
  SOptimum star1;
  ChernoffBounds bounds;
};
OptimizedBound optimized_bounds(const ChernoffProblem& problem, double gamma, int sensors);

}  // namespace mcfusion
