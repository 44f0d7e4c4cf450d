#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mcfusion/analysis.hpp"
#include "mcfusion/detectors.hpp"
#include "mcfusion/scenario.hpp"

namespace mcfusion {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { Roc, Sweep, Exponent, BoundVsM, Validate };
std::string_view to_string(ExperimentKind kind);

/// Explicit thresholds for one detector: scalar thresholds, or
/// (local, global) pairs for TwoStage.
using ThresholdList = std::variant<std::vector<double>, std::vector<std::pair<std::int64_t, std::int64_t>>>;

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Roc;
  std::string id = "run";
  std::optional<std::uint64_t> seed;
  std::int64_t trials = 1'000'000;
  Scenario scenario;
  std::vector<DetectorKind> detectors;
  AnalysisOptions analysis;

  // roc
  std::map<DetectorKind, ThresholdList> thresholds;
  bool simulate = false;
  std::optional<double> target_pfa;

  // sweep
  Axis axis = Axis::A;
  std::vector<double> axis_values;

  // exponent and bound-vs-M
  std::vector<double> gains;
  double s_max = 2.0;
  int s_points = 100;
  /// "equalize", "zero", or a number.
  std::string theta = "equalize";
  std::vector<int> sensor_counts;

  // validate
  int validate_points = 8;
  double validate_min_probability = 1e-3;

  /// Parses and validates JSON text; unknown keys are rejected. A run
  /// manifest is accepted as well and its resolved config is used.
  static ExperimentConfig parse(const std::string& json_text);
  /// The config with every default made explicit, as JSON text.
  std::string resolved_json() const;
  bool needs_seed() const;
};

/// One CSV line. Empty optionals and strings render as NA.
struct ResultRow {
  std::string experiment_id;
  std::string experiment;
  std::string record;  // operating-point, calibration, exponent, s-star, bound, summary
  std::string detector;
  std::string scheme;
  std::string method;
  std::string sensing;
  std::optional<int> levels;
  std::optional<double> gain;
  std::optional<double> noise;
  std::optional<int> slots;
  std::optional<int> sensors;
  std::string mode;
  std::string axis;
  std::optional<double> axis_value;
  std::optional<double> threshold;
  std::optional<std::int64_t> local_threshold;
  std::optional<std::int64_t> global_threshold;
  std::optional<double> target_pfa;
  std::optional<bool> feasible;
  std::optional<double> pfa;
  std::optional<double> pd;
  std::optional<double> pm;
  std::optional<double> ci_half_width;
  std::optional<std::int64_t> false_alarms;
  std::optional<std::int64_t> misses;
  std::optional<std::int64_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<double> s;
  std::optional<double> theta;
  std::optional<double> ex0;
  std::optional<double> ex1;
  std::string status;
};

/// Column names in output order.
const std::vector<std::string>& csv_columns();
std::string csv_header();
std::string format_csv_row(const ResultRow& row);
/// %.12g; +/-inf as "inf"/"-inf", NaN as "nan".
std::string format_number(double value);
/// format_number, except that positive values below 1e-300 become "<1e-300".
std::string format_probability(double value);

/// `count` operating points spread along the ROC for a dual-engine
/// comparison, preferring points with Pfa and Pd inside
/// [min_probability, 1 - min_probability]. Coarse scalar statistics get
/// extra thresholds between and beyond their achievable values.
std::vector<PerfPoint> validation_points(const DetectorAnalysis& analysis, std::size_t count,
                                         double min_probability);

struct ExperimentOutcome {
  std::vector<ResultRow> rows;
  /// 0 success, 3 infeasible calibration, 4 engines disagree.
  int exit_code = 0;
  std::vector<std::string> messages;
};

ExperimentOutcome run_experiment(const ExperimentConfig& config, int threads);

struct RunOptions {
  std::filesystem::path output_dir = ".";
  int threads = 0;
  bool quiet = false;
};

/// Reads the config, runs it and writes <id>.csv and <id>.manifest.json to
/// the output directory. Returns the process exit status: 0 success,
/// 1 runtime failure, 2 malformed config, 3 infeasible calibration,
/// 4 analytic/simulated mismatch in a validate run.
int run_config_file(const std::filesystem::path& config_path, const RunOptions& options);

}  // namespace mcfusion
