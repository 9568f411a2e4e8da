#pragma once

// Monte Carlo runner: sweeps setups and transmit powers, aggregates per-trial
// metrics and writes CSV tables and SVG plots.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hris/pipeline.hpp"

namespace hris {

struct ExperimentConfig {
  std::vector<int> setups{1};  // Table-I indices; 0 selects custom_setup
  std::optional<SetupSpec> custom_setup;
  SystemDims dims;
  int n_paths_mr = 2;
  int n_paths_rb = 2;
  double separation_factor = 4.0;  // minimum circular separation = factor / N
  Geometry2D geometry = Geometry2D::from_offsets(25.0, 10.0, 2.0);
  PathLossModel path_loss;
  AmplitudeConvention amplitude = AmplitudeConvention::kAttenuation;
  NoiseModel noise;
  bool noiseless = false;  // sigma^2 = 0 during training; SE still uses the noise model
  TrainingOptions training;
  EstimatorConfig estimator;
  PhaseDesignOptions phase_design;
  std::vector<double> p_t_sweep_dbm{0.0, 5.0, 10.0, 15.0, 20.0};
  int n_trials = 1000;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::string baseline_csv;  // optional reference curves overlaid on plots

  SetupSpec setup_spec(int setup) const;
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);

ExperimentConfig load_config(const std::string& path);

/// "a:b:c" is start:step:stop inclusive, as in 0:5:20.
std::vector<double> parse_sweep(const std::string& text);

struct TrialKey {
  int setup = 1;
  double p_t_dbm = 0.0;
  int trial = 0;
};

struct TrialSeeds {
  std::uint64_t channel;   // shared by all setups and powers of a trial
  std::uint64_t schedule;  // pilots, combiners and phase schedule; shared across powers
  std::uint64_t noise;     // unique per (setup, power, trial)
};

TrialSeeds trial_seeds(std::uint64_t seed, const TrialKey& key);

struct TrialMetrics {
  double se_est = 0.0;
  double se_perfect = 0.0;
  // Squared errors in radians, averaged over paths.
  double mse_theta_mr = 0.0;
  double mse_phi_mr = 0.0;
  double mse_theta_rb = 0.0;
  double mse_phi_rb = 0.0;
  double mse_delta = 0.0;
  double mse_rho_prod = 0.0;
  // Squared circular errors of the normalized spatial frequencies.
  double msf_theta_mr = 0.0;
  double msf_phi_mr = 0.0;
  double msf_theta_rb = 0.0;
  double msf_phi_rb = 0.0;
  double msf_delta = 0.0;
  int training_overhead = 0;
  int iterations_stage1 = 0;
  int iterations_stage2 = 0;
  bool stage1_converged = false;
  bool stage2_converged = false;
  bool failed = false;  // an estimator stage produced no usable estimate
  std::string failure;

  bool converged() const { return stage1_converged && stage2_converged && !failed; }
};

TrialMetrics run_trial(const ExperimentConfig& cfg, const TrialKey& key);

struct MetricField {
  const char* name;
  double TrialMetrics::*field;
};

/// Metrics averaged into the report, in CSV order.
const std::vector<MetricField>& metric_fields();

class RunningStats {
 public:
  void add(double x);
  void merge(const RunningStats& other);

  long count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;  // unbiased; 0 when count < 2
  double standard_error() const;

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct CellReport {
  int setup = 1;
  double p_t_dbm = 0.0;
  int n_trials = 0;
  int n_failed = 0;
  int n_nonconverged = 0;  // includes failures
  std::vector<RunningStats> stats;  // aligned with metric_fields(), converged trials only
  double wall_seconds = 0.0;
};

struct AggregateReport {
  ExperimentConfig config;
  std::vector<CellReport> cells;
  double wall_seconds = 0.0;
};

enum class Execution { kParallel, kSerial };

std::vector<TrialMetrics> run_cell(const ExperimentConfig& cfg, int setup, double p_t_dbm,
                                   Execution exec = Execution::kParallel);

CellReport aggregate(int setup, double p_t_dbm, const std::vector<TrialMetrics>& trials);

using ProgressFn = std::function<void(const CellReport&)>;

AggregateReport run_experiment(const ExperimentConfig& cfg, Execution exec = Execution::kParallel,
                               const ProgressFn& progress = {});

// ---- outputs ----

struct MetricRow {
  std::string setup;
  double p_t_dbm = 0.0;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;
  long n = 0;
};

std::vector<MetricRow> report_rows(const AggregateReport& report);
std::string format_metrics_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_metrics_csv(const std::string& text);
std::vector<MetricRow> read_metrics_csv(const std::string& path);

/// Throws IoError if the directory cannot be created or written.
void ensure_writable_dir(const std::string& dir);

/// Writes metrics.csv, config.json and one SVG per plotted metric. Files are
/// staged and renamed together; on failure none are left behind.
std::vector<std::string> emit_outputs(const AggregateReport& report, const std::string& dir);

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

std::string render_line_plot(const std::string& title, const std::string& x_label,
                             const std::string& y_label, const std::vector<PlotSeries>& series,
                             bool log_y);

// ---- regularizer calibration ----

struct CalibrationPoint {
  double scale = 0.0;
  double angle_mse = 0.0;  // sum of the four per-angle MSEs, converged trials
  int n_converged = 0;
};

/// Runs the first setup at one power for each candidate scale.
std::vector<CalibrationPoint> calibrate_reg_scale(const ExperimentConfig& cfg,
                                                  const std::vector<double>& scales,
                                                  double p_t_dbm,
                                                  Execution exec = Execution::kParallel);

}  // namespace hris
