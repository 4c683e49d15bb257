#pragma once

#include "rulkit/cnn.hpp"
#include "rulkit/spectrum.hpp"
#include "rulkit/svr.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rulkit::prognostics {

struct PipelineConfig {
  hht::HhtParams hht;
  double dei_eps = 1e-6;  // normalization clamp
  cnn::TrainConfig train;
  svr::SvrParams svr;
  int svr_window = 50;
  int svr_slide = 1;
  long forecast_cap = 100000;

  // Which estimated indicator series the forecaster is fitted on: the
  // training bearing's (default) or each test bearing's own.
  enum class SvrSource { TrainingBearing, TestBearing };
  SvrSource svr_source = SvrSource::TrainingBearing;
};

struct StageTimings {
  double hht_extract_s = 0.0;
  double hht_per_snapshot_s = 0.0;
  double cnn_train_s = 0.0;
  double estimate_s = 0.0;
  double estimate_per_snapshot_s = 0.0;
  double svr_train_s = 0.0;
  double forecast_s = 0.0;
};

struct RulReport {
  std::string bearing_id;
  int steps = 0;  // forecast units U
  bool crossed = false;
  double threshold = 0.0;                    // failure threshold used
  std::optional<double> predicted_rul;       // steps * tau, when crossed
  std::optional<double> true_rul;            // seconds, when known
  std::optional<double> relative_error_pct;  // present iff both RULs known
  std::optional<double> eta;
  StageTimings timings;
};

// Failure threshold: the final element of the training bearing's estimated,
// normalized indicator series.
double failure_threshold(const DeiSeries& trained_dei);

// Predicted remaining life in seconds: steps * unit_interval.
double rul_from_steps(int steps, double unit_interval);

// Signed percentage error, 100 * (T - That) / T; negative means the
// prediction overshot the true life.
double relative_error(double true_rul, double predicted_rul);

// Exponentially transformed accuracy in (0, 1]. Underestimation (early
// warning, positive error) decays with half-life 20; overestimation
// (negative error) is penalized harder with half-life 5.
double eta(double relative_error_pct);

// The three-stage pipeline: indicator extraction + normalization on the
// training run, network training and thresholding, then per test run the
// estimate -> forecast -> report chain. Deterministic for fixed seeds.
std::vector<RulReport> run_pipeline(const BearingRun& train_run,
                                    const std::vector<BearingRun>& test_runs,
                                    const PipelineConfig& config);

// One delimited record per bearing: id, U, L_ft, That, T, Er, ETA (NA for
// absent optionals); full numeric precision.
void write_report_records(const std::filesystem::path& file,
                          const std::vector<RulReport>& reports);
std::vector<RulReport> read_report_records(const std::filesystem::path& file);

// Two-decimal human-readable summary, one block per bearing.
std::string human_report(const RulReport& report);

}  // namespace rulkit::prognostics
