#pragma once

#include "rulkit/common.hpp"
#include "rulkit/dei.hpp"

#include <filesystem>
#include <vector>

namespace rulkit::svr {

// Sliding-window statistics of an indicator series: the feature of window g
// is its (mean, population variance) pair.
struct WindowFeature {
  double mean = 0.0;
  double variance = 0.0;
};

struct SvrTrainingSet {
  std::vector<WindowFeature> features;
  VecX targets;  // the series value immediately after each window
  int window_size = 0;
  int slide = 1;

  int size() const { return static_cast<int>(features.size()); }
};

// Decomposes the series into overlapping windows of length `window_size`
// moved by `slide`; every window whose successor value exists contributes a
// (feature, target) pair. For slide 1 this yields Q - window_size pairs.
SvrTrainingSet window_features(const DeiSeries& series, int window_size,
                               int slide = 1);

// exp(-|a - b|^2 / (2 sigma^2)); symmetric, in (0, 1].
double rbf_kernel(const WindowFeature& a, const WindowFeature& b, double sigma);

struct SvrParams {
  double C = 5.09;
  double epsilon_tube = 0.01;
  // Kernel width; values <= 0 select the median pairwise feature distance.
  double sigma = 0.0;
  double kkt_tolerance = 1e-6;
  long max_pair_updates = 1000000;
};

// Trained regressor f(x) = sum_g beta_g k(x, x_g) + b, where beta_g is the
// difference of the two dual variables of sample g. Only samples with
// beta_g != 0 are retained.
struct SvrModel {
  std::vector<WindowFeature> support_features;
  VecX dual_coefficients;  // beta per support vector, in [-C, C]
  double bias = 0.0;
  double kernel_width = 0.0;
  double C = 0.0;
  double epsilon_tube = 0.0;
  int window_size = 0;
  int slide = 1;
};

// Solves the epsilon-insensitive dual by sequential minimal optimization on
// maximal-violation pairs; converged when the largest KKT violation drops
// below kkt_tolerance. Raises a non-convergence Error (carrying the final
// violation) when the pair-update cap is exhausted first. When `full_beta`
// is given it receives one dual coefficient per training sample.
SvrModel train_svr(const SvrTrainingSet& set, const SvrParams& params = {},
                   VecX* full_beta = nullptr);

double predict(const SvrModel& model, const WindowFeature& x);

struct ForecastResult {
  VecX predicted;          // one value per forecast step
  int steps = 0;           // U; when crossed, predicted[U-1] >= threshold
  bool crossed = false;
  double threshold = 0.0;  // L_ft used
};

// Recursive multi-step forecast: keeps a rolling buffer of the last
// window_size values (history, then predictions), predicts one value per
// step, and stops at the first prediction >= threshold or at the cap.
ForecastResult forecast_until(const SvrModel& model, const DeiSeries& history,
                              double threshold, long cap = 100000);

// Diagnostics used by the optimality checks.
double median_pairwise_distance(const std::vector<WindowFeature>& features);
double dual_objective(const SvrTrainingSet& set,
                      const Eigen::Ref<const VecX>& beta, double epsilon_tube,
                      double sigma);
double max_kkt_violation(const SvrTrainingSet& set,
                         const Eigen::Ref<const VecX>& beta, double bias,
                         double C, double epsilon_tube, double sigma);

void save_model(const std::filesystem::path& file, const SvrModel& model);
SvrModel load_model(const std::filesystem::path& file);

// Forecast trajectory as delimited text (step, predicted value).
void save_forecast(const std::filesystem::path& file, const ForecastResult& r);

}  // namespace rulkit::svr
