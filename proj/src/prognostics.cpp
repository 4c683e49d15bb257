#include "rulkit/prognostics.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rulkit::prognostics {

double failure_threshold(const DeiSeries& trained_dei) {
  if (trained_dei.length() == 0)
    throw Error("failure threshold: estimated series is empty");
  return trained_dei.values[trained_dei.length() - 1];
}

double rul_from_steps(int steps, double unit_interval) {
  if (steps < 1) throw Error("rul: step count must be >= 1");
  if (!(unit_interval > 0.0)) throw Error("rul: unit interval must be positive");
  return steps * unit_interval;
}

double relative_error(double true_rul, double predicted_rul) {
  if (!(true_rul > 0.0))
    throw Error("relative error: true RUL must be positive");
  return 100.0 * (true_rul - predicted_rul) / true_rul;
}

double eta(double er) {
  if (!std::isfinite(er)) throw Error("eta: error must be finite");
  const double ln_half = std::log(0.5);
  return er <= 0.0 ? std::exp(-ln_half * er / 5.0)
                   : std::exp(ln_half * er / 20.0);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

}  // namespace

std::vector<RulReport> run_pipeline(const BearingRun& train_run,
                                    const std::vector<BearingRun>& test_runs,
                                    const PipelineConfig& config) {
  using clock = std::chrono::steady_clock;
  if (train_run.length() == 0)
    throw Error("pipeline: training run is empty");

  const auto cf =
      characteristic_frequencies(train_run.geometry, train_run.condition);
  const double tau = train_run.condition.snapshot_interval;

  StageTimings shared;

  // Stage 1: indicator extraction on the training bearing.
  auto t = clock::now();
  DeiSeries label_raw;
  try {
    label_raw = hht::dei_series(train_run, cf, config.hht);
  } catch (const Error& e) {
    throw Error("pipeline stage extract [" + train_run.id + "]: " + e.what());
  }
  shared.hht_extract_s = seconds_since(t);
  shared.hht_per_snapshot_s = shared.hht_extract_s / train_run.length();
  const DeiSeries label = normalize(label_raw, config.dei_eps);

  // Stage 2: network training and failure threshold.
  t = clock::now();
  cnn::CnnModel model;
  try {
    model = cnn::train(train_run, label, config.train);
  } catch (const Error& e) {
    throw Error("pipeline stage train-cnn [" + train_run.id + "]: " + e.what());
  }
  shared.cnn_train_s = seconds_since(t);

  const DeiSeries est_train = cnn::estimate_dei(model, train_run);
  const double threshold = failure_threshold(est_train);

  svr::SvrModel forecaster;
  if (config.svr_source == PipelineConfig::SvrSource::TrainingBearing) {
    t = clock::now();
    try {
      forecaster = svr::train_svr(
          svr::window_features(est_train, config.svr_window, config.svr_slide),
          config.svr);
    } catch (const Error& e) {
      throw Error("pipeline stage train-svr [" + train_run.id + "]: " +
                  e.what());
    }
    shared.svr_train_s = seconds_since(t);
  }

  // Stage 3: estimate + forecast per test bearing.
  std::vector<RulReport> reports;
  reports.reserve(test_runs.size());
  for (const BearingRun& run : test_runs) {
    RulReport report;
    report.bearing_id = run.id;
    report.threshold = threshold;
    report.timings = shared;

    t = clock::now();
    DeiSeries est;
    try {
      est = cnn::estimate_dei(model, run);
    } catch (const Error& e) {
      throw Error("pipeline stage estimate [" + run.id + "]: " + e.what());
    }
    report.timings.estimate_s = seconds_since(t);
    report.timings.estimate_per_snapshot_s =
        run.length() > 0 ? report.timings.estimate_s / run.length() : 0.0;

    const svr::SvrModel* active = &forecaster;
    svr::SvrModel own;
    if (config.svr_source == PipelineConfig::SvrSource::TestBearing) {
      t = clock::now();
      try {
        own = svr::train_svr(
            svr::window_features(est, config.svr_window, config.svr_slide),
            config.svr);
      } catch (const Error& e) {
        throw Error("pipeline stage train-svr [" + run.id + "]: " + e.what());
      }
      report.timings.svr_train_s = seconds_since(t);
      active = &own;
    }

    t = clock::now();
    svr::ForecastResult forecast;
    try {
      forecast = svr::forecast_until(*active, est, threshold,
                                     config.forecast_cap);
    } catch (const Error& e) {
      throw Error("pipeline stage forecast [" + run.id + "]: " + e.what());
    }
    report.timings.forecast_s = seconds_since(t);

    report.steps = forecast.steps;
    report.crossed = forecast.crossed;
    if (forecast.crossed)
      report.predicted_rul = rul_from_steps(forecast.steps, tau);
    if (run.true_failure_time) {
      const double elapsed = run.length() * tau;
      const double remaining = *run.true_failure_time - elapsed;
      if (remaining > 0.0) report.true_rul = remaining;
    }
    if (report.true_rul && report.predicted_rul) {
      report.relative_error_pct =
          relative_error(*report.true_rul, *report.predicted_rul);
      report.eta = eta(*report.relative_error_pct);
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

namespace {

std::string opt_full(const std::optional<double>& v) {
  return v ? format_full(*v) : std::string("NA");
}

}  // namespace

void write_report_records(const std::filesystem::path& file,
                          const std::vector<RulReport>& reports) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write report file: " + file.string());
  out << "# RUL v1 id\tU\tcrossed\tL_ft\tThat_s\tT_s\tEr_pct\tETA\n";
  for (const RulReport& r : reports) {
    out << r.bearing_id << '\t' << r.steps << '\t' << (r.crossed ? 1 : 0)
        << '\t' << format_full(r.threshold) << '\t'
        << opt_full(r.predicted_rul) << '\t' << opt_full(r.true_rul) << '\t'
        << opt_full(r.relative_error_pct) << '\t' << opt_full(r.eta) << '\n';
  }
}

std::vector<RulReport> read_report_records(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open report file: " + file.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# RUL v1", 0) != 0)
    throw Error("report file " + file.string() + ": missing '# RUL v1' header");

  std::vector<RulReport> reports;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream is(line);
    RulReport r;
    int crossed = 0;
    std::string that, t_true, er, eta_s;
    if (!(is >> r.bearing_id >> r.steps >> crossed >> r.threshold >> that >>
          t_true >> er >> eta_s))
      throw Error("report file " + file.string() + ": bad row " +
                  std::to_string(row));
    r.crossed = crossed != 0;
    auto opt = [](const std::string& s) -> std::optional<double> {
      if (s == "NA") return std::nullopt;
      return std::strtod(s.c_str(), nullptr);
    };
    r.predicted_rul = opt(that);
    r.true_rul = opt(t_true);
    r.relative_error_pct = opt(er);
    r.eta = opt(eta_s);
    reports.push_back(std::move(r));
  }
  return reports;
}

std::string human_report(const RulReport& r) {
  char buf[160];
  std::ostringstream out;
  out << "bearing " << r.bearing_id << ":\n";
  out << "  failure threshold " << r.threshold << ", forecast steps "
      << r.steps << (r.crossed ? "" : " (threshold not reached)") << "\n";
  if (r.predicted_rul) {
    std::snprintf(buf, sizeof(buf), "  predicted RUL %.1f s\n",
                  *r.predicted_rul);
    out << buf;
  } else {
    out << "  predicted RUL: n/a (forecast cap reached below threshold)\n";
  }
  if (r.true_rul) {
    std::snprintf(buf, sizeof(buf), "  true RUL %.1f s\n", *r.true_rul);
    out << buf;
  }
  if (r.relative_error_pct && r.eta) {
    std::snprintf(buf, sizeof(buf), "  Er %.2f%%, ETA %.2f\n",
                  *r.relative_error_pct, *r.eta);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "  timings: extract %.3f s (%.4f s/unit), cnn train %.3f s, "
                "estimate %.4f s/unit, svr %.3f s, forecast %.3f s\n",
                r.timings.hht_extract_s, r.timings.hht_per_snapshot_s,
                r.timings.cnn_train_s, r.timings.estimate_per_snapshot_s,
                r.timings.svr_train_s, r.timings.forecast_s);
  out << buf;
  return out.str();
}

}  // namespace rulkit::prognostics
