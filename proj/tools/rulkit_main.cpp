#include "rulkit/cnn.hpp"
#include "rulkit/kv.hpp"
#include "rulkit/prognostics.hpp"
#include "rulkit/run.hpp"
#include "rulkit/spectrum.hpp"
#include "rulkit/svr.hpp"
#include "rulkit/synth.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace rulkit;

namespace {

struct GlobalOptions {
  std::string config_file;
  std::uint64_t seed = 0;
  int threads = 1;
  bool verbose = false;
};

// Deferred config-file application: a flag given on the command line wins,
// otherwise the config value, otherwise the built-in default.
struct ConfigBinding {
  CLI::Option* option;
  std::string key;
  std::function<void(const std::string&)> apply;
};

std::vector<ConfigBinding>& bindings() {
  static std::vector<ConfigBinding> b;
  return b;
}

void bind_double(CLI::Option* opt, const std::string& key, double& target) {
  bindings().push_back({opt, key, [&target, key](const std::string& s) {
                          char* stop = nullptr;
                          target = std::strtod(s.c_str(), &stop);
                          if (stop == s.c_str() || *stop != '\0')
                            throw Error("config: bad number for '" + key +
                                        "': " + s);
                        }});
}

void bind_int(CLI::Option* opt, const std::string& key, int& target) {
  bindings().push_back({opt, key, [&target](const std::string& s) {
                          target = static_cast<int>(
                              std::strtol(s.c_str(), nullptr, 10));
                        }});
}

void bind_long(CLI::Option* opt, const std::string& key, long& target) {
  bindings().push_back({opt, key, [&target](const std::string& s) {
                          target = std::strtol(s.c_str(), nullptr, 10);
                        }});
}

void bind_seed(CLI::Option* opt, const std::string& key,
               std::uint64_t& target) {
  bindings().push_back({opt, key, [&target](const std::string& s) {
                          target = std::strtoull(s.c_str(), nullptr, 10);
                        }});
}

void apply_config(const GlobalOptions& g) {
  if (g.config_file.empty()) return;
  const KvMap kv = read_kv_file(g.config_file);
  for (const auto& [key, value] : kv) {
    (void)value;
    bool known = false;
    for (const auto& b : bindings()) known = known || b.key == key;
    if (!known)
      throw Error("config " + g.config_file + ": unknown key '" + key + "'");
  }
  for (const auto& b : bindings())
    if (b.option->count() == 0 && kv.count(b.key)) b.apply(kv.at(b.key));
}

void chat(const GlobalOptions& g, const std::string& line) {
  if (g.verbose) std::cerr << line << '\n';
}

BearingRun load_run_with_manifest(const fs::path& run_dir,
                                  const std::string& manifest_override) {
  const fs::path manifest = manifest_override.empty()
                                ? run_dir / "manifest.txt"
                                : fs::path(manifest_override);
  if (!fs::exists(manifest))
    throw Error("missing manifest " + manifest.string() +
                "; hint: pass --manifest or place manifest.txt in the run "
                "directory");
  RunManifest m = read_manifest(manifest);
  m.directory = run_dir;
  return load_run(m);
}

int cmd_synth(const GlobalOptions& g, const std::string& spec_file,
              const std::string& out_dir) {
  const SynthSpec spec = read_synth_spec(spec_file);
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw Error("cannot create output directory " + dir.string() +
                "; hint: check permissions and the parent path");
  const std::string id = dir.filename().string();
  chat(g, "synthesizing " + std::to_string(spec.length) + " snapshots");
  const BearingRun run = synthesize_run(spec, g.seed, id);

  for (const auto& snap : run.snapshots) {
    char name[32];
    std::snprintf(name, sizeof(name), "acc_%05d.csv", snap.index);
    std::ofstream out(dir / name);
    if (!out) throw Error("cannot write " + (dir / name).string());
    serialize_snapshot(out, snap, spec.condition.sampling_frequency);
  }
  RunManifest m;
  m.id = id;
  m.geometry = spec.geometry;
  m.condition = spec.condition;
  m.directory = ".";
  m.true_failure_time = run.true_failure_time;
  write_manifest(dir / "manifest.txt", m);
  std::cout << "wrote " << run.length() << " snapshots to " << dir.string()
            << '\n';
  if (run.true_failure_time)
    std::cout << "true failure time: " << format_full(*run.true_failure_time)
              << " s\n";
  return 0;
}

int cmd_extract_dei(const GlobalOptions& g, const std::string& run_dir,
                    const std::string& manifest_file,
                    const std::string& out_file, int band, double eps) {
  RunManifest m = read_manifest(manifest_file);
  m.directory = run_dir;
  const BearingRun run = load_run(m);
  const auto cf = characteristic_frequencies(run.geometry, run.condition);
  std::cout << "characteristic frequencies: inner=" << cf.inner
            << " Hz outer=" << cf.outer << " Hz ball=" << cf.ball << " Hz\n";

  hht::HhtParams params;
  params.dei_band = band;
  chat(g, "extracting indicator over " + std::to_string(run.length()) +
              " snapshots");
  const DeiSeries raw = hht::dei_series(run, cf, params);
  const DeiSeries norm = normalize(raw, eps);
  save_dei(fs::path(out_file + ".raw"), raw);
  save_dei(fs::path(out_file), norm);
  std::cout << "wrote " << out_file << " (normalized) and " << out_file
            << ".raw\n";
  return 0;
}

int cmd_train_cnn(const GlobalOptions& g, const std::string& run_dir,
                  const std::string& dei_file, const std::string& model_out,
                  const std::string& manifest_override, double lr, int iters,
                  int batch) {
  const BearingRun run = load_run_with_manifest(run_dir, manifest_override);
  const DeiSeries labels = load_dei(dei_file);
  if (!labels.normalized)
    throw Error("label series is not normalized; hint: use the normalized "
                "output of extract-dei, not the .raw file");

  cnn::TrainConfig config;
  config.adam.learning_rate = lr;
  config.iterations = iters;
  config.batch_size = batch;
  config.seed = g.seed;
  std::vector<cnn::TrainLogEntry> log;
  chat(g, "training for " + std::to_string(iters) + " iterations");
  const cnn::CnnModel model = cnn::train(run, labels, config, &log);
  cnn::save_model(model_out, model);

  std::ofstream loss_log(model_out + ".loss.tsv");
  loss_log << "# CNN-LOSS v1 iterations=" << log.size() << '\n';
  for (const auto& entry : log)
    loss_log << entry.iteration << '\t' << format_full(entry.loss) << '\n';
  std::cout << "wrote " << model_out << " (final loss "
            << (log.empty() ? 0.0 : log.back().loss) << ")\n";
  return 0;
}

int cmd_estimate_dei(const GlobalOptions& g, const std::string& model_file,
                     const std::string& run_dir, const std::string& out_file,
                     const std::string& manifest_override) {
  const cnn::CnnModel model = cnn::load_model(model_file);
  const BearingRun run = load_run_with_manifest(run_dir, manifest_override);
  chat(g, "estimating indicator for " + std::to_string(run.length()) +
              " snapshots");
  const DeiSeries est = cnn::estimate_dei(model, run);
  save_dei(out_file, est);
  std::cout << "wrote " << out_file << '\n';
  return 0;
}

int cmd_train_svr(const GlobalOptions& g, const std::string& dei_file,
                  const std::string& model_out, int window, int slide,
                  double c_penalty, double epsilon, double sigma) {
  const DeiSeries series = load_dei(dei_file);
  const auto set = svr::window_features(series, window, slide);
  svr::SvrParams params;
  params.C = c_penalty;
  params.epsilon_tube = epsilon;
  params.sigma = sigma;
  chat(g, "fitting forecaster on " + std::to_string(set.size()) + " windows");
  const svr::SvrModel model = svr::train_svr(set, params);
  svr::save_model(model_out, model);
  std::cout << "wrote " << model_out << " (" << model.support_features.size()
            << " support vectors)\n";
  return 0;
}

int cmd_predict(const GlobalOptions& g, const std::string& model_file,
                const std::string& svr_file, const std::string& threshold_dei,
                const std::string& report_out,
                const std::vector<std::string>& run_dirs,
                const std::string& manifest_override, long cap,
                bool retrain_on_test, double true_rul_flag,
                bool true_rul_given) {
  if (true_rul_given && run_dirs.size() != 1)
    throw Error("--true-rul applies to a single test run; hint: put the true "
                "failure time in each run's manifest instead");
  const cnn::CnnModel model = cnn::load_model(model_file);
  const svr::SvrModel forecaster = svr::load_model(svr_file);
  const DeiSeries threshold_series = load_dei(threshold_dei);
  const double threshold = prognostics::failure_threshold(threshold_series);

  struct Slot {
    prognostics::RulReport report;
    svr::ForecastResult forecast;
    std::string error;
  };
  std::vector<Slot> slots(run_dirs.size());

  auto work = [&](std::size_t idx) {
    Slot& slot = slots[idx];
    try {
      const BearingRun run =
          load_run_with_manifest(run_dirs[idx], manifest_override);
      const double tau = run.condition.snapshot_interval;
      slot.report.bearing_id = run.id;
      slot.report.threshold = threshold;

      const DeiSeries est = cnn::estimate_dei(model, run);
      const svr::SvrModel* active = &forecaster;
      svr::SvrModel own;
      if (retrain_on_test) {
        svr::SvrParams params;
        params.C = forecaster.C;
        params.epsilon_tube = forecaster.epsilon_tube;
        params.sigma = forecaster.kernel_width;
        own = svr::train_svr(
            svr::window_features(est, forecaster.window_size,
                                 forecaster.slide),
            params);
        active = &own;
      }
      slot.forecast = svr::forecast_until(*active, est, threshold, cap);
      slot.report.steps = slot.forecast.steps;
      slot.report.crossed = slot.forecast.crossed;
      if (slot.forecast.crossed)
        slot.report.predicted_rul =
            prognostics::rul_from_steps(slot.forecast.steps, tau);
      if (true_rul_given) {
        slot.report.true_rul = true_rul_flag;
      } else if (run.true_failure_time) {
        const double remaining = *run.true_failure_time - run.length() * tau;
        if (remaining > 0.0) slot.report.true_rul = remaining;
      }
      if (slot.report.true_rul && slot.report.predicted_rul) {
        slot.report.relative_error_pct = prognostics::relative_error(
            *slot.report.true_rul, *slot.report.predicted_rul);
        slot.report.eta = prognostics::eta(*slot.report.relative_error_pct);
      }
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  };

  // Independent test bearings; results land in per-bearing slots so the
  // output never depends on scheduling.
  const std::size_t threads =
      std::min<std::size_t>(std::max(1, g.threads), run_dirs.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < run_dirs.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < run_dirs.size();
             i = next.fetch_add(1))
          work(i);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<prognostics::RulReport> reports;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].error.empty())
      throw Error("bearing " + run_dirs[i] + ": " + slots[i].error);
    reports.push_back(slots[i].report);
  }
  prognostics::write_report_records(report_out, reports);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::string traj = report_out + "." + reports[i].bearing_id + ".traj";
    svr::save_forecast(traj, slots[i].forecast);
    std::cout << prognostics::human_report(reports[i]);
    chat(g, "trajectory written to " + traj);
  }
  std::cout << "wrote " << report_out << '\n';
  return 0;
}

int cmd_evaluate(const std::string& report_file, double t_true,
                 double t_predicted, bool pair_given) {
  if (pair_given) {
    const double er = prognostics::relative_error(t_true, t_predicted);
    char line[96];
    std::snprintf(line, sizeof(line), "Er %.2f%%  ETA %.2f\n", er,
                  prognostics::eta(er));
    std::cout << line;
    std::cout << "Er_full " << format_full(er) << "\nETA_full "
              << format_full(prognostics::eta(er)) << '\n';
    return 0;
  }
  if (report_file.empty())
    throw Error("evaluate needs a report file or --true/--predicted; hint: "
                "rulkit evaluate report.tsv");
  const auto reports = prognostics::read_report_records(report_file);
  for (const auto& r : reports) {
    if (r.true_rul && r.predicted_rul) {
      const double er =
          prognostics::relative_error(*r.true_rul, *r.predicted_rul);
      char line[128];
      std::snprintf(line, sizeof(line), "%s Er %.2f%% ETA %.2f\n",
                    r.bearing_id.c_str(), er, prognostics::eta(er));
      std::cout << line;
    } else {
      std::cout << r.bearing_id << " Er n/a (missing true or predicted RUL)\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bearing remaining-useful-life prognostics toolkit"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config_file,
                 "key=value configuration file ('#' comments)");
  auto* seed_opt =
      app.add_option("--seed", g.seed, "seed for synthesis and training");
  auto* threads_opt =
      app.add_option("--threads", g.threads, "worker threads for predict");
  app.add_flag("--verbose", g.verbose, "progress chatter on stderr");
  bind_seed(seed_opt, "seed", g.seed);
  bind_int(threads_opt, "threads", g.threads);

  auto* synth =
      app.add_subcommand("synth", "generate a synthetic degrading run");
  std::string synth_spec, synth_out;
  synth->add_option("spec-file", synth_spec)->required();
  synth->add_option("out-dir", synth_out)->required();

  auto* extract = app.add_subcommand(
      "extract-dei", "indicator extraction from raw vibration snapshots");
  std::string ex_run, ex_manifest, ex_out;
  int band = 2;
  double dei_eps = 1e-6;
  extract->add_option("run-dir", ex_run)->required();
  extract->add_option("manifest", ex_manifest)->required();
  extract->add_option("out-file", ex_out)->required();
  bind_int(extract->add_option("--band", band,
                               "half-width in bins around each frequency"),
           "band", band);
  bind_double(extract->add_option("--eps", dei_eps, "normalization clamp"),
              "eps", dei_eps);

  auto* traincnn = app.add_subcommand(
      "train-cnn", "fit the regression network to a labeled run");
  std::string tc_run, tc_dei, tc_model, tc_manifest;
  double lr = 1e-5;
  int iters = 1000, batch = 0;
  traincnn->add_option("run-dir", tc_run)->required();
  traincnn->add_option("dei-file", tc_dei)->required();
  traincnn->add_option("model-out", tc_model)->required();
  traincnn->add_option("--manifest", tc_manifest,
                       "manifest path (default run-dir/manifest.txt)");
  bind_double(traincnn->add_option("--lr", lr, "learning rate"), "lr", lr);
  bind_int(traincnn->add_option("--iters", iters, "gradient steps"), "iters",
           iters);
  bind_int(traincnn->add_option("--batch", batch,
                                "mini-batch size (0 = full batch)"),
           "batch", batch);

  auto* estimate = app.add_subcommand(
      "estimate-dei", "run the trained network over a test run");
  std::string es_model, es_run, es_out, es_manifest;
  estimate->add_option("model-file", es_model)->required();
  estimate->add_option("run-dir", es_run)->required();
  estimate->add_option("out-file", es_out)->required();
  estimate->add_option("--manifest", es_manifest);

  auto* trainsvr = app.add_subcommand(
      "train-svr", "fit the forecaster on an indicator series");
  std::string ts_dei, ts_model;
  int window = 50, slide = 1;
  double c_penalty = 5.09, tube = 0.01, sigma = 0.0;
  trainsvr->add_option("dei-file", ts_dei)->required();
  trainsvr->add_option("model-out", ts_model)->required();
  bind_int(trainsvr->add_option("--window", window, "sampling window size"),
           "window", window);
  bind_int(trainsvr->add_option("--slide", slide, "window slide"), "slide",
           slide);
  bind_double(trainsvr->add_option("--C", c_penalty, "penalty parameter"),
              "C", c_penalty);
  bind_double(trainsvr->add_option("--epsilon", tube, "tube half-width"),
              "epsilon", tube);
  bind_double(trainsvr->add_option("--sigma", sigma,
                                   "kernel width (0 = median heuristic)"),
              "sigma", sigma);

  auto* predict = app.add_subcommand(
      "predict", "estimate, forecast to the threshold and report RUL");
  std::string pr_model, pr_svr, pr_threshold, pr_report, pr_manifest;
  std::vector<std::string> pr_runs;
  long cap = 100000;
  bool retrain = false;
  double true_rul = 0.0;
  predict->add_option("model-file", pr_model)->required();
  predict->add_option("svr-model", pr_svr)->required();
  predict
      ->add_option("threshold-dei", pr_threshold,
                   "estimated training series; its last value is the failure "
                   "threshold")
      ->required();
  predict->add_option("report-out", pr_report)->required();
  predict->add_option("test-run-dir", pr_runs)->required()->expected(-1);
  predict->add_option("--manifest", pr_manifest);
  auto* true_rul_opt = predict->add_option(
      "--true-rul", true_rul, "known remaining life in seconds (single run)");
  predict->add_flag("--retrain-on-test", retrain,
                    "refit the forecaster on each test bearing's estimate");
  bind_long(predict->add_option("--cap", cap, "forecast step cap"), "cap",
            cap);

  auto* evaluate = app.add_subcommand(
      "evaluate", "error metrics for predicted against true RUL");
  std::string ev_report;
  double ev_true = 0.0, ev_pred = 0.0;
  evaluate->add_option("report-file", ev_report);
  auto* ev_true_opt =
      evaluate->add_option("--true", ev_true, "true RUL in seconds");
  auto* ev_pred_opt =
      evaluate->add_option("--predicted", ev_pred, "predicted RUL in seconds");

  CLI11_PARSE(app, argc, argv);

  try {
    apply_config(g);
    if (synth->parsed()) return cmd_synth(g, synth_spec, synth_out);
    if (extract->parsed())
      return cmd_extract_dei(g, ex_run, ex_manifest, ex_out, band, dei_eps);
    if (traincnn->parsed())
      return cmd_train_cnn(g, tc_run, tc_dei, tc_model, tc_manifest, lr,
                           iters, batch);
    if (estimate->parsed())
      return cmd_estimate_dei(g, es_model, es_run, es_out, es_manifest);
    if (trainsvr->parsed())
      return cmd_train_svr(g, ts_dei, ts_model, window, slide, c_penalty,
                           tube, sigma);
    if (predict->parsed())
      return cmd_predict(g, pr_model, pr_svr, pr_threshold, pr_report,
                         pr_runs, pr_manifest, cap, retrain, true_rul,
                         true_rul_opt->count() > 0);
    if (evaluate->parsed())
      return cmd_evaluate(ev_report, ev_true, ev_pred,
                          ev_true_opt->count() > 0 &&
                              ev_pred_opt->count() > 0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
