#include "rulkit/svr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace rulkit::svr {

SvrTrainingSet window_features(const DeiSeries& series, int window_size,
                               int slide) {
  const int q = series.length();
  if (window_size < 2) throw Error("window features: window size must be >= 2");
  if (slide < 1) throw Error("window features: slide must be >= 1");
  if (q < window_size + 1)
    throw Error("window features: series of length " + std::to_string(q) +
                " is too short for window " + std::to_string(window_size));

  SvrTrainingSet set;
  set.window_size = window_size;
  set.slide = slide;
  std::vector<double> targets;
  for (int start = 0; start + window_size < q; start += slide) {
    const auto window = series.values.segment(start, window_size);
    WindowFeature f;
    f.mean = window.mean();
    f.variance = (window.array() - f.mean).square().sum() / window_size;
    set.features.push_back(f);
    targets.push_back(series.values[start + window_size]);
  }
  set.targets = Eigen::Map<const VecX>(targets.data(), targets.size());
  return set;
}

double rbf_kernel(const WindowFeature& a, const WindowFeature& b,
                  double sigma) {
  if (!(sigma > 0.0)) throw Error("rbf kernel: sigma must be positive");
  const double dm = a.mean - b.mean;
  const double dv = a.variance - b.variance;
  return std::exp(-(dm * dm + dv * dv) / (2.0 * sigma * sigma));
}

double median_pairwise_distance(const std::vector<WindowFeature>& features) {
  const int n = static_cast<int>(features.size());
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      d.push_back(std::hypot(features[i].mean - features[j].mean,
                             features[i].variance - features[j].variance));
  if (d.empty()) return 1.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + mid, d.end());
  const double median = d[mid];
  return median > 0.0 ? median : 1.0;
}

double dual_objective(const SvrTrainingSet& set,
                      const Eigen::Ref<const VecX>& beta, double epsilon_tube,
                      double sigma) {
  const int n = set.size();
  double w = 0.0;
  for (int i = 0; i < n; ++i) {
    w += set.targets[i] * beta[i] - epsilon_tube * std::abs(beta[i]);
    double ko = 0.0;
    for (int j = 0; j < n; ++j)
      ko += beta[j] * rbf_kernel(set.features[i], set.features[j], sigma);
    w -= 0.5 * beta[i] * ko;
  }
  return w;
}

namespace {

constexpr double kBoundSlack = 1e-12;

// KKT violation of one sample given its residual e = f(x_g) - y_g.
double violation_of(double beta, double e, double C, double eps) {
  const double slack = kBoundSlack * std::max(1.0, C);
  if (std::abs(beta) <= slack) return std::max(0.0, std::abs(e) - eps);
  if (beta >= C - slack) return std::max(0.0, e + eps);
  if (beta <= -C + slack) return std::max(0.0, eps - e);
  if (beta > 0.0) return std::abs(e + eps);
  return std::abs(e - eps);
}

// Bias from the KKT stationarity of unbounded support vectors; with none,
// the midpoint of the interval every sample's condition allows.
double bias_for(const VecX& beta, const VecX& out_no_bias, const VecX& y,
                double C, double eps) {
  const int n = static_cast<int>(beta.size());
  const double slack = kBoundSlack * std::max(1.0, C);
  double sum = 0.0;
  int count = 0;
  for (int g = 0; g < n; ++g) {
    if (beta[g] > slack && beta[g] < C - slack) {
      sum += y[g] - out_no_bias[g] - eps;
      ++count;
    } else if (beta[g] < -slack && beta[g] > -C + slack) {
      sum += y[g] - out_no_bias[g] + eps;
      ++count;
    }
  }
  if (count > 0) return sum / count;

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int g = 0; g < n; ++g) {
    const double base = y[g] - out_no_bias[g];
    if (std::abs(beta[g]) <= slack) {
      lo = std::max(lo, base - eps);
      hi = std::min(hi, base + eps);
    } else if (beta[g] >= C - slack) {
      hi = std::min(hi, base - eps);
    } else if (beta[g] <= -C + slack) {
      lo = std::max(lo, base + eps);
    }
  }
  if (!std::isfinite(lo) && !std::isfinite(hi)) return 0.0;
  if (!std::isfinite(lo)) return hi;
  if (!std::isfinite(hi)) return lo;
  return 0.5 * (lo + hi);
}

// Exact maximizer of the pair (i, j) subproblem under the box and the sum
// constraint beta_i + beta_j = s. The |beta| terms make the objective
// piecewise quadratic; candidates are the breakpoints, the box ends and the
// clipped stationary point of each sign segment.
struct PairStep {
  double new_beta_i = 0.0;
  double gain = 0.0;
};

PairStep solve_pair(const MatX& kernel, const VecX& y, const VecX& beta,
                    const VecX& out_no_bias, int i, int j, double C,
                    double eps) {
  const double s = beta[i] + beta[j];
  const double lo = std::max(-C, s - C);
  const double hi = std::min(C, s + C);
  const double kii = kernel(i, i), kjj = kernel(j, j), kij = kernel(i, j);
  const double eta = kii + kjj - 2.0 * kij;

  // Gradient pieces that do not depend on the pair's own coefficients.
  const double vi = out_no_bias[i] - beta[i] * kii - beta[j] * kij;
  const double vj = out_no_bias[j] - beta[i] * kij - beta[j] * kjj;
  const double c0 = (y[i] - y[j]) - (vi - vj) + s * (kjj - kij);

  auto gain_at = [&](double bi) {
    const double bj = s - bi;
    const double di = bi - beta[i];
    const double dj = bj - beta[j];
    double g = y[i] * di + y[j] * dj;
    g -= eps * (std::abs(bi) - std::abs(beta[i]) + std::abs(bj) -
                std::abs(beta[j]));
    g -= di * out_no_bias[i] + dj * out_no_bias[j];
    g -= 0.5 * (kii * di * di + 2.0 * kij * di * dj + kjj * dj * dj);
    return g;
  };

  std::vector<double> candidates = {lo, hi};
  if (0.0 > lo && 0.0 < hi) candidates.push_back(0.0);
  if (s > lo && s < hi) candidates.push_back(s);
  if (eta > 0.0) {
    for (const double si : {-1.0, 1.0}) {
      for (const double sj : {-1.0, 1.0}) {
        double bi = (c0 - eps * (si - sj)) / eta;
        bi = std::min(hi, std::max(lo, bi));
        // Keep only stationary points consistent with their sign segment.
        if ((bi > 0.0 ? 1.0 : (bi < 0.0 ? -1.0 : si)) == si &&
            ((s - bi) > 0.0 ? 1.0 : ((s - bi) < 0.0 ? -1.0 : sj)) == sj)
          candidates.push_back(bi);
      }
    }
  }

  PairStep best;
  best.new_beta_i = beta[i];
  best.gain = 0.0;
  for (double bi : candidates) {
    const double g = gain_at(bi);
    if (g > best.gain) {
      best.gain = g;
      best.new_beta_i = bi;
    }
  }
  return best;
}

}  // namespace

SvrModel train_svr(const SvrTrainingSet& set, const SvrParams& params,
                   VecX* full_beta) {
  const int n = set.size();
  if (n == 0) throw Error("svr: training set is empty");
  if (!(params.C > 0.0)) throw Error("svr: C must be positive");
  if (!(params.epsilon_tube >= 0.0)) throw Error("svr: epsilon must be >= 0");

  const double sigma = params.sigma > 0.0
                           ? params.sigma
                           : median_pairwise_distance(set.features);
  const double C = params.C;
  const double eps = params.epsilon_tube;

  MatX kernel(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      kernel(i, j) = kernel(j, i) =
          rbf_kernel(set.features[i], set.features[j], sigma);

  VecX beta = VecX::Zero(n);
  VecX out_no_bias = VecX::Zero(n);
  const VecX& y = set.targets;

  const double slack = kBoundSlack * std::max(1.0, C);
  long updates = 0;
  double max_violation = 0.0;

  while (true) {
    const double b = bias_for(beta, out_no_bias, y, C, eps);
    max_violation = 0.0;
    for (int g = 0; g < n; ++g)
      max_violation = std::max(
          max_violation,
          violation_of(beta[g], out_no_bias[g] + b - y[g], C, eps));
    if (max_violation < params.kkt_tolerance) break;
    if (updates >= params.max_pair_updates)
      throw Error("svr: SMO hit the pair-update cap with KKT violation " +
                  format_full(max_violation));

    // Maximal violating pair: the multiplier of the sum constraint must sit
    // above every up-direction gradient and below every down-direction one;
    // pick the two samples squeezing that interval hardest.
    int up = -1, down = -1;
    double up_grad = 0.0, down_grad = 0.0;
    for (int g = 0; g < n; ++g) {
      if (beta[g] < C - slack) {
        const double grad =
            y[g] - out_no_bias[g] - (beta[g] >= 0.0 ? eps : -eps);
        if (up < 0 || grad > up_grad) {
          up = g;
          up_grad = grad;
        }
      }
      if (beta[g] > -C + slack) {
        const double grad =
            y[g] - out_no_bias[g] - (beta[g] > 0.0 ? eps : -eps);
        if (down < 0 || grad < down_grad) {
          down = g;
          down_grad = grad;
        }
      }
    }

    bool improved = false;
    if (up >= 0 && down >= 0 && up != down) {
      const PairStep step =
          solve_pair(kernel, y, beta, out_no_bias, up, down, C, eps);
      if (step.gain > 1e-15) {
        const double di = step.new_beta_i - beta[up];
        beta[up] += di;
        beta[down] -= di;
        out_no_bias += di * (kernel.col(up) - kernel.col(down));
        ++updates;
        improved = true;
      }
    }
    if (!improved) {
      // Numerical edge: fall back to scanning every pair for a positive
      // exact gain before declaring a stall.
      for (int i = 0; i < n && !improved; ++i) {
        for (int j = i + 1; j < n && !improved; ++j) {
          const PairStep step =
              solve_pair(kernel, y, beta, out_no_bias, i, j, C, eps);
          if (step.gain > 1e-15) {
            const double di = step.new_beta_i - beta[i];
            beta[i] += di;
            beta[j] -= di;
            out_no_bias += di * (kernel.col(i) - kernel.col(j));
            ++updates;
            improved = true;
          }
        }
      }
    }
    if (!improved)
      throw Error("svr: SMO stalled with KKT violation " +
                  format_full(max_violation));
  }

  SvrModel model;
  model.bias = bias_for(beta, out_no_bias, y, C, eps);
  model.kernel_width = sigma;
  model.C = C;
  model.epsilon_tube = eps;
  model.window_size = set.window_size;
  model.slide = set.slide;
  std::vector<double> coeffs;
  for (int g = 0; g < n; ++g) {
    if (beta[g] != 0.0) {
      model.support_features.push_back(set.features[g]);
      coeffs.push_back(beta[g]);
    }
  }
  model.dual_coefficients =
      Eigen::Map<const VecX>(coeffs.data(), coeffs.size());
  if (full_beta) *full_beta = beta;
  return model;
}

double predict(const SvrModel& model, const WindowFeature& x) {
  double f = model.bias;
  for (int g = 0; g < static_cast<int>(model.support_features.size()); ++g)
    f += model.dual_coefficients[g] *
         rbf_kernel(x, model.support_features[g], model.kernel_width);
  return f;
}

double max_kkt_violation(const SvrTrainingSet& set,
                         const Eigen::Ref<const VecX>& beta, double bias,
                         double C, double epsilon_tube, double sigma) {
  const int n = set.size();
  double worst = 0.0;
  for (int g = 0; g < n; ++g) {
    double f = bias;
    for (int q = 0; q < n; ++q)
      f += beta[q] * rbf_kernel(set.features[g], set.features[q], sigma);
    worst = std::max(
        violation_of(beta[g], f - set.targets[g], C, epsilon_tube), worst);
  }
  return worst;
}

ForecastResult forecast_until(const SvrModel& model, const DeiSeries& history,
                              double threshold, long cap) {
  const int l = model.window_size;
  if (l < 2) throw Error("forecast: model has no usable window size");
  if (history.length() < l)
    throw Error("forecast: history of length " +
                std::to_string(history.length()) +
                " is shorter than the window " + std::to_string(l));
  if (!std::isfinite(threshold)) throw Error("forecast: threshold not finite");
  if (cap < 1) throw Error("forecast: cap must be >= 1");

  std::vector<double> buffer(l);
  for (int i = 0; i < l; ++i)
    buffer[i] = history.values[history.length() - l + i];

  ForecastResult r;
  r.threshold = threshold;
  std::vector<double> predicted;
  for (long step = 1; step <= cap; ++step) {
    double mean = 0.0;
    for (double v : buffer) mean += v;
    mean /= l;
    double var = 0.0;
    for (double v : buffer) var += (v - mean) * (v - mean);
    var /= l;

    const double next = predict(model, {mean, var});
    predicted.push_back(next);
    if (next >= threshold) {
      r.crossed = true;
      r.steps = static_cast<int>(step);
      break;
    }
    buffer.erase(buffer.begin());
    buffer.push_back(next);
  }
  if (!r.crossed) r.steps = static_cast<int>(predicted.size());
  r.predicted = Eigen::Map<const VecX>(predicted.data(), predicted.size());
  return r;
}

void save_model(const std::filesystem::path& file, const SvrModel& m) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write SVR model: " + file.string());
  out << "SVR v1\n";
  out << "sigma " << format_full(m.kernel_width) << '\n';
  out << "C " << format_full(m.C) << '\n';
  out << "epsilon " << format_full(m.epsilon_tube) << '\n';
  out << "window " << m.window_size << ' ' << m.slide << '\n';
  out << "bias " << format_full(m.bias) << '\n';
  out << "support " << m.support_features.size() << '\n';
  for (int g = 0; g < static_cast<int>(m.support_features.size()); ++g)
    out << format_full(m.dual_coefficients[g]) << ' '
        << format_full(m.support_features[g].mean) << ' '
        << format_full(m.support_features[g].variance) << '\n';
}

SvrModel load_model(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open SVR model: " + file.string());
  std::string line;
  if (!std::getline(in, line) || line != "SVR v1")
    throw Error("SVR model " + file.string() +
                ": version mismatch, expected 'SVR v1'");
  SvrModel m;
  std::string word;
  long support = 0;
  if (!(in >> word >> m.kernel_width) || word != "sigma")
    throw Error("SVR model: expected sigma line");
  if (!(in >> word >> m.C) || word != "C")
    throw Error("SVR model: expected C line");
  if (!(in >> word >> m.epsilon_tube) || word != "epsilon")
    throw Error("SVR model: expected epsilon line");
  if (!(in >> word >> m.window_size >> m.slide) || word != "window")
    throw Error("SVR model: expected window line");
  if (!(in >> word >> m.bias) || word != "bias")
    throw Error("SVR model: expected bias line");
  if (!(in >> word >> support) || word != "support")
    throw Error("SVR model: expected support count");
  m.dual_coefficients = VecX(support);
  m.support_features.resize(support);
  for (long g = 0; g < support; ++g) {
    if (!(in >> m.dual_coefficients[g] >> m.support_features[g].mean >>
          m.support_features[g].variance))
      throw Error("SVR model: truncated support vector list at entry " +
                  std::to_string(g + 1));
  }
  return m;
}

void save_forecast(const std::filesystem::path& file, const ForecastResult& r) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write forecast file: " + file.string());
  out << "# FORECAST v1 steps=" << r.steps
      << " crossed=" << (r.crossed ? 1 : 0)
      << " threshold=" << format_full(r.threshold) << '\n';
  for (int i = 0; i < r.predicted.size(); ++i)
    out << (i + 1) << '\t' << format_full(r.predicted[i]) << '\n';
}

}  // namespace rulkit::svr
