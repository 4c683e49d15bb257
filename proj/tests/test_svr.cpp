#include "rulkit/svr.hpp"

#include "svr_oracle.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

using namespace rulkit;
using namespace rulkit::svr;
using testutil::TempDir;
using svr_oracle::OracleResult;
using svr_oracle::oracle_predict;
using svr_oracle::solve_oracle;

namespace {

DeiSeries series_of(std::initializer_list<double> v) {
  DeiSeries s;
  s.values = VecX(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) s.values[i++] = x;
  s.unit_interval = 10.0;
  s.normalized = true;
  s.norm_min = 0.0;
  s.norm_max = 1.0;
  s.norm_eps = 1e-6;
  return s;
}

SvrTrainingSet random_set(int n, Rng& rng) {
  SvrTrainingSet set;
  set.window_size = 4;
  set.slide = 1;
  set.targets = VecX(n);
  for (int i = 0; i < n; ++i) {
    set.features.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 0.2)});
    set.targets[i] = rng.uniform(0.0, 1.0);
  }
  return set;
}

}  // namespace

TEST_SUITE("svr") {

TEST_CASE("window features on a short hand case") {
  const auto set = window_features(series_of({1, 2, 3, 4}), 2, 1);
  REQUIRE(set.size() == 2);
  CHECK(set.features[0].mean == doctest::Approx(1.5));
  CHECK(set.features[0].variance == doctest::Approx(0.25));
  CHECK(set.features[1].mean == doctest::Approx(2.5));
  CHECK(set.features[1].variance == doctest::Approx(0.25));
  CHECK(set.targets[0] == doctest::Approx(3.0));
  CHECK(set.targets[1] == doctest::Approx(4.0));
}

TEST_CASE("window count matches the published setting") {
  DeiSeries s;
  s.values = VecX::LinSpaced(871, 0.0, 1.0);
  s.unit_interval = 10.0;
  const auto set = window_features(s, 50, 1);
  CHECK(set.size() == 821);  // Q - l for unit slide
}

TEST_CASE("constant series gives zero-variance features") {
  const auto set = window_features(series_of({2, 2, 2, 2, 2}), 3, 1);
  for (const auto& f : set.features) {
    CHECK(f.mean == doctest::Approx(2.0));
    CHECK(f.variance == 0.0);
  }
  CHECK((set.targets.array() == 2.0).all());
}

TEST_CASE("series shorter than the window is rejected") {
  CHECK_THROWS_WITH_AS(window_features(series_of({1, 2, 3}), 3, 1),
                       doctest::Contains("too short"), Error);
}

TEST_CASE("kernel value identities") {
  const WindowFeature a{0.4, 0.02};
  CHECK(rbf_kernel(a, a, 1.3) == doctest::Approx(1.0));
  // distance^2 equal to 2 sigma^2 gives e^-1
  const double sigma = 0.7;
  const WindowFeature b{a.mean + sigma * std::sqrt(2.0), a.variance};
  CHECK(rbf_kernel(a, b, sigma) == doctest::Approx(std::exp(-1.0)));
  CHECK(rbf_kernel(a, b, sigma) == rbf_kernel(b, a, sigma));
  CHECK_THROWS_AS(rbf_kernel(a, b, 0.0), Error);
}

TEST_CASE("kernel matrices are positive semidefinite") {
  Rng rng(444);
  std::vector<WindowFeature> pts;
  for (int i = 0; i < 5; ++i)
    pts.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 0.3)});
  MatX k(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) k(i, j) = rbf_kernel(pts[i], pts[j], 0.5);
  Eigen::SelfAdjointEigenSolver<MatX> eigen(k);
  CHECK(eigen.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("all-inside-tube targets give the trivial model") {
  SvrTrainingSet set;
  set.window_size = 3;
  set.slide = 1;
  for (int i = 0; i < 6; ++i) set.features.push_back({0.1 * i, 0.01});
  set.targets = VecX::Constant(6, 0.4);
  SvrParams params;
  params.epsilon_tube = 0.05;
  params.sigma = 0.3;
  VecX beta;
  const SvrModel model = train_svr(set, params, &beta);
  CHECK(beta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(model.support_features.empty());
  CHECK(model.bias == doctest::Approx(0.4));
  CHECK(predict(model, {0.9, 0.0}) == doctest::Approx(0.4));
}

TEST_CASE("six-point instance matches the dense QP oracle") {
  Rng rng(606);
  const auto set = random_set(6, rng);
  SvrParams params;
  params.C = 5.09;
  params.epsilon_tube = 0.01;
  params.sigma = 0.4;
  VecX beta;
  const SvrModel model = train_svr(set, params, &beta);
  const OracleResult oracle =
      solve_oracle(set, params.C, params.epsilon_tube, params.sigma);

  const double impl_obj =
      dual_objective(set, beta, params.epsilon_tube, params.sigma);
  CHECK(impl_obj >= oracle.objective - 1e-6);
  for (int g = 0; g < set.size(); ++g) {
    const double mine = predict(model, set.features[g]);
    const double theirs =
        oracle_predict(oracle, set, set.features[g], params.sigma);
    CHECK(std::abs(mine - theirs) < 1e-3);
  }
}

TEST_CASE("fixture sweep: optimality, feasibility, complementarity") {
  Rng rng(31337);
  const double cs[] = {0.5, 5.09};
  const double tubes[] = {0.0, 0.01, 0.1};
  for (int n = 2; n <= 8; ++n) {
    for (double c_val : cs) {
      for (double tube : tubes) {
        const auto set = random_set(n, rng);
        SvrParams params;
        params.C = c_val;
        params.epsilon_tube = tube;
        params.sigma = 0.5;
        VecX beta;
        const SvrModel model = train_svr(set, params, &beta);

        // dual feasibility: box and equality
        CHECK(beta.maxCoeff() <= c_val + 1e-9);
        CHECK(beta.minCoeff() >= -c_val - 1e-9);
        CHECK(std::abs(beta.sum()) < 1e-8);
        // complementary slackness of the split variables
        for (int g = 0; g < n; ++g) {
          const double a_hat = std::max(beta[g], 0.0);
          const double a_reg = std::max(-beta[g], 0.0);
          CHECK(a_hat * a_reg < 1e-12);
          CHECK(a_hat <= c_val + 1e-9);
          CHECK(a_reg <= c_val + 1e-9);
        }
        // KKT optimality at the reported bias
        CHECK(max_kkt_violation(set, beta, model.bias, c_val, tube,
                                params.sigma) < 1e-6);
        // dual objective no worse than the oracle's
        const OracleResult oracle = solve_oracle(set, c_val, tube, params.sigma);
        const double impl_obj = dual_objective(set, beta, tube, params.sigma);
        CHECK(impl_obj >= oracle.objective - 1e-6);
        for (int g = 0; g < n; ++g)
          CHECK(std::abs(predict(model, set.features[g]) -
                         oracle_predict(oracle, set, set.features[g],
                                        params.sigma)) < 1e-3);
      }
    }
  }
}

TEST_CASE("unbounded support vectors sit on the tube") {
  Rng rng(88);
  const auto set = random_set(12, rng);
  SvrParams params;
  params.C = 2.0;
  params.epsilon_tube = 0.02;
  params.sigma = 0.4;
  VecX beta;
  const SvrModel model = train_svr(set, params, &beta);
  for (int g = 0; g < set.size(); ++g) {
    if (std::abs(beta[g]) < params.C - 1e-9) {
      CHECK(std::abs(predict(model, set.features[g]) - set.targets[g]) <=
            params.epsilon_tube + 1e-6);
    }
  }
}

TEST_CASE("median heuristic fills in the kernel width") {
  Rng rng(5150);
  const auto set = random_set(10, rng);
  SvrParams params;  // sigma <= 0 selects the heuristic
  params.sigma = 0.0;
  const SvrModel model = train_svr(set, params);
  CHECK(model.kernel_width ==
        doctest::Approx(median_pairwise_distance(set.features)));
  CHECK(model.kernel_width > 0.0);
}

TEST_CASE("prediction is the kernel expansion") {
  SvrModel model;
  model.bias = 0.7;
  model.kernel_width = 0.5;
  model.window_size = 4;
  model.dual_coefficients = VecX(0);
  CHECK(predict(model, {0.3, 0.1}) == doctest::Approx(0.7));

  model.support_features.push_back({0.3, 0.1});
  model.dual_coefficients = VecX(1);
  model.dual_coefficients << 1.9;
  CHECK(predict(model, {0.3, 0.1}) == doctest::Approx(1.9 + 0.7));

  // random point against a direct evaluation of the expansion
  Rng rng(9);
  model.support_features.push_back({0.8, 0.05});
  model.dual_coefficients = VecX(2);
  model.dual_coefficients << 1.9, -0.4;
  const WindowFeature x{rng.uniform(0.0, 1.0), rng.uniform(0.0, 0.2)};
  double expected = model.bias;
  for (int g = 0; g < 2; ++g)
    expected += model.dual_coefficients[g] *
                std::exp(-(std::pow(x.mean - model.support_features[g].mean, 2) +
                           std::pow(x.variance -
                                    model.support_features[g].variance, 2)) /
                         (2.0 * model.kernel_width * model.kernel_width));
  CHECK(predict(model, x) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("prediction is locally Lipschitz in the feature") {
  Rng rng(77);
  const auto set = random_set(8, rng);
  SvrParams params;
  params.sigma = 0.4;
  const SvrModel model = train_svr(set, params);
  const double coeff_sum = model.dual_coefficients.cwiseAbs().sum();
  const double bound_rate = coeff_sum * std::exp(-0.5) / model.kernel_width;
  for (int trial = 0; trial < 20; ++trial) {
    const WindowFeature x{rng.uniform(0.0, 1.0), rng.uniform(0.0, 0.2)};
    const double delta = 1e-6;
    const WindowFeature x2{x.mean + delta, x.variance};
    CHECK(std::abs(predict(model, x2) - predict(model, x)) <=
          bound_rate * delta + 1e-9);
  }
}

TEST_CASE("constant forecasters cross immediately or never") {
  SvrModel model;
  model.bias = 0.9;
  model.kernel_width = 1.0;
  model.window_size = 5;
  model.dual_coefficients = VecX(0);
  const auto history = series_of({0.1, 0.2, 0.3, 0.4, 0.5, 0.6});

  const auto crossed = forecast_until(model, history, 0.9, 100);
  CHECK(crossed.crossed);
  CHECK(crossed.steps == 1);
  CHECK(crossed.predicted.size() == 1);
  CHECK(crossed.predicted[0] == doctest::Approx(0.9));

  const auto capped = forecast_until(model, history, 0.95, 37);
  CHECK_FALSE(capped.crossed);
  CHECK(capped.steps == 37);
  CHECK(capped.predicted.size() == 37);
}

TEST_CASE("forecast depends only on the last window of history") {
  Rng rng(303);
  DeiSeries train;
  train.values = VecX::LinSpaced(60, 0.05, 0.85);
  train.unit_interval = 10.0;
  const auto set = window_features(train, 8, 1);
  SvrParams params;
  params.sigma = 0.0;
  const SvrModel model = train_svr(set, params);

  DeiSeries long_history;
  long_history.values = VecX(20);
  for (int i = 0; i < 12; ++i) long_history.values[i] = rng.uniform(0.0, 1.0);
  for (int i = 12; i < 20; ++i)
    long_history.values[i] = train.values[40 + (i - 12)];
  DeiSeries short_history;
  short_history.values = long_history.values.tail(8);

  const auto a = forecast_until(model, long_history, 2.0, 25);
  const auto b = forecast_until(model, short_history, 2.0, 25);
  REQUIRE(a.predicted.size() == b.predicted.size());
  CHECK((a.predicted - b.predicted).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rising series forecast reaches the threshold") {
  DeiSeries train;
  train.values = VecX::LinSpaced(80, 0.05, 0.9);
  train.unit_interval = 10.0;
  const auto set = window_features(train, 10, 1);
  SvrParams params;
  params.epsilon_tube = 0.005;
  const SvrModel model = train_svr(set, params);

  DeiSeries history;
  history.values = train.values.head(60);
  history.unit_interval = 10.0;
  const auto result = forecast_until(model, history, 0.85, 10000);
  CHECK(result.crossed);
  CHECK(result.steps >= 1);
  // Stopping rule: everything before the crossing sits below the threshold.
  for (int i = 0; i + 1 < result.predicted.size(); ++i)
    CHECK(result.predicted[i] < 0.85);
  CHECK(result.predicted[result.predicted.size() - 1] >= 0.85);
}

TEST_CASE("history shorter than the window is rejected") {
  SvrModel model;
  model.window_size = 10;
  model.kernel_width = 1.0;
  CHECK_THROWS_WITH_AS(
      forecast_until(model, series_of({0.1, 0.2}), 0.5, 10),
      doctest::Contains("shorter"), Error);
}

TEST_CASE("exhausted pair budget raises a non-convergence error") {
  Rng rng(11);
  const auto set = random_set(8, rng);
  SvrParams params;
  params.sigma = 0.4;
  params.max_pair_updates = 1;
  CHECK_THROWS_WITH_AS(train_svr(set, params), doctest::Contains("violation"),
                       Error);
}

TEST_CASE("model file round trip") {
  TempDir dir("svr_model");
  Rng rng(3);
  const auto set = random_set(10, rng);
  SvrParams params;
  params.C = 5.09;
  params.epsilon_tube = 0.01;
  params.sigma = 0.0;
  const SvrModel model = train_svr(set, params);
  save_model(dir.path() / "svr.txt", model);
  const SvrModel back = load_model(dir.path() / "svr.txt");
  CHECK(back.bias == model.bias);
  CHECK(back.kernel_width == model.kernel_width);
  CHECK(back.C == model.C);
  CHECK(back.epsilon_tube == model.epsilon_tube);
  CHECK(back.window_size == model.window_size);
  REQUIRE(back.support_features.size() == model.support_features.size());
  for (int trial = 0; trial < 10; ++trial) {
    const WindowFeature x{rng.uniform(0.0, 1.0), rng.uniform(0.0, 0.2)};
    CHECK(predict(back, x) == predict(model, x));
  }
}

TEST_CASE("svr model version and truncation errors") {
  TempDir dir("svr_bad");
  testutil::write_file(dir.path() / "svr.txt", "SVR v7\n");
  CHECK_THROWS_WITH_AS(load_model(dir.path() / "svr.txt"),
                       doctest::Contains("version"), Error);
  testutil::write_file(dir.path() / "svr2.txt",
                       "SVR v1\nsigma 1\nC 5\nepsilon 0.01\nwindow 50 1\n"
                       "bias 0.5\nsupport 3\n0.1 0.2 0.3\n");
  CHECK_THROWS_WITH_AS(load_model(dir.path() / "svr2.txt"),
                       doctest::Contains("truncated"), Error);
}

}  // TEST_SUITE
