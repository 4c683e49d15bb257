#include "rulkit/spectrum.hpp"
#include "rulkit/synth.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace rulkit;
using namespace rulkit::hht;
using testutil::TempDir;
using testutil::tone;

namespace {

constexpr double kFs = 25600.0;
constexpr int kN = 2560;

BearingGeometry rig_geometry() { return {13, 3.5, 25.6, 0.0}; }

CharacteristicFrequencies rig_frequencies() {
  OperatingCondition c;
  c.rotation_frequency = 30.0;
  c.radial_load = 4000.0;
  c.sampling_frequency = kFs;
  c.snapshot_length = kN;
  c.snapshot_interval = 10.0;
  return characteristic_frequencies(rig_geometry(), c);
}

ImfSet single_mode(const ArrX& x) {
  ImfSet set;
  set.imfs.push_back({x, 1});
  set.residual = ArrX::Zero(x.size());
  return set;
}

// Condition scaled down for fast synthetic-run tests; the grid keeps the
// rig's 10 Hz bin width.
SynthSpec trend_spec() {
  SynthSpec s;
  s.geometry = rig_geometry();
  s.condition.rotation_frequency = 30.0;
  s.condition.radial_load = 4000.0;
  s.condition.sampling_frequency = 10240.0;
  s.condition.snapshot_length = 1024;
  s.condition.snapshot_interval = 10.0;
  s.fault = SynthSpec::Fault::Outer;
  s.impulse_base = 0.05;
  // Per-unit growth well above the per-snapshot mass fluctuation caused by
  // the random impulse phase (+-1 impulse per window).
  s.impulse_growth = 0.05;
  s.resonance_frequency = 1600.0;
  s.ringdown_decay = 2000.0;
  s.noise_level = 0.002;
  s.failure_level = 2.0;
  s.length = 120;
  return s;
}

VecX moving_average(const VecX& v, int window) {
  VecX out(v.size() - window + 1);
  for (int i = 0; i < out.size(); ++i) out[i] = v.segment(i, window).mean();
  return out;
}

}  // namespace

TEST_SUITE("spectrum") {

TEST_CASE("grid tone deposits every sample in one frequency row") {
  const auto grid = FrequencyGrid::for_snapshot(kFs, kN);
  CHECK(grid.delta_f == doctest::Approx(10.0));
  CHECK(grid.bins == kN / 2 + 1);

  const ArrX x = tone(1.0, 200.0, kFs, kN);
  const auto hs = hilbert_spectrum(single_mode(x), grid);
  const int row = grid.bin_of(200.0);
  const double total = hs.mass.sum();
  CHECK(hs.mass.row(row).sum() == doctest::Approx(total).epsilon(1e-9));
}

TEST_CASE("two modes dominate their own rows") {
  const auto grid = FrequencyGrid::for_snapshot(kFs, kN);
  ImfSet set;
  set.imfs.push_back({tone(1.0, 800.0, kFs, kN), 1});
  set.imfs.push_back({tone(0.5, 60.0, kFs, kN), 2});
  set.residual = ArrX::Zero(kN);
  const auto hs = hilbert_spectrum(set, grid);

  const int fast_row = grid.bin_of(800.0);
  const int slow_row = grid.bin_of(60.0);
  const double fast_total = 1.0 * kN;  // per-mode amplitude deposit
  const double slow_total = 0.5 * kN;
  CHECK(hs.mass.row(fast_row).sum() > 0.9 * fast_total);
  CHECK(hs.mass.row(slow_row).sum() > 0.9 * slow_total);
}

TEST_CASE("empty decomposition gives an all-zero spectrum") {
  const auto grid = FrequencyGrid::for_snapshot(kFs, kN);
  ImfSet set;
  set.residual = ArrX::Zero(kN);
  const auto hs = hilbert_spectrum(set, grid);
  CHECK(hs.mass.sum() == 0.0);
  const auto ms = marginal_spectrum(hs);
  CHECK(ms.mass.sum() == 0.0);
  CHECK((ms.mass.array() >= 0.0).all());
}

TEST_CASE("marginal mass of a tone approximates amplitude times duration") {
  const double amplitude = 2.5;
  const auto grid = FrequencyGrid::for_snapshot(kFs, kN);
  const auto hs =
      hilbert_spectrum(single_mode(tone(amplitude, 500.0, kFs, kN)), grid);
  const auto ms = marginal_spectrum(hs);
  const double expected = amplitude * kN / kFs;  // A * T
  CHECK(ms.mass[grid.bin_of(500.0)] == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("marginal is homogeneous in the mode amplitudes") {
  const auto grid = FrequencyGrid::for_snapshot(kFs, kN);
  ImfSet set;
  set.imfs.push_back({tone(1.0, 300.0, kFs, kN), 1});
  set.imfs.push_back({tone(0.7, 1500.0, kFs, kN), 2});
  set.residual = ArrX::Zero(kN);
  const double c = 3.7;
  ImfSet scaled;
  scaled.imfs.push_back({c * set.imfs[0].values, 1});
  scaled.imfs.push_back({c * set.imfs[1].values, 2});
  scaled.residual = set.residual;

  const auto base = marginal_spectrum(hilbert_spectrum(set, grid));
  const auto big = marginal_spectrum(hilbert_spectrum(scaled, grid));
  CHECK((big.mass - c * base.mass).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("indicator picks the constructed singleton spike") {
  const auto cf = rig_frequencies();
  MarginalSpectrum ms;
  ms.grid = FrequencyGrid::for_snapshot(kFs, kN);
  ms.mass = VecX::Zero(ms.grid.bins);
  ms.mass[ms.grid.bin_of(cf.outer)] = 7.2;
  CHECK(dei(ms, cf) == doctest::Approx(7.2));

  ms.mass.setZero();
  CHECK(dei(ms, cf) == 0.0);
}

TEST_CASE("indicator is symmetric in the three frequencies") {
  const auto cf = rig_frequencies();
  MarginalSpectrum ms;
  ms.grid = FrequencyGrid::for_snapshot(kFs, kN);
  ms.mass = VecX::Zero(ms.grid.bins);
  ms.mass[ms.grid.bin_of(cf.inner)] = 1.25;
  ms.mass[ms.grid.bin_of(cf.ball)] = 0.5;
  CharacteristicFrequencies shuffled{cf.ball, cf.inner, cf.outer};
  CHECK(dei(ms, cf) == dei(ms, shuffled));
}

TEST_CASE("frequencies beyond the grid band are rejected") {
  MarginalSpectrum ms;
  ms.grid = FrequencyGrid::for_snapshot(kFs, kN);
  ms.mass = VecX::Zero(ms.grid.bins);
  CharacteristicFrequencies off{221.7, 168.3, kFs};  // ball beyond Nyquist
  CHECK_THROWS_WITH_AS(dei(ms, off), doctest::Contains("outside the grid"),
                       Error);
}

TEST_CASE("degrading synthetic run drives a rising indicator") {
  const auto spec = trend_spec();
  const auto run = synthesize_run(spec, 2024);
  const auto cf = characteristic_frequencies(spec.geometry, spec.condition);
  const auto series = dei_series(run, cf);
  REQUIRE(series.length() == spec.length);

  // Trend oracle: smoothed with window 20, the indicator is nondecreasing
  // while the impulse amplitude grows exponentially.
  const VecX smooth = moving_average(series.values, 20);
  for (int i = 1; i < smooth.size(); ++i) CHECK(smooth[i] >= smooth[i - 1]);
  // Growth dominates: the amplitude profile multiplies ~36x over the run.
  CHECK(series.values[series.length() - 1] / series.values[0] > 5.0);
}

TEST_CASE("series of a single snapshot has length one") {
  auto spec = trend_spec();
  spec.length = 1;
  const auto run = synthesize_run(spec, 7);
  const auto cf = characteristic_frequencies(spec.geometry, spec.condition);
  CHECK(dei_series(run, cf).length() == 1);
}

TEST_CASE("identical snapshots give identical indicator values") {
  auto spec = trend_spec();
  spec.length = 1;
  auto run = synthesize_run(spec, 7);
  for (int i = 2; i <= 5; ++i) {
    auto copy = run.snapshots[0];
    copy.index = i;
    run.snapshots.push_back(copy);
  }
  const auto cf = characteristic_frequencies(spec.geometry, spec.condition);
  const auto series = dei_series(run, cf);
  REQUIRE(series.length() == 5);
  for (int i = 1; i < 5; ++i) CHECK(series.values[i] == series.values[0]);
}

TEST_CASE("normalization maps endpoints onto the clamp") {
  DeiSeries s;
  s.values = VecX(3);
  s.values << 2.0, 4.0, 6.0;
  s.unit_interval = 10.0;
  const auto n = normalize(s, 1e-6);
  CHECK(n.values[0] == doctest::Approx(1e-6));
  CHECK(n.values[1] == doctest::Approx(0.5));
  CHECK(n.values[2] == doctest::Approx(1.0 - 1e-6));
  CHECK(n.normalized);
  CHECK(n.norm_min == doctest::Approx(2.0));
  CHECK(n.norm_max == doctest::Approx(6.0));
}

TEST_CASE("constant series cannot be normalized") {
  DeiSeries s;
  s.values = VecX::Constant(5, 1.5);
  CHECK_THROWS_WITH_AS(normalize(s, 1e-6), doctest::Contains("degenerate"),
                       Error);
}

TEST_CASE("normalization preserves order and the arg extrema") {
  Rng rng(13);
  DeiSeries s;
  s.values = VecX(40);
  for (int i = 0; i < 40; ++i) s.values[i] = rng.uniform(0.0, 9.0);
  const auto n = normalize(s, 1e-6);
  int arg_min_before = 0, arg_max_before = 0, arg_min_after = 0,
      arg_max_after = 0;
  s.values.minCoeff(&arg_min_before);
  s.values.maxCoeff(&arg_max_before);
  n.values.minCoeff(&arg_min_after);
  n.values.maxCoeff(&arg_max_after);
  CHECK(arg_min_before == arg_min_after);
  CHECK(arg_max_before == arg_max_after);
  for (int i = 1; i < 40; ++i) {
    if (s.values[i] > s.values[i - 1]) CHECK(n.values[i] >= n.values[i - 1]);
    if (s.values[i] < s.values[i - 1]) CHECK(n.values[i] <= n.values[i - 1]);
  }
}

TEST_CASE("normalized series reuses its mapping on another run") {
  DeiSeries train;
  train.values = VecX(3);
  train.values << 1.0, 3.0, 5.0;
  const auto n = normalize(train, 1e-6);

  DeiSeries test;
  test.values = VecX(2);
  test.values << 2.0, 7.0;  // beyond the training max clamps
  const auto m = normalize_with(test, n.norm_min, n.norm_max, n.norm_eps);
  CHECK(m.values[0] == doctest::Approx(0.25));
  CHECK(m.values[1] == doctest::Approx(1.0 - 1e-6));
}

TEST_CASE("indicator series file round trip") {
  TempDir dir("dei");
  DeiSeries s;
  s.values = VecX(4);
  s.values << 0.25, 0.5, 0.75, 0.9756;
  s.normalized = true;
  s.norm_min = 0.1;
  s.norm_max = 9.7;
  s.norm_eps = 1e-6;
  s.unit_interval = 10.0;
  save_dei(dir.path() / "dei.tsv", s);
  const auto back = load_dei(dir.path() / "dei.tsv");
  REQUIRE(back.length() == 4);
  CHECK((back.values - s.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.normalized == s.normalized);
  CHECK(back.norm_min == s.norm_min);
  CHECK(back.norm_max == s.norm_max);
  CHECK(back.norm_eps == s.norm_eps);
  CHECK(back.unit_interval == s.unit_interval);
}

}  // TEST_SUITE
