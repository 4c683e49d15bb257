#include "rulkit/emd.hpp"

#include "test_util.hpp"

#include <doctest.h>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>

using namespace rulkit;
using namespace rulkit::hht;
using testutil::correlation;
using testutil::tone;

namespace {

constexpr double kFs = 25600.0;
constexpr int kN = 2560;

// Independent FFT-peak oracle: dominant frequency of a series in Hz.
double fft_peak_hz(const ArrX& x, double fs) {
  Eigen::FFT<double> fft;
  Eigen::VectorXcd in(x.size()), out(x.size());
  for (int i = 0; i < x.size(); ++i) in[i] = std::complex<double>(x[i], 0.0);
  fft.fwd(out, in);
  int best = 1;
  double best_mag = 0.0;
  for (int k = 1; k <= x.size() / 2; ++k) {
    const double mag = std::abs(out[k]);
    if (mag > best_mag) {
      best_mag = mag;
      best = k;
    }
  }
  return best * fs / x.size();
}

double max_relative_reconstruction_error(const ImfSet& set, const ArrX& x) {
  ArrX sum = set.residual;
  for (const auto& imf : set.imfs) sum += imf.values;
  const double scale = x.abs().maxCoeff();
  return scale > 0 ? (sum - x).abs().maxCoeff() / scale : 0.0;
}

}  // namespace

TEST_SUITE("emd") {

TEST_CASE("extrema detection handles plateaus and interior points") {
  ArrX x(9);
  x << 0, 1, 0, -1, -1, 0, 2, 2, 0;
  const auto e = find_extrema(x);
  REQUIRE(e.maxima.size() == 2);
  CHECK(e.maxima[0] == 1);
  CHECK(e.maxima[1] == 6);  // middle of the 2,2 plateau rounds down
  REQUIRE(e.minima.size() == 1);
  CHECK(e.minima[0] == 3);  // plateau -1,-1 centred between 3 and 4
}

TEST_CASE("zero crossing count ignores exact zeros") {
  ArrX x(7);
  x << 1, 0, -1, 1, 0, 0, 2;
  CHECK(zero_crossings(x) == 2);  // + -> - -> + with zeros skipped
}

TEST_CASE("natural spline matches a hand-solved system") {
  // Knots (0,0), (2,1), (4,0): the single interior second derivative is
  // -0.75, giving S(1) = 0.6875.
  const auto y = spline_at_samples({0.0, 2.0, 4.0}, {0.0, 1.0, 0.0}, 5);
  CHECK(y[0] == doctest::Approx(0.0));
  CHECK(y[2] == doctest::Approx(1.0));
  CHECK(y[4] == doctest::Approx(0.0));
  CHECK(y[1] == doctest::Approx(0.6875));
  CHECK(y[3] == doctest::Approx(0.6875));
}

TEST_CASE("pure tone sifts to itself") {
  const ArrX x = tone(1.0, 200.0, kFs, kN);
  const auto r = sift(x);
  CHECK(correlation(r.imf, x) > 0.99);
  CHECK(r.remainder.abs().maxCoeff() < 0.01);
}

TEST_CASE("constant signal is not siftable") {
  const ArrX x = ArrX::Constant(64, 3.0);
  CHECK_FALSE(is_siftable(x));
  CHECK_THROWS_WITH_AS(sift(x), doctest::Contains("not siftable"), Error);
}

TEST_CASE("two-tone mixture separates the fast tone first") {
  const ArrX fast = tone(1.0, 800.0, kFs, kN);
  const ArrX slow = tone(0.5, 60.0, kFs, kN);
  const ArrX x = fast + slow;
  const auto r = sift(x);
  // Compare away from the boundary 5% of samples.
  const int margin = kN / 20;
  const int middle = kN - 2 * margin;
  CHECK(correlation(r.imf.segment(margin, middle),
                    fast.segment(margin, middle)) > 0.95);
}

TEST_CASE("emd of two tones recovers both dominant frequencies") {
  const ArrX x = tone(1.0, 800.0, kFs, kN) + tone(0.5, 60.0, kFs, kN);
  const auto set = emd(x);
  REQUIRE(set.imfs.size() >= 2);
  CHECK(fft_peak_hz(set.imfs[0].values, kFs) == doctest::Approx(800.0).epsilon(0.05));
  // The slow tone may land in mode 2 or 3 depending on how cleanly the
  // fast tone peeled off; find it by the FFT oracle.
  bool found_slow = false;
  for (std::size_t j = 1; j < set.imfs.size(); ++j) {
    const double peak = fft_peak_hz(set.imfs[j].values, kFs);
    if (std::abs(peak - 60.0) < 10.0 &&
        set.imfs[j].values.abs().maxCoeff() > 0.25)
      found_slow = true;
  }
  CHECK(found_slow);
  CHECK(max_relative_reconstruction_error(set, x) < 1e-10);
}

TEST_CASE("monotone ramp yields no modes") {
  ArrX ramp(64);
  for (int i = 0; i < 64; ++i) ramp[i] = 0.25 * i - 3.0;
  const auto set = emd(ramp);
  CHECK(set.imfs.empty());
  CHECK((set.residual == ramp).all());
}

TEST_CASE("white noise decomposes like a dyadic filter bank") {
  Rng rng(20240817);
  ArrX x(kN);
  for (int i = 0; i < kN; ++i) x[i] = rng.gaussian();
  const auto set = emd(x);
  CHECK(set.imfs.size() >= 6);
  CHECK(set.imfs.size() <= 12);
  CHECK(max_relative_reconstruction_error(set, x) < 1e-10);
  // Modes must order fast to slow: FFT peaks should broadly decrease.
  double prev = 1e18;
  int inversions = 0;
  for (const auto& imf : set.imfs) {
    const double peak = fft_peak_hz(imf.values, kFs);
    if (peak > prev * 1.5) ++inversions;
    prev = peak;
  }
  CHECK(inversions <= 1);
}

TEST_CASE("every returned mode passes the two conditions") {
  Rng rng(99);
  std::vector<ArrX> signals;
  signals.push_back(tone(1.0, 400.0, kFs, kN));
  signals.push_back(tone(1.0, 800.0, kFs, kN) + tone(0.4, 90.0, kFs, kN));
  ArrX noise(kN);
  for (int i = 0; i < kN; ++i) noise[i] = rng.gaussian();
  signals.push_back(noise);
  for (const auto& x : signals) {
    const auto set = emd(x);
    for (const auto& imf : set.imfs) {
      const auto check = check_imf(imf.values);
      CHECK(check.count_ok);
      CHECK(check.envelope_ok);
    }
  }
}

}  // TEST_SUITE
