#include "rulkit/spectrum.hpp"

#include <cmath>

namespace rulkit::hht {

FrequencyGrid FrequencyGrid::for_snapshot(double sampling_frequency,
                                          int snapshot_length) {
  if (!(sampling_frequency > 0.0) || snapshot_length <= 0)
    throw Error("frequency grid: need positive sampling frequency and length");
  FrequencyGrid g;
  g.sampling_frequency = sampling_frequency;
  g.delta_f = sampling_frequency / snapshot_length;
  g.bins = snapshot_length / 2 + 1;
  return g;
}

int FrequencyGrid::bin_of(double frequency) const {
  const long idx = std::lround(frequency / delta_f);
  if (idx < 0) return 0;
  if (idx >= bins) return bins - 1;
  return static_cast<int>(idx);
}

HilbertSpectrum hilbert_spectrum(const ImfSet& imfs, const FrequencyGrid& grid) {
  Eigen::Index samples = imfs.residual.size();
  for (const Imf& imf : imfs.imfs)
    samples = std::max(samples, imf.values.size());
  HilbertSpectrum hs;
  hs.grid = grid;
  hs.mass = MatX::Zero(grid.bins, samples);
  for (const Imf& imf : imfs.imfs) {
    const AnalyticSeries attrs =
        instantaneous_attributes(imf.values, grid.sampling_frequency);
    for (Eigen::Index t = 0; t < imf.values.size(); ++t)
      hs.mass(grid.bin_of(attrs.frequency[t]), t) += attrs.amplitude[t];
  }
  return hs;
}

MarginalSpectrum marginal_spectrum(const HilbertSpectrum& hs) {
  MarginalSpectrum ms;
  ms.grid = hs.grid;
  ms.mass = hs.mass.rowwise().sum() / hs.grid.sampling_frequency;
  return ms;
}

double dei(const MarginalSpectrum& ms, const CharacteristicFrequencies& cf,
           int band) {
  if (band < 0) throw Error("dei: band half-width must be >= 0");
  const double nyquist = ms.grid.sampling_frequency / 2.0;
  double best = 0.0;
  for (double f : {cf.inner, cf.outer, cf.ball}) {
    if (!(f > 0.0) || !(f < nyquist))
      throw Error("dei: characteristic frequency " + format_full(f) +
                  " Hz is outside the grid band (0, " + format_full(nyquist) +
                  ")");
    const int center = ms.grid.bin_of(f);
    const int lo = std::max(0, center - band);
    const int hi = std::min(ms.grid.bins - 1, center + band);
    best = std::max(best, ms.mass.segment(lo, hi - lo + 1).maxCoeff());
  }
  return best;
}

double dei_of_snapshot(const VibrationSnapshot& snap,
                       const OperatingCondition& condition,
                       const CharacteristicFrequencies& cf,
                       const HhtParams& params) {
  const auto grid = FrequencyGrid::for_snapshot(
      condition.sampling_frequency, static_cast<int>(snap.samples.size()));
  const ImfSet imfs = emd(snap.samples, params.sift);
  const HilbertSpectrum hs = hilbert_spectrum(imfs, grid);
  const MarginalSpectrum ms = marginal_spectrum(hs);
  return dei(ms, cf, params.dei_band);
}

DeiSeries dei_series(const BearingRun& run, const CharacteristicFrequencies& cf,
                     const HhtParams& params) {
  if (run.snapshots.empty()) throw Error("dei series: run is empty");
  DeiSeries series;
  series.unit_interval = run.condition.snapshot_interval;
  series.values = VecX(run.length());
  for (int i = 0; i < run.length(); ++i) {
    try {
      series.values[i] =
          dei_of_snapshot(run.snapshots[i], run.condition, cf, params);
    } catch (const Error& e) {
      throw Error("snapshot " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return series;
}

}  // namespace rulkit::hht
