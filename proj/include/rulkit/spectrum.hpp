#pragma once

#include "rulkit/bearing.hpp"
#include "rulkit/dei.hpp"
#include "rulkit/emd.hpp"
#include "rulkit/hilbert.hpp"
#include "rulkit/run.hpp"

namespace rulkit::hht {

// Uniform frequency grid covering [0, fs/2] with bin width fs / p.
struct FrequencyGrid {
  double delta_f = 0.0;
  int bins = 0;
  double sampling_frequency = 0.0;

  static FrequencyGrid for_snapshot(double sampling_frequency,
                                    int snapshot_length);
  int bin_of(double frequency) const;  // nearest bin, clamped to the grid
};

// Time-frequency amplitude deposit: mass(bin, t) accumulates the
// instantaneous amplitude of every mode whose instantaneous frequency falls
// in that bin at sample t.
struct HilbertSpectrum {
  FrequencyGrid grid;
  MatX mass;  // bins x samples
};

// Time integral of the Hilbert spectrum (rectangle rule, dt = 1/fs);
// per-bin amplitude-seconds.
struct MarginalSpectrum {
  FrequencyGrid grid;
  VecX mass;
};

HilbertSpectrum hilbert_spectrum(const ImfSet& imfs, const FrequencyGrid& grid);

MarginalSpectrum marginal_spectrum(const HilbertSpectrum& hs);

// Degradation energy indicator of one snapshot: the largest marginal mass
// within +-band bins of any of the three characteristic frequencies.
// Frequencies at or above Nyquist are out of band.
double dei(const MarginalSpectrum& ms, const CharacteristicFrequencies& cf,
           int band = 2);

struct HhtParams {
  SiftParams sift;
  int dei_band = 2;
};

// emd -> hilbert_spectrum -> marginal_spectrum -> dei per snapshot, in index
// order. Per-snapshot failures are rethrown with the snapshot index attached.
DeiSeries dei_series(const BearingRun& run, const CharacteristicFrequencies& cf,
                     const HhtParams& params = {});

// Single-snapshot variant of the chain above.
double dei_of_snapshot(const VibrationSnapshot& snap,
                       const OperatingCondition& condition,
                       const CharacteristicFrequencies& cf,
                       const HhtParams& params = {});

}  // namespace rulkit::hht
