#pragma once

#include "rulkit/common.hpp"

#include <vector>

namespace rulkit::hht {

struct SiftParams {
  // Cauchy-style stop: sum(envelope_mean^2) / sum(candidate^2) below this
  // accepts the candidate as an intrinsic mode function.
  double sd_tolerance = 0.2;
  int max_sifts = 10;  // hard cap of envelope subtractions per mode
  int max_imfs = 15;
};

// One intrinsic mode function: matched extrema / zero-crossing counts and
// near-zero local envelope mean.
struct Imf {
  ArrX values;
  int mode_index = 0;  // 1-based, fast to slow
};

// Full decomposition: modes ordered fast to slow plus the residual trend.
// values of all modes plus the residual reconstruct the input exactly up to
// floating-point rounding.
struct ImfSet {
  std::vector<Imf> imfs;
  ArrX residual;
};

struct Extrema {
  std::vector<int> maxima;
  std::vector<int> minima;
};

// Interior local extrema; plateaus contribute their middle sample.
Extrema find_extrema(const Eigen::Ref<const ArrX>& x);

int zero_crossings(const Eigen::Ref<const ArrX>& x);

// A signal can be sifted when both envelopes have at least two anchor
// points (>= 2 maxima and >= 2 minima).
bool is_siftable(const Eigen::Ref<const ArrX>& x);

// Mean of the upper and lower envelopes. Each envelope is a natural cubic
// spline through the extrema, extended with two mirror-reflected extrema
// per end to suppress end swings. Throws when the signal is not siftable.
ArrX envelope_mean(const Eigen::Ref<const ArrX>& x);

struct SiftResult {
  ArrX imf;
  ArrX remainder;  // input - imf
};

// Extracts one mode: repeatedly subtracts the envelope mean until the
// candidate satisfies the mode conditions (extrema/zero-crossing counts
// differ by at most one, envelope-mean energy ratio below sd_tolerance) or
// the sift cap is reached. Throws when the input is not siftable.
SiftResult sift(const Eigen::Ref<const ArrX>& signal,
                const SiftParams& params = {});

// Sifts the running remainder until it is no longer siftable (monotone
// trends and near-constant signals stop immediately, yielding an empty mode
// list with residual == signal).
ImfSet emd(const Eigen::Ref<const ArrX>& signal, const SiftParams& params = {});

struct ImfCheck {
  int extrema = 0;
  int crossings = 0;
  double sd = 0.0;  // envelope-mean energy ratio, 0 when not siftable
  bool count_ok = false;
  bool envelope_ok = false;
  bool ok = false;
};

// Evaluates the two mode conditions on an arbitrary series.
ImfCheck check_imf(const Eigen::Ref<const ArrX>& x,
                   const SiftParams& params = {});

// Natural cubic spline through (xs, ys), evaluated at integer sample
// positions 0..count-1. xs must be strictly increasing with >= 2 knots.
ArrX spline_at_samples(const std::vector<double>& xs,
                       const std::vector<double>& ys, int count);

}  // namespace rulkit::hht
