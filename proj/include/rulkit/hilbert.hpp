#pragma once

#include "rulkit/common.hpp"

namespace rulkit::hht {

// Discrete Hilbert transform via the analytic-signal spectral method:
// zero the negative frequencies, double the positive ones, inverse
// transform, take the imaginary part. For band-limited grid signals this
// matches the principal-value convolution with 1/(pi t).
ArrX hilbert_transform(const Eigen::Ref<const ArrX>& x);

// Instantaneous attributes of one mode.
struct AnalyticSeries {
  ArrX real_part;
  ArrX imag_part;
  ArrX amplitude;  // sqrt(real^2 + imag^2)
  ArrX phase;      // unwrapped radians
  ArrX frequency;  // Hz, clamped to [0, Nyquist]
};

// Amplitude from the analytic signal, phase by atan2 + 2*pi unwrapping,
// frequency by central differences of the phase (one-sided at the ends).
AnalyticSeries instantaneous_attributes(const Eigen::Ref<const ArrX>& imf,
                                        double sampling_frequency);

}  // namespace rulkit::hht
