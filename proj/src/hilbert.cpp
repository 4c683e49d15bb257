#include "rulkit/hilbert.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>

namespace rulkit::hht {

ArrX hilbert_transform(const Eigen::Ref<const ArrX>& x) {
  const Eigen::Index n = x.size();
  if (n < 2) throw Error("hilbert transform: need at least 2 samples");

  Eigen::VectorXcd time(n);
  for (Eigen::Index i = 0; i < n; ++i) time[i] = std::complex<double>(x[i], 0.0);

  Eigen::FFT<double> fft;
  Eigen::VectorXcd freq(n);
  fft.fwd(freq, time);

  // DC (and the Nyquist bin for even n) stay as they are.
  for (Eigen::Index k = 1; k < (n + 1) / 2; ++k) freq[k] *= 2.0;
  for (Eigen::Index k = n / 2 + 1; k < n; ++k) freq[k] = 0.0;

  fft.inv(time, freq);
  ArrX out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = time[i].imag();
  return out;
}

AnalyticSeries instantaneous_attributes(const Eigen::Ref<const ArrX>& imf,
                                        double sampling_frequency) {
  const Eigen::Index n = imf.size();
  if (n < 2) throw Error("instantaneous attributes: mode is too short");

  AnalyticSeries s;
  s.real_part = imf;
  s.imag_part = hilbert_transform(imf);
  s.amplitude = (s.real_part.square() + s.imag_part.square()).sqrt();

  s.phase = ArrX(n);
  double correction = 0.0;
  double prev_raw = std::atan2(s.imag_part[0], s.real_part[0]);
  s.phase[0] = prev_raw;
  for (Eigen::Index i = 1; i < n; ++i) {
    const double raw = std::atan2(s.imag_part[i], s.real_part[i]);
    double jump = raw - prev_raw;
    if (jump > M_PI)
      correction -= 2.0 * M_PI;
    else if (jump < -M_PI)
      correction += 2.0 * M_PI;
    s.phase[i] = raw + correction;
    prev_raw = raw;
  }

  const double nyquist = sampling_frequency / 2.0;
  const double scale = sampling_frequency / (2.0 * M_PI);
  s.frequency = ArrX(n);
  s.frequency[0] = (s.phase[1] - s.phase[0]) * scale;
  for (Eigen::Index i = 1; i + 1 < n; ++i)
    s.frequency[i] = (s.phase[i + 1] - s.phase[i - 1]) * 0.5 * scale;
  s.frequency[n - 1] = (s.phase[n - 1] - s.phase[n - 2]) * scale;
  s.frequency = s.frequency.max(0.0).min(nyquist);
  return s;
}

}  // namespace rulkit::hht
