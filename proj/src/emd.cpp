#include "rulkit/emd.hpp"

#include <cmath>

namespace rulkit::hht {

Extrema find_extrema(const Eigen::Ref<const ArrX>& x) {
  Extrema e;
  const Eigen::Index n = x.size();
  if (n < 3) return e;
  // Walk runs of equal values; an interior run higher (lower) than both
  // neighbours is a maximum (minimum) anchored at its middle sample.
  Eigen::Index run_start = 0;
  for (Eigen::Index i = 1; i <= n; ++i) {
    if (i < n && x[i] == x[run_start]) continue;
    const Eigen::Index run_end = i - 1;  // inclusive
    if (run_start > 0 && i < n) {
      const double prev = x[run_start - 1];
      const double next = x[i];
      const int mid = static_cast<int>((run_start + run_end) / 2);
      if (x[run_start] > prev && x[run_start] > next)
        e.maxima.push_back(mid);
      else if (x[run_start] < prev && x[run_start] < next)
        e.minima.push_back(mid);
    }
    run_start = i;
  }
  return e;
}

int zero_crossings(const Eigen::Ref<const ArrX>& x) {
  int count = 0;
  int last_sign = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const int s = x[i] > 0.0 ? 1 : (x[i] < 0.0 ? -1 : 0);
    if (s == 0) continue;
    if (last_sign != 0 && s != last_sign) ++count;
    last_sign = s;
  }
  return count;
}

bool is_siftable(const Eigen::Ref<const ArrX>& x) {
  if (x.size() < 4) return false;
  const Extrema e = find_extrema(x);
  return e.maxima.size() >= 2 && e.minima.size() >= 2;
}

ArrX spline_at_samples(const std::vector<double>& xs,
                       const std::vector<double>& ys, int count) {
  const int m = static_cast<int>(xs.size());
  if (m < 2) throw Error("spline: need at least 2 knots");
  ArrX out(count);
  if (m == 2) {
    const double slope = (ys[1] - ys[0]) / (xs[1] - xs[0]);
    for (int t = 0; t < count; ++t) out[t] = ys[0] + slope * (t - xs[0]);
    return out;
  }

  // Second derivatives of the natural spline via the Thomas algorithm.
  std::vector<double> h(m - 1);
  for (int i = 0; i + 1 < m; ++i) h[i] = xs[i + 1] - xs[i];
  std::vector<double> diag(m, 0.0), rhs(m, 0.0), m2(m, 0.0);
  for (int i = 1; i + 1 < m; ++i) {
    diag[i] = 2.0 * (h[i - 1] + h[i]);
    rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
  }
  for (int i = 2; i + 1 < m; ++i) {
    const double w = h[i - 1] / diag[i - 1];
    diag[i] -= w * h[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  for (int i = m - 2; i >= 1; --i)
    m2[i] = (rhs[i] - (i + 1 < m - 1 ? h[i] * m2[i + 1] : 0.0)) / diag[i];

  int seg = 0;
  for (int t = 0; t < count; ++t) {
    while (seg + 2 < m && xs[seg + 1] <= t) ++seg;
    const double hx = h[seg];
    const double a = (xs[seg + 1] - t) / hx;
    const double b = (t - xs[seg]) / hx;
    out[t] = a * ys[seg] + b * ys[seg + 1] +
             ((a * a * a - a) * m2[seg] + (b * b * b - b) * m2[seg + 1]) *
                 (hx * hx) / 6.0;
  }
  return out;
}

namespace {

// Spline envelope through the given extrema, mirror-extended with two
// reflected anchor points past each end of the signal.
ArrX envelope(const Eigen::Ref<const ArrX>& x, const std::vector<int>& idx) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(idx.size());
  std::vector<double> xs, ys;
  xs.reserve(m + 4);
  ys.reserve(m + 4);
  xs.push_back(-static_cast<double>(idx[1]));
  ys.push_back(x[idx[1]]);
  xs.push_back(-static_cast<double>(idx[0]));
  ys.push_back(x[idx[0]]);
  for (int i : idx) {
    xs.push_back(i);
    ys.push_back(x[i]);
  }
  const double edge = n - 1;
  xs.push_back(2.0 * edge - idx[m - 1]);
  ys.push_back(x[idx[m - 1]]);
  xs.push_back(2.0 * edge - idx[m - 2]);
  ys.push_back(x[idx[m - 2]]);
  return spline_at_samples(xs, ys, n);
}

}  // namespace

ArrX envelope_mean(const Eigen::Ref<const ArrX>& x) {
  const Extrema e = find_extrema(x);
  if (e.maxima.size() < 2 || e.minima.size() < 2)
    throw Error("not siftable: fewer than 2 maxima or 2 minima");
  const ArrX upper = envelope(x, e.maxima);
  const ArrX lower = envelope(x, e.minima);
  return 0.5 * (upper + lower);
}

ImfCheck check_imf(const Eigen::Ref<const ArrX>& x, const SiftParams& params) {
  ImfCheck c;
  const Extrema e = find_extrema(x);
  c.extrema = static_cast<int>(e.maxima.size() + e.minima.size());
  c.crossings = zero_crossings(x);
  c.count_ok = std::abs(c.extrema - c.crossings) <= 1;
  if (e.maxima.size() >= 2 && e.minima.size() >= 2) {
    const ArrX mean = envelope_mean(x);
    const double denom = x.square().sum();
    c.sd = denom > 0.0 ? mean.square().sum() / denom : 0.0;
    c.envelope_ok = c.sd < params.sd_tolerance;
  } else {
    c.envelope_ok = true;  // no envelopes to speak of
  }
  c.ok = c.count_ok && c.envelope_ok;
  return c;
}

SiftResult sift(const Eigen::Ref<const ArrX>& signal,
                const SiftParams& params) {
  if (signal.size() < 4)
    throw Error("not siftable: signal shorter than 4 samples");
  if (!is_siftable(signal))
    throw Error("not siftable: fewer than 2 maxima or 2 minima");

  ArrX candidate = signal;
  for (int v = 0; v < params.max_sifts; ++v) {
    const ArrX mean = envelope_mean(candidate);
    if (v > 0) {
      // Accept before subtracting so the returned mode is the series whose
      // envelope mean was actually measured against the tolerance. The
      // first subtraction is unconditional; the raw remainder may sit right
      // at the tolerance while still carrying a slow component.
      const double denom = candidate.square().sum();
      const double sd = denom > 0.0 ? mean.square().sum() / denom : 0.0;
      const Extrema e = find_extrema(candidate);
      const int extrema = static_cast<int>(e.maxima.size() + e.minima.size());
      const bool count_ok =
          std::abs(extrema - zero_crossings(candidate)) <= 1;
      if (sd < params.sd_tolerance && count_ok) break;
    }
    candidate -= mean;
    if (!is_siftable(candidate)) break;
  }
  return {candidate, signal - candidate};
}

ImfSet emd(const Eigen::Ref<const ArrX>& signal, const SiftParams& params) {
  ImfSet set;
  set.residual = signal;
  while (static_cast<int>(set.imfs.size()) < params.max_imfs &&
         is_siftable(set.residual)) {
    SiftResult r = sift(set.residual, params);
    Imf imf;
    imf.values = std::move(r.imf);
    imf.mode_index = static_cast<int>(set.imfs.size()) + 1;
    set.imfs.push_back(std::move(imf));
    set.residual = std::move(r.remainder);
  }
  return set;
}

}  // namespace rulkit::hht
