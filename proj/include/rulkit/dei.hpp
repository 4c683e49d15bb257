#pragma once

#include "rulkit/common.hpp"

#include <filesystem>

namespace rulkit {

// Per-snapshot degradation energy indicator sequence. Normalized series
// live strictly inside (0, 1) (clamped to [eps, 1-eps]) and carry the
// (min, max, eps) used, so the same mapping can be reapplied to other runs.
struct DeiSeries {
  VecX values;
  bool normalized = false;
  double unit_interval = 0.0;  // seconds between units
  double norm_min = 0.0;
  double norm_max = 0.0;
  double norm_eps = 0.0;

  int length() const { return static_cast<int>(values.size()); }
};

// (v - min) / (max - min), clamped to [eps, 1-eps]. The input must not
// already be normalized; a constant series raises a degenerate-range Error.
DeiSeries normalize(const DeiSeries& series, double eps = 1e-6);

// Reapplies a previously computed mapping (e.g. the training bearing's) to
// another run's series.
DeiSeries normalize_with(const DeiSeries& series, double min, double max,
                         double eps);

// Two-column text (unit_index <TAB> value), one header line carrying the
// normalization parameters and the unit interval.
void save_dei(const std::filesystem::path& file, const DeiSeries& series);
DeiSeries load_dei(const std::filesystem::path& file);

}  // namespace rulkit
