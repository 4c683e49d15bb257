#include "rulkit/bearing.hpp"

#include <cmath>
#include <cstdio>

namespace rulkit {

std::string format_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void validate(const BearingGeometry& g) {
  if (g.ball_count < 1)
    throw Error("invalid geometry: ball_count must be >= 1");
  if (!(g.ball_diameter > 0.0) || !(g.ball_diameter < g.pitch_diameter))
    throw Error("invalid geometry: require 0 < ball_diameter < pitch_diameter");
  if (!(g.contact_angle >= 0.0) || !(g.contact_angle < M_PI / 2.0))
    throw Error("invalid geometry: contact_angle must lie in [0, pi/2)");
}

void validate(const OperatingCondition& c) {
  if (!(c.rotation_frequency > 0.0) || !(c.radial_load > 0.0) ||
      !(c.sampling_frequency > 0.0) || c.snapshot_length <= 0 ||
      !(c.snapshot_interval > 0.0))
    throw Error("invalid condition: all fields must be strictly positive");
  if (!(c.snapshot_length / c.sampling_frequency < c.snapshot_interval))
    throw Error(
        "invalid condition: snapshot duration must be shorter than the "
        "snapshot interval");
}

CharacteristicFrequencies defect_frequencies(int ball_count,
                                             double ball_diameter,
                                             double pitch_diameter,
                                             double contact_angle,
                                             double rotation_frequency) {
  const double ratio = ball_diameter / pitch_diameter;
  const double c = std::cos(contact_angle);
  CharacteristicFrequencies f;
  f.inner = 0.5 * ball_count * rotation_frequency * (1.0 + ratio * c);
  f.outer = 0.5 * ball_count * rotation_frequency * (1.0 - ratio * c);
  f.ball = (pitch_diameter / ball_diameter) * rotation_frequency *
           (1.0 - ratio * ratio * c * c);
  return f;
}

CharacteristicFrequencies characteristic_frequencies(
    const BearingGeometry& g, const OperatingCondition& c) {
  validate(g);
  validate(c);
  return defect_frequencies(g.ball_count, g.ball_diameter, g.pitch_diameter,
                            g.contact_angle, c.rotation_frequency);
}

}  // namespace rulkit
