#pragma once

#include "rulkit/common.hpp"

namespace rulkit {

// Rolling-element bearing geometry. Diameters in millimetres, angle in
// radians. Valid geometries satisfy ball_count >= 1,
// 0 < ball_diameter < pitch_diameter and 0 <= contact_angle < pi/2.
struct BearingGeometry {
  int ball_count = 0;
  double ball_diameter = 0.0;
  double pitch_diameter = 0.0;
  double contact_angle = 0.0;
};

// Per-run operating condition. All fields strictly positive and one
// snapshot must fit inside the recording interval:
// snapshot_length / sampling_frequency < snapshot_interval.
struct OperatingCondition {
  double rotation_frequency = 0.0;  // shaft speed, Hz
  double radial_load = 0.0;         // N
  double sampling_frequency = 0.0;  // Hz
  int snapshot_length = 0;          // samples per unit
  double snapshot_interval = 0.0;   // seconds between units
};

// Kinematic defect frequencies of the inner race, outer race and balls.
struct CharacteristicFrequencies {
  double inner = 0.0;  // Hz
  double outer = 0.0;  // Hz
  double ball = 0.0;   // Hz
};

void validate(const BearingGeometry& g);
void validate(const OperatingCondition& c);

// Closed-form defect frequencies, no input validation. The ball frequency
// uses the standard ball-spin form with the pitch/ball diameter prefactor:
//   f_ball = (l_pitch / l_ball) * f_rot * (1 - (l_ball/l_pitch)^2 cos^2 phi)
// (the inverted prefactor sometimes seen in print yields values two orders
// of magnitude off the accepted kinematics).
CharacteristicFrequencies defect_frequencies(int ball_count,
                                             double ball_diameter,
                                             double pitch_diameter,
                                             double contact_angle,
                                             double rotation_frequency);

// Validated variant; rejects out-of-range geometry or condition.
CharacteristicFrequencies characteristic_frequencies(
    const BearingGeometry& g, const OperatingCondition& c);

}  // namespace rulkit
