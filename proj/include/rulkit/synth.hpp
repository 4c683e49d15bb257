#pragma once

#include "rulkit/run.hpp"

#include <cstdint>

namespace rulkit {

// Degrading-bearing generator. Each snapshot is white noise plus an impulse
// train at one characteristic defect frequency; every impulse excites an
// exponentially decaying resonance tone, and the impulse amplitude grows as
// impulse_base * exp(impulse_growth * unit_index).
struct SynthSpec {
  BearingGeometry geometry;
  OperatingCondition condition;
  int length = 0;  // number of units N

  enum class Fault { Outer, Inner, Ball };
  Fault fault = Fault::Outer;

  double impulse_base = 0.0;         // a, amplitude of the first unit's impulses
  double impulse_growth = 0.0;       // b, per-unit exponential growth (0 = flat)
  double resonance_frequency = 0.0;  // Hz of the ring-down tone
  double ringdown_decay = 0.0;       // 1/s amplitude decay of the ring-down
  double noise_level = 0.0;          // white noise standard deviation

  // Failure is declared at the first unit whose noise-free impulse
  // amplitude a*exp(b*i) reaches this level.
  double failure_level = 0.0;
};

void validate(const SynthSpec& spec);

// First unit index i >= 1 with impulse_base*exp(impulse_growth*i) >=
// failure_level, or 0 when the profile never reaches it (flat profile below
// the level).
int failure_unit(const SynthSpec& spec);

// Deterministic for a fixed seed: same spec + seed reproduce the run bit
// for bit. true_failure_time is set to failure_unit * snapshot_interval
// when the profile crosses.
BearingRun synthesize_run(const SynthSpec& spec, std::uint64_t seed,
                          const std::string& id = "synthetic");

// SynthSpec from / to key=value text (same syntax as run manifests).
SynthSpec read_synth_spec(const std::filesystem::path& file);
void write_synth_spec(const std::filesystem::path& file, const SynthSpec& s);

}  // namespace rulkit
