#include "rulkit/synth.hpp"

#include "rulkit/kv.hpp"
#include "rulkit/rng.hpp"

#include <cmath>
#include <fstream>

namespace rulkit {

void validate(const SynthSpec& spec) {
  validate(spec.geometry);
  validate(spec.condition);
  if (spec.length < 1) throw Error("invalid synth spec: length must be >= 1");
  if (!(spec.impulse_base > 0.0))
    throw Error("invalid synth spec: impulse_base must be positive");
  if (!(spec.impulse_growth >= 0.0))
    throw Error("invalid synth spec: impulse_growth must be >= 0");
  if (!(spec.resonance_frequency > 0.0) ||
      !(spec.resonance_frequency < spec.condition.sampling_frequency / 2.0))
    throw Error("invalid synth spec: resonance_frequency must lie in "
                "(0, Nyquist)");
  if (!(spec.ringdown_decay > 0.0))
    throw Error("invalid synth spec: ringdown_decay must be positive");
  if (!(spec.noise_level >= 0.0))
    throw Error("invalid synth spec: noise_level must be >= 0");
  if (!(spec.failure_level > 0.0))
    throw Error("invalid synth spec: failure_level must be positive");
}

int failure_unit(const SynthSpec& spec) {
  if (spec.impulse_base * std::exp(spec.impulse_growth) >= spec.failure_level)
    return 1;
  if (spec.impulse_growth == 0.0) return 0;
  int i = static_cast<int>(std::ceil(
      std::log(spec.failure_level / spec.impulse_base) / spec.impulse_growth));
  if (i < 1) i = 1;
  // Guard against rounding at the crossing.
  while (spec.impulse_base * std::exp(spec.impulse_growth * i) <
         spec.failure_level)
    ++i;
  while (i > 1 && spec.impulse_base * std::exp(spec.impulse_growth * (i - 1)) >=
                      spec.failure_level)
    --i;
  return i;
}

BearingRun synthesize_run(const SynthSpec& spec, std::uint64_t seed,
                          const std::string& id) {
  validate(spec);
  const auto cf = characteristic_frequencies(spec.geometry, spec.condition);
  double fault_hz = cf.outer;
  if (spec.fault == SynthSpec::Fault::Inner) fault_hz = cf.inner;
  if (spec.fault == SynthSpec::Fault::Ball) fault_hz = cf.ball;

  const double fs = spec.condition.sampling_frequency;
  const int p = spec.condition.snapshot_length;
  const double period = fs / fault_hz;  // impulse spacing in samples
  // Ring-down tail length: follow each impulse until it has decayed to
  // ~exp(-12) of its peak.
  const int tail =
      static_cast<int>(std::ceil(12.0 / spec.ringdown_decay * fs)) + 1;
  const double omega = 2.0 * M_PI * spec.resonance_frequency;

  Rng rng(seed);
  BearingRun run;
  run.id = id;
  run.geometry = spec.geometry;
  run.condition = spec.condition;
  run.snapshots.reserve(spec.length);

  for (int i = 1; i <= spec.length; ++i) {
    const double amp = spec.impulse_base * std::exp(spec.impulse_growth * i);
    VibrationSnapshot snap;
    snap.index = i;
    snap.samples = ArrX(p);
    snap.vertical = ArrX(p);
    for (int j = 0; j < p; ++j) snap.samples[j] = spec.noise_level * rng.gaussian();
    for (int j = 0; j < p; ++j) snap.vertical[j] = spec.noise_level * rng.gaussian();

    // Fixed train phase: the per-unit indicator then tracks the amplitude
    // profile instead of fluctuating with the impulse count in the window.
    const double offset = 0.5 * period;
    for (double at = offset; at < p; at += period) {
      const int start = static_cast<int>(std::ceil(at));
      const int stop = std::min(p, start + tail);
      for (int j = start; j < stop; ++j) {
        const double dt = (j - at) / fs;
        snap.samples[j] +=
            amp * std::exp(-spec.ringdown_decay * dt) * std::sin(omega * dt);
      }
    }

    snap.has_timestamp = true;
    const double t0 = (i - 1) * spec.condition.snapshot_interval;
    const long long total_us = static_cast<long long>(std::llround(t0 * 1e6));
    snap.hour = static_cast<double>((total_us / 3600000000LL) % 24);
    snap.minute = static_cast<double>((total_us / 60000000LL) % 60);
    snap.second = static_cast<double>((total_us / 1000000LL) % 60);
    snap.microsecond = static_cast<double>(total_us % 1000000LL);
    run.snapshots.push_back(std::move(snap));
  }

  const int fu = failure_unit(spec);
  if (fu > 0)
    run.true_failure_time = fu * spec.condition.snapshot_interval;
  return run;
}

namespace {

SynthSpec::Fault fault_from_string(const std::string& s,
                                   const std::string& origin) {
  if (s == "outer") return SynthSpec::Fault::Outer;
  if (s == "inner") return SynthSpec::Fault::Inner;
  if (s == "ball") return SynthSpec::Fault::Ball;
  throw Error(origin + ": fault must be one of outer|inner|ball, got '" + s +
              "'");
}

const char* fault_to_string(SynthSpec::Fault f) {
  switch (f) {
    case SynthSpec::Fault::Inner: return "inner";
    case SynthSpec::Fault::Ball: return "ball";
    default: return "outer";
  }
}

}  // namespace

SynthSpec read_synth_spec(const std::filesystem::path& file) {
  const std::string origin = "synth spec " + file.string();
  auto kv = read_kv_file(file);
  reject_unknown_keys(
      kv, {"ball_count", "ball_diameter_mm", "pitch_diameter_mm",
           "contact_angle_rad", "rotation_hz", "radial_load_n", "sampling_hz",
           "snapshot_length", "snapshot_interval_s", "length", "fault",
           "impulse_base", "impulse_growth", "resonance_hz", "ringdown_decay",
           "noise_level", "failure_level"},
      origin);

  SynthSpec s;
  s.geometry.ball_count = static_cast<int>(kv_long(kv, "ball_count", origin));
  s.geometry.ball_diameter = kv_double(kv, "ball_diameter_mm", origin);
  s.geometry.pitch_diameter = kv_double(kv, "pitch_diameter_mm", origin);
  s.geometry.contact_angle = kv_double(kv, "contact_angle_rad", origin);
  s.condition.rotation_frequency = kv_double(kv, "rotation_hz", origin);
  s.condition.radial_load = kv_double(kv, "radial_load_n", origin);
  s.condition.sampling_frequency = kv_double(kv, "sampling_hz", origin);
  s.condition.snapshot_length =
      static_cast<int>(kv_long(kv, "snapshot_length", origin));
  s.condition.snapshot_interval = kv_double(kv, "snapshot_interval_s", origin);
  s.length = static_cast<int>(kv_long(kv, "length", origin));
  s.fault = fault_from_string(
      kv.count("fault") ? kv.at("fault") : "outer", origin);
  s.impulse_base = kv_double(kv, "impulse_base", origin);
  s.impulse_growth = kv_double(kv, "impulse_growth", origin);
  s.resonance_frequency = kv_double(kv, "resonance_hz", origin);
  s.ringdown_decay = kv_double(kv, "ringdown_decay", origin);
  s.noise_level = kv_double(kv, "noise_level", origin);
  s.failure_level = kv_double(kv, "failure_level", origin);
  validate(s);
  return s;
}

void write_synth_spec(const std::filesystem::path& file, const SynthSpec& s) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write synth spec: " + file.string());
  out << "ball_count=" << s.geometry.ball_count << '\n'
      << "ball_diameter_mm=" << format_full(s.geometry.ball_diameter) << '\n'
      << "pitch_diameter_mm=" << format_full(s.geometry.pitch_diameter) << '\n'
      << "contact_angle_rad=" << format_full(s.geometry.contact_angle) << '\n'
      << "rotation_hz=" << format_full(s.condition.rotation_frequency) << '\n'
      << "radial_load_n=" << format_full(s.condition.radial_load) << '\n'
      << "sampling_hz=" << format_full(s.condition.sampling_frequency) << '\n'
      << "snapshot_length=" << s.condition.snapshot_length << '\n'
      << "snapshot_interval_s=" << format_full(s.condition.snapshot_interval)
      << '\n'
      << "length=" << s.length << '\n'
      << "fault=" << fault_to_string(s.fault) << '\n'
      << "impulse_base=" << format_full(s.impulse_base) << '\n'
      << "impulse_growth=" << format_full(s.impulse_growth) << '\n'
      << "resonance_hz=" << format_full(s.resonance_frequency) << '\n'
      << "ringdown_decay=" << format_full(s.ringdown_decay) << '\n'
      << "noise_level=" << format_full(s.noise_level) << '\n'
      << "failure_level=" << format_full(s.failure_level) << '\n';
}

}  // namespace rulkit
