#include "rulkit/run.hpp"

#include "rulkit/kv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>

namespace rulkit {
namespace {

// Splits one data row on ',' or ';' (rig exports vary) and converts every
// field to double. Returns false on any malformed field.
bool parse_row(const std::string& line, std::vector<double>& fields) {
  fields.clear();
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t end = line.find_first_of(",;", start);
    if (end == std::string::npos) end = line.size();
    std::string token = line.substr(start, end - start);
    const char* begin = token.c_str();
    char* stop = nullptr;
    double v = std::strtod(begin, &stop);
    while (stop && *stop && std::isspace(static_cast<unsigned char>(*stop)))
      ++stop;
    if (stop == begin || (stop && *stop != '\0')) return false;
    fields.push_back(v);
    if (end == line.size()) break;
    start = end + 1;
  }
  return true;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) {
    return std::isspace(c) != 0;
  });
}

}  // namespace

VibrationSnapshot parse_snapshot_file(std::istream& in,
                                      std::optional<int> expected_length) {
  VibrationSnapshot snap;
  std::vector<double> horiz, vert;
  std::vector<double> fields;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    if (!parse_row(line, fields) || fields.size() != 6)
      throw Error("parse error: row " + std::to_string(row) +
                  ": expected 6 numeric fields "
                  "(hour,minute,second,microsecond,horiz,vert)");
    if (horiz.empty()) {
      snap.has_timestamp = true;
      snap.hour = fields[0];
      snap.minute = fields[1];
      snap.second = fields[2];
      snap.microsecond = fields[3];
    }
    horiz.push_back(fields[4]);
    vert.push_back(fields[5]);
  }
  if (horiz.empty())
    throw Error("length mismatch: snapshot file contains no sample rows");
  if (expected_length && static_cast<int>(horiz.size()) != *expected_length)
    throw Error("length mismatch: snapshot has " +
                std::to_string(horiz.size()) + " rows, expected " +
                std::to_string(*expected_length));
  snap.samples = Eigen::Map<const ArrX>(horiz.data(), horiz.size());
  snap.vertical = Eigen::Map<const ArrX>(vert.data(), vert.size());
  return snap;
}

VibrationSnapshot parse_snapshot_file(const std::filesystem::path& file,
                                      std::optional<int> expected_length) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open snapshot file: " + file.string());
  try {
    return parse_snapshot_file(in, expected_length);
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + " [" + file.string() + "]");
  }
}

void serialize_snapshot(std::ostream& out, const VibrationSnapshot& snap,
                        double sampling_frequency) {
  const Eigen::Index n = snap.samples.size();
  // Per-row timestamps advance by the sample period from the stored
  // first-row clock so row 1 round-trips exactly.
  std::int64_t base_us =
      static_cast<std::int64_t>(snap.hour) * 3600000000LL +
      static_cast<std::int64_t>(snap.minute) * 60000000LL +
      static_cast<std::int64_t>(snap.second) * 1000000LL +
      static_cast<std::int64_t>(snap.microsecond);
  for (Eigen::Index j = 0; j < n; ++j) {
    std::int64_t t =
        base_us +
        static_cast<std::int64_t>(std::llround(1e6 * j / sampling_frequency));
    t %= 86400000000LL;
    const std::int64_t us = t % 1000000;
    const std::int64_t s = (t / 1000000) % 60;
    const std::int64_t m = (t / 60000000) % 60;
    const std::int64_t h = t / 3600000000LL;
    const double vert = j < snap.vertical.size() ? snap.vertical[j] : 0.0;
    out << h << ',' << m << ',' << s << ',' << us << ','
        << format_full(snap.samples[j]) << ',' << format_full(vert) << '\n';
  }
}

namespace {

// Trailing digit run of a file stem, e.g. acc_00042.csv -> (42, width 5).
bool numeric_suffix(const std::filesystem::path& p, long& value, int& width) {
  const std::string stem = p.stem().string();
  int digits = 0;
  for (auto it = stem.rbegin();
       it != stem.rend() && std::isdigit(static_cast<unsigned char>(*it));
       ++it)
    ++digits;
  if (digits == 0) return false;
  width = digits;
  value = std::strtol(stem.c_str() + (stem.size() - digits), nullptr, 10);
  return true;
}

std::string padded(long value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

BearingRun load_run(const std::filesystem::path& directory,
                    const BearingGeometry& geometry,
                    const OperatingCondition& condition,
                    const std::string& id) {
  validate(geometry);
  validate(condition);
  if (!std::filesystem::is_directory(directory))
    throw Error("run directory does not exist: " + directory.string());

  std::map<long, std::pair<std::filesystem::path, int>> files;
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    long value = 0;
    int width = 0;
    if (!numeric_suffix(entry.path(), value, width)) continue;
    if (!files.emplace(value, std::make_pair(entry.path(), width)).second)
      throw Error("duplicate snapshot number " + std::to_string(value) +
                  " in " + directory.string());
  }
  if (files.empty())
    throw Error("empty run: no numbered snapshot files in " +
                directory.string());

  BearingRun run;
  run.id = id.empty() ? directory.filename().string() : id;
  run.geometry = geometry;
  run.condition = condition;
  run.snapshots.reserve(files.size());

  long expected = files.begin()->first;
  for (const auto& [value, file] : files) {
    if (value != expected)
      throw Error("missing snapshot " + padded(expected, file.second) +
                  " in " + directory.string());
    ++expected;
    VibrationSnapshot snap =
        parse_snapshot_file(file.first, condition.snapshot_length);
    snap.index = static_cast<int>(run.snapshots.size()) + 1;
    run.snapshots.push_back(std::move(snap));
  }
  return run;
}

RunManifest read_manifest(const std::filesystem::path& file) {
  const std::string origin = "manifest " + file.string();
  auto kv = read_kv_file(file);
  reject_unknown_keys(kv,
                      {"id", "ball_count", "ball_diameter_mm",
                       "pitch_diameter_mm", "contact_angle_rad", "rotation_hz",
                       "radial_load_n", "sampling_hz", "snapshot_length",
                       "snapshot_interval_s", "directory",
                       "true_failure_time_s"},
                      origin);

  RunManifest m;
  m.id = kv.count("id") ? kv.at("id") : "";
  m.geometry.ball_count = static_cast<int>(kv_long(kv, "ball_count", origin));
  m.geometry.ball_diameter = kv_double(kv, "ball_diameter_mm", origin);
  m.geometry.pitch_diameter = kv_double(kv, "pitch_diameter_mm", origin);
  m.geometry.contact_angle = kv_double(kv, "contact_angle_rad", origin);
  m.condition.rotation_frequency = kv_double(kv, "rotation_hz", origin);
  m.condition.radial_load = kv_double(kv, "radial_load_n", origin);
  m.condition.sampling_frequency = kv_double(kv, "sampling_hz", origin);
  m.condition.snapshot_length =
      static_cast<int>(kv_long(kv, "snapshot_length", origin));
  m.condition.snapshot_interval = kv_double(kv, "snapshot_interval_s", origin);
  std::filesystem::path dir = kv_string(kv, "directory", origin);
  if (dir.is_relative()) dir = file.parent_path() / dir;
  m.directory = dir.lexically_normal();
  m.true_failure_time = kv_double_opt(kv, "true_failure_time_s", origin);
  return m;
}

void write_manifest(const std::filesystem::path& file, const RunManifest& m) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write manifest: " + file.string());
  out << "id=" << m.id << '\n'
      << "ball_count=" << m.geometry.ball_count << '\n'
      << "ball_diameter_mm=" << format_full(m.geometry.ball_diameter) << '\n'
      << "pitch_diameter_mm=" << format_full(m.geometry.pitch_diameter) << '\n'
      << "contact_angle_rad=" << format_full(m.geometry.contact_angle) << '\n'
      << "rotation_hz=" << format_full(m.condition.rotation_frequency) << '\n'
      << "radial_load_n=" << format_full(m.condition.radial_load) << '\n'
      << "sampling_hz=" << format_full(m.condition.sampling_frequency) << '\n'
      << "snapshot_length=" << m.condition.snapshot_length << '\n'
      << "snapshot_interval_s=" << format_full(m.condition.snapshot_interval)
      << '\n'
      << "directory=" << m.directory.string() << '\n';
  if (m.true_failure_time)
    out << "true_failure_time_s=" << format_full(*m.true_failure_time) << '\n';
}

BearingRun load_run(const RunManifest& m) {
  BearingRun run = load_run(m.directory, m.geometry, m.condition, m.id);
  run.true_failure_time = m.true_failure_time;
  return run;
}

BearingRun load_run(const std::filesystem::path& manifest_file) {
  return load_run(read_manifest(manifest_file));
}

}  // namespace rulkit
