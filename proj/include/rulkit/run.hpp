#pragma once

#include "rulkit/bearing.hpp"
#include "rulkit/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rulkit {

// One fixed-length vibration recording. The pipeline consumes the
// horizontal channel; the vertical channel is parsed and retained but
// otherwise unused.
struct VibrationSnapshot {
  int index = 0;  // 1-based unit ordinal within its run
  ArrX samples;   // horizontal acceleration, unit-agnostic
  ArrX vertical;
  bool has_timestamp = false;
  // Wall-clock fields from the first row of the source file.
  double hour = 0, minute = 0, second = 0, microsecond = 0;
};

struct BearingRun {
  std::string id;
  BearingGeometry geometry;
  OperatingCondition condition;
  std::vector<VibrationSnapshot> snapshots;
  std::optional<double> true_failure_time;  // seconds, when known

  int length() const { return static_cast<int>(snapshots.size()); }
};

// Parses one snapshot file: one row per sample,
//   hour,minute,second,microsecond,horizontal_accel,vertical_accel
// with ',' or ';' as delimiter. Malformed rows raise an Error naming the
// row; when expected_length is given a differing row count raises a
// length-mismatch Error. An empty file is always a length mismatch.
VibrationSnapshot parse_snapshot_file(std::istream& in,
                                      std::optional<int> expected_length = {});
VibrationSnapshot parse_snapshot_file(const std::filesystem::path& file,
                                      std::optional<int> expected_length = {});

// Writes the row format above with full (17 significant digit) precision so
// parse(serialize(parse(f))) reproduces the sample values exactly.
void serialize_snapshot(std::ostream& out, const VibrationSnapshot& snap,
                        double sampling_frequency);

// Loads every snapshot file in `directory` (names must carry a sortable
// numeric suffix, e.g. acc_00001.csv), orders them by suffix and assigns
// indices 1..N. A gap in the numbering raises a missing-snapshot Error
// naming the absent file number; an empty directory raises an empty-run
// Error.
BearingRun load_run(const std::filesystem::path& directory,
                    const BearingGeometry& geometry,
                    const OperatingCondition& condition,
                    const std::string& id = "");

// Run manifest: key=value lines ('#' starts a comment) giving the bearing
// id, geometry, condition, snapshot directory and, when known, the true
// failure time.
struct RunManifest {
  std::string id;
  BearingGeometry geometry;
  OperatingCondition condition;
  std::filesystem::path directory;  // relative paths resolve against the manifest
  std::optional<double> true_failure_time;
};

RunManifest read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, const RunManifest& m);

// read_manifest + load_run, honoring an optional directory override.
BearingRun load_run(const std::filesystem::path& manifest_file);
BearingRun load_run(const RunManifest& manifest);

}  // namespace rulkit
