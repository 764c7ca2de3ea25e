#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "flattrack/config.hpp"
#include "flattrack/eye_synth.hpp"
#include "flattrack/geometry.hpp"

namespace flattrack {

struct ManifestRow {
  std::string sample_id;
  int subject_id = 0;
  int round_id = 0;
  int grid_i = 0;
  int grid_j = 0;
  std::string image_path;  // relative to the manifest directory
  synth::Stage stage = synth::Stage::scene;
  geometry::GazeVector gaze;
  geometry::ScreenPoint screen_pt;
};

/// A dataset directory: manifest.csv, the manifest.cfg sidecar holding the
/// full configuration that produced it, and the referenced images.
struct Manifest {
  std::filesystem::path dir;
  ExperimentConfig config;
  std::vector<ManifestRow> rows;

  std::filesystem::path image_file(const ManifestRow& r) const { return dir / r.image_path; }
};

inline constexpr const char* kManifestCsv = "manifest.csv";
inline constexpr const char* kManifestSidecar = "manifest.cfg";
inline constexpr const char* kManifestHeader =
    "sample_id,subject_id,round_id,grid_i,grid_j,image_path,stage,gaze_x,gaze_y,gaze_z,screen_x_px,screen_y_px";

std::string sample_id(int subject_id, int round_id, int grid_i, int grid_j, int repeat);

void write_manifest(const Manifest& m);

/// Loads dir/manifest.csv (a path to the csv itself is accepted too) and
/// enforces integrity: unique ids, resolvable image paths, unit-norm gaze,
/// and gaze/screen coherence under the sidecar screen. Violations throw
/// DataError.
Manifest load_manifest(const std::filesystem::path& dir_or_csv);

/// Checks the invariants of an in-memory manifest.
void validate_manifest(const Manifest& m);

/// Prepares an output directory. Refuses a directory that already holds a
/// manifest unless force is set.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

}  // namespace flattrack
