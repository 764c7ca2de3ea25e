#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flattrack/geometry.hpp"
#include "flattrack/image.hpp"

namespace flattrack::synth {

// Procedural dark-pupil NIR eye renderer under a scaled-orthographic
// close-range camera. Pixel coordinates: x = column, y = row (down).
struct EyeRenderParams {
  int image_h = 64;
  int image_w = 64;
  double eyeball_radius_mm = 12.0;
  double iris_radius_mm = 6.0;
  double pupil_radius_mm = 2.5;
  double camera_scale_px_per_mm = 2.4;
  double sclera_level = 0.85;
  double iris_level = 0.45;
  double pupil_level = 0.08;
  double skin_level = 0.6;
  double eyelid_openness = 0.8;
  double light_x_px = 31.5;
  double light_y_px = 31.5;
  double light_falloff_r0_px = 40.0;
  double texture_noise_rel = 0.02;

  void validate() const;
};

/// Anatomy of one synthetic subject, jittered by up to +/-10% from the base
/// parameters, plus an iris streak pattern.
struct SubjectAnatomy {
  EyeRenderParams params;
  std::vector<double> iris_streak_phase;
  std::vector<double> iris_streak_amp;
};

SubjectAnatomy make_subject(const EyeRenderParams& base, std::uint64_t subject_seed);

/// Pupil-center position in pixel coordinates for a gaze direction.
struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
};
PixelPoint pupil_center_px(const geometry::GazeVector& gaze, const EyeRenderParams& params);

/// Throws NumericalError when gaze.z <= 0 or the pupil falls fully off-frame.
Image render_eye(const geometry::GazeVector& gaze, const EyeRenderParams& params, std::uint64_t subject_seed,
                 std::uint64_t jitter_seed);

Image render_eye(const geometry::GazeVector& gaze, const SubjectAnatomy& subject, std::uint64_t jitter_seed);

enum class Stage { scene, measurement, reconstruction };
std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct GazeSample {
  Image image;
  Stage stage = Stage::scene;
  geometry::GazeVector gaze;
  geometry::ScreenPoint screen_pt;
  int subject_id = 0;
  int round_id = 0;
  int grid_i = 0;
  int grid_j = 0;
  int repeat = 0;
};

std::uint64_t subject_seed(std::uint64_t base_seed, int subject_id);

/// One pass over the stimulus grid: n_per_point renders per grid point,
/// row-major, labels from screen_to_gaze.
std::vector<GazeSample> render_round(const geometry::GridSpec& grid, const geometry::CalibratedScreen& screen,
                                     const EyeRenderParams& params, int subject_id, int round_id, int n_per_point,
                                     std::uint64_t base_seed);

}  // namespace flattrack::synth
