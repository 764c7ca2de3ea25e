#include "flattrack/eye_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "flattrack/error.hpp"
#include "flattrack/parallel.hpp"
#include "flattrack/rng.hpp"

namespace flattrack::synth {

namespace {

constexpr int kSupersample = 4;
constexpr int kIrisStreaks = 6;

double jitter(Xoshiro256& rng, double value, double rel) { return value * (1.0 + rel * (2.0 * rng.uniform() - 1.0)); }

}  // namespace

void EyeRenderParams::validate() const {
  if (image_h < 8 || image_w < 8) throw ConfigError("eye image must be at least 8x8");
  if (!(pupil_radius_mm > 0.0) || !(pupil_radius_mm < iris_radius_mm) || !(iris_radius_mm < eyeball_radius_mm)) {
    throw ConfigError("eye radii must satisfy 0 < pupil < iris < eyeball");
  }
  if (!(camera_scale_px_per_mm > 0.0)) throw ConfigError("camera scale must be positive");
  if (!(pupil_level > 0.0) || !(pupil_level < iris_level) || !(iris_level < sclera_level) || !(sclera_level <= 1.0)) {
    throw ConfigError("intensities must satisfy 0 < pupil < iris < sclera <= 1");
  }
  if (!(skin_level > 0.0) || !(skin_level <= 1.0)) throw ConfigError("skin level must lie in (0, 1]");
  if (!(eyelid_openness > 0.0) || !(eyelid_openness <= 1.0)) throw ConfigError("eyelid openness must lie in (0, 1]");
  if (!(light_falloff_r0_px > 0.0)) throw ConfigError("light falloff radius must be positive");
  if (!(texture_noise_rel >= 0.0)) throw ConfigError("texture noise must be non-negative");
}

SubjectAnatomy make_subject(const EyeRenderParams& base, std::uint64_t seed) {
  base.validate();
  Xoshiro256 rng(seed);
  SubjectAnatomy s;
  s.params = base;
  s.params.eyeball_radius_mm = jitter(rng, base.eyeball_radius_mm, 0.1);
  s.params.iris_radius_mm = jitter(rng, base.iris_radius_mm, 0.1);
  s.params.pupil_radius_mm = jitter(rng, base.pupil_radius_mm, 0.1);
  s.params.camera_scale_px_per_mm = jitter(rng, base.camera_scale_px_per_mm, 0.1);
  s.params.eyelid_openness = std::min(1.0, jitter(rng, base.eyelid_openness, 0.1));
  s.params.iris_level = jitter(rng, base.iris_level, 0.1);
  // Radii drawn independently can break the anatomy ordering for extreme
  // base values; fall back to the base anatomy then.
  if (!(s.params.pupil_radius_mm < s.params.iris_radius_mm) ||
      !(s.params.iris_radius_mm < s.params.eyeball_radius_mm) || !(s.params.iris_level < s.params.sclera_level) ||
      !(s.params.pupil_level < s.params.iris_level)) {
    s.params = base;
  }
  for (int k = 0; k < kIrisStreaks; ++k) {
    s.iris_streak_phase.push_back(2.0 * std::numbers::pi * rng.uniform());
    s.iris_streak_amp.push_back(0.02 + 0.04 * rng.uniform());
  }
  return s;
}

PixelPoint pupil_center_px(const geometry::GazeVector& gaze, const EyeRenderParams& p) {
  const double k = p.eyeball_radius_mm * p.camera_scale_px_per_mm;
  return {0.5 * (p.image_w - 1) + k * gaze.x, 0.5 * (p.image_h - 1) - k * gaze.y};
}

Image render_eye(const geometry::GazeVector& gaze, const EyeRenderParams& params, std::uint64_t subject_seed,
                 std::uint64_t jitter_seed) {
  return render_eye(gaze, make_subject(params, subject_seed), jitter_seed);
}

Image render_eye(const geometry::GazeVector& gaze, const SubjectAnatomy& subject, std::uint64_t jitter_seed) {
  const auto& p = subject.params;
  if (!(gaze.z > 0.0)) throw NumericalError("cannot render a gaze pointing away from the screen");
  const double cx0 = 0.5 * (p.image_w - 1);
  const double cy0 = 0.5 * (p.image_h - 1);
  const double scale = p.camera_scale_px_per_mm;
  const double ball_px = p.eyeball_radius_mm * scale;
  const double iris_px = p.iris_radius_mm * scale;
  const double pupil_px = p.pupil_radius_mm * scale;
  const auto centre = pupil_center_px(gaze, p);
  const double dx = centre.x - cx0;
  const double dy = centre.y - cy0;
  if (centre.x + pupil_px < -0.5 || centre.x - pupil_px > p.image_w - 0.5 || centre.y + pupil_px < -0.5 ||
      centre.y - pupil_px > p.image_h - 0.5) {
    throw NumericalError("unrenderable gaze: pupil entirely outside the frame");
  }

  // Discs foreshortened by gaze.z along the displacement direction.
  const double disp = std::hypot(dx, dy);
  const double ux = disp > 0.0 ? dx / disp : 1.0;
  const double uy = disp > 0.0 ? dy / disp : 0.0;
  const double fz = gaze.z;

  // Lid opening: parabolic upper and lower lids across the eye width.
  const double half_open = p.eyelid_openness * 0.8 * ball_px;
  const double eye_half_width = 1.05 * ball_px;

  Image img(p.image_h, p.image_w);
  const double inv_r0_sq = 1.0 / (p.light_falloff_r0_px * p.light_falloff_r0_px);
  const double sub_w = 1.0 / (kSupersample * kSupersample);

  for (int r = 0; r < p.image_h; ++r) {
    for (int c = 0; c < p.image_w; ++c) {
      double acc = 0.0;
      for (int sy = 0; sy < kSupersample; ++sy) {
        for (int sx = 0; sx < kSupersample; ++sx) {
          const double x = c + (sx + 0.5) / kSupersample - 0.5;
          const double y = r + (sy + 0.5) / kSupersample - 0.5;
          const double lx = (x - cx0) / eye_half_width;
          const double lid = half_open * std::max(0.0, 1.0 - lx * lx);
          double value;
          if (y < cy0 - lid || y > cy0 + 0.9 * lid) {
            value = p.skin_level;
          } else {
            const double qx = x - centre.x;
            const double qy = y - centre.y;
            const double a = (qx * ux + qy * uy) / fz;
            const double b = -qx * uy + qy * ux;
            const double rho_sq = a * a + b * b;
            if (rho_sq <= pupil_px * pupil_px) {
              value = p.pupil_level;
            } else if (rho_sq <= iris_px * iris_px) {
              const double ang = std::atan2(b, a);
              double tex = 0.0;
              for (std::size_t k = 0; k < subject.iris_streak_phase.size(); ++k) {
                tex += subject.iris_streak_amp[k] * std::cos((k + 3.0) * ang + subject.iris_streak_phase[k]);
              }
              value = p.iris_level * (1.0 + tex);
            } else {
              value = p.sclera_level;
            }
          }
          // Illumination falls off with distance from the light axis, measured
          // in the rotating eye frame: looking away from the light dims the eye.
          const double lxr = x - dx - p.light_x_px;
          const double lyr = y - dy - p.light_y_px;
          acc += value / (1.0 + (lxr * lxr + lyr * lyr) * inv_r0_sq);
        }
      }
      img(r, c) = acc * sub_w;
    }
  }

  if (p.texture_noise_rel > 0.0) {
    Xoshiro256 rng(jitter_seed);
    std::normal_distribution<double> noise(0.0, p.texture_noise_rel);
    for (double& v : img.pixels()) v += noise(rng);
  }
  return clip01(std::move(img));
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::scene:
      return "scene";
    case Stage::measurement:
      return "measurement";
    case Stage::reconstruction:
      return "reconstruction";
  }
  return "scene";
}

Stage stage_from_string(const std::string& s) {
  if (s == "scene") return Stage::scene;
  if (s == "measurement") return Stage::measurement;
  if (s == "reconstruction") return Stage::reconstruction;
  throw DataError("unknown stage: " + s);
}

std::uint64_t subject_seed(std::uint64_t base_seed, int subject_id) {
  return mix_seed(base_seed ^ 0x5375626a656374ULL, static_cast<std::uint64_t>(subject_id));
}

std::vector<GazeSample> render_round(const geometry::GridSpec& grid, const geometry::CalibratedScreen& screen,
                                     const EyeRenderParams& params, int subject_id, int round_id, int n_per_point,
                                     std::uint64_t base_seed) {
  if (n_per_point < 1) throw ConfigError("n_per_point must be >= 1");
  screen.validate();
  const auto points = geometry::make_grid(grid, screen.monitor);
  const auto anatomy = make_subject(params, subject_seed(base_seed, subject_id));
  const std::uint64_t round_seed = mix_seed(subject_seed(base_seed, subject_id), static_cast<std::uint64_t>(round_id));

  std::vector<GazeSample> out(points.size() * static_cast<std::size_t>(n_per_point));
  parallel_for(out.size(), [&](std::size_t idx) {
    const std::size_t pt = idx / static_cast<std::size_t>(n_per_point);
    auto& s = out[idx];
    s.stage = Stage::scene;
    s.screen_pt = points[pt];
    s.gaze = geometry::screen_to_gaze(points[pt], screen);
    s.subject_id = subject_id;
    s.round_id = round_id;
    s.grid_i = static_cast<int>(pt) / grid.cols;
    s.grid_j = static_cast<int>(pt) % grid.cols;
    s.repeat = static_cast<int>(idx % static_cast<std::size_t>(n_per_point));
    s.image = render_eye(s.gaze, anatomy, mix_seed(round_seed, idx));
  });
  return out;
}

}  // namespace flattrack::synth
