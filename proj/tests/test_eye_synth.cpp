#include <cmath>
#include <numbers>

#include "doctest.h"
#include "flattrack/error.hpp"
#include "flattrack/eye_synth.hpp"

using namespace flattrack;
using namespace flattrack::geometry;
using namespace flattrack::synth;

namespace {

struct Centroid {
  double x = 0.0;
  double y = 0.0;
  int count = 0;
};

// Centroid of pixels darker than a threshold between pupil and iris levels.
Centroid dark_centroid(const Image& img, double threshold) {
  Centroid c;
  for (int r = 0; r < img.height(); ++r) {
    for (int col = 0; col < img.width(); ++col) {
      if (img(r, col) < threshold) {
        c.x += col;
        c.y += r;
        ++c.count;
      }
    }
  }
  if (c.count > 0) {
    c.x /= c.count;
    c.y /= c.count;
  }
  return c;
}

EyeRenderParams clean_params() {
  EyeRenderParams p;
  p.texture_noise_rel = 0.0;
  return p;
}

constexpr double kThreshold = 0.2;

}  // namespace

TEST_CASE("straight-ahead gaze puts the pupil at the image center") {
  const auto p = clean_params();
  const Image img = render_eye({0, 0, 1}, p, 17, 1);
  const auto c = dark_centroid(img, kThreshold);
  REQUIRE(c.count > 0);
  CHECK(std::abs(c.x - 0.5 * (p.image_w - 1)) < 0.5);
  CHECK(std::abs(c.y - 0.5 * (p.image_h - 1)) < 0.5);
}

TEST_CASE("+/-10 degree horizontal gaze gives mirror-symmetric pupils") {
  const auto p = clean_params();
  const double a = 10.0 * std::numbers::pi / 180.0;
  const auto right = dark_centroid(render_eye({std::sin(a), 0, std::cos(a)}, p, 3, 1), kThreshold);
  const auto left = dark_centroid(render_eye({-std::sin(a), 0, std::cos(a)}, p, 3, 1), kThreshold);
  const double mid = 0.5 * (p.image_w - 1);
  CHECK(std::abs((right.x - mid) + (left.x - mid)) < 0.5);
  CHECK(std::abs(right.y - left.y) < 0.5);
  CHECK(right.x > mid);
}

TEST_CASE("pupil centroid moves strictly monotonically with gaze.x") {
  const auto p = clean_params();
  double prev = -1e9;
  for (int k = -4; k <= 4; ++k) {
    const double gx = 0.1 * k;
    const auto v = normalized(gx, 0.1, std::sqrt(1.0 - gx * gx - 0.01));
    const auto c = dark_centroid(render_eye(v, p, 5, 2), kThreshold);
    REQUIRE(c.count > 0);
    CHECK(c.x > prev);
    prev = c.x;
  }
}

TEST_CASE("render_eye determinism, range and errors") {
  const EyeRenderParams p;
  const GazeVector v = normalized(0.2, -0.1, 1.0);
  const Image a = render_eye(v, p, 1, 2);
  CHECK(a == render_eye(v, p, 1, 2));
  CHECK_FALSE(a == render_eye(v, p, 1, 3));
  CHECK_FALSE(a == render_eye(v, p, 4, 2));
  CHECK(a.min() >= 0.0);
  CHECK(a.max() <= 1.0);

  EyeRenderParams zoomed = p;
  zoomed.camera_scale_px_per_mm = 8.0;
  CHECK_THROWS_AS(render_eye(normalized(0.9, 0, 0.3), zoomed, 1, 1), NumericalError);
  CHECK_THROWS_AS(render_eye({1, 0, 0}, p, 1, 1), NumericalError);

  EyeRenderParams bad = p;
  bad.pupil_radius_mm = 7.0;
  CHECK_THROWS_AS(render_eye(v, bad, 1, 1), ConfigError);
}

TEST_CASE("subject jitter stays within +/-10% and keeps anatomy ordered") {
  const EyeRenderParams base;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto subj = make_subject(base, s);
    CHECK(std::abs(subj.params.iris_radius_mm / base.iris_radius_mm - 1.0) <= 0.1 + 1e-12);
    CHECK(std::abs(subj.params.pupil_radius_mm / base.pupil_radius_mm - 1.0) <= 0.1 + 1e-12);
    CHECK(subj.params.pupil_radius_mm < subj.params.iris_radius_mm);
    CHECK(subj.params.pupil_level < subj.params.iris_level);
  }
}

TEST_CASE("render_round sizes, labels and determinism") {
  const CalibratedScreen screen;
  const GridSpec grid;
  EyeRenderParams p;
  p.image_h = p.image_w = 32;
  p.camera_scale_px_per_mm = 1.2;
  p.light_x_px = p.light_y_px = 15.5;
  const auto one = render_round(grid, screen, p, 2, 1, 1, 99);
  CHECK(one.size() == 225);
  const auto three = render_round(grid, screen, p, 2, 1, 3, 99);
  CHECK(three.size() == 675);
  const auto again = render_round(grid, screen, p, 2, 1, 1, 99);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].image == again[i].image);
    const auto expect = screen_to_gaze(one[i].screen_pt, screen);
    CHECK(std::abs(expect.x - one[i].gaze.x) + std::abs(expect.y - one[i].gaze.y) +
              std::abs(expect.z - one[i].gaze.z) < 1e-6);
    CHECK(one[i].image.min() >= 0.0);
    CHECK(one[i].image.max() <= 1.0);
  }
  CHECK(one[16].grid_i == 1);
  CHECK(one[16].grid_j == 1);
  CHECK(three[5].repeat == 2);
  CHECK(three[5].grid_j == 1);
  // A different round of the same subject differs only in jitter.
  const auto other_round = render_round(grid, screen, p, 2, 2, 1, 99);
  CHECK_FALSE(other_round[0].image == one[0].image);
}

TEST_CASE("light at the grid center: corner gazes are darker than the center gaze") {
  const CalibratedScreen screen;
  const GridSpec grid;
  EyeRenderParams p;
  const auto pts = make_grid(grid, screen.monitor);
  const auto center = pts[7 * 15 + 7];
  const auto gc = screen_to_gaze(center, screen);
  const auto lc = pupil_center_px(gc, p);
  p.light_x_px = lc.x;
  p.light_y_px = lc.y;
  const auto anatomy = make_subject(p, 3);
  const double mean_center = render_eye(gc, anatomy, 1).mean();
  for (int idx : {0, 14, 210, 224}) {
    const double mean_corner = render_eye(screen_to_gaze(pts[idx], screen), anatomy, 1).mean();
    CHECK(mean_corner < mean_center);
  }
}
