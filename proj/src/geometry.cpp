#include "flattrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "flattrack/error.hpp"

namespace flattrack::geometry {

namespace {
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kMinProjectableZ = 1e-6;
}  // namespace

double GazeVector::norm() const noexcept { return std::sqrt(x * x + y * y + z * z); }

GazeVector normalized(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("cannot normalize a zero or non-finite vector");
  return {x / n, y / n, z / n};
}

void CalibratedScreen::validate() const {
  if (monitor.width_px <= 0 || monitor.height_px <= 0) throw ConfigError("monitor size must be positive");
  if (!(monitor.pixel_pitch_mm > 0.0) || !(monitor.distance_mm > 0.0)) {
    throw ConfigError("pixel pitch and screen distance must be positive");
  }
  if (!(monitor.distance_mm > 10.0 * monitor.pixel_pitch_mm)) {
    throw ConfigError("screen distance must be much larger than the pixel pitch");
  }
  if (calib_px.x_px < 0.0 || calib_px.x_px > monitor.width_px || calib_px.y_px < 0.0 ||
      calib_px.y_px > monitor.height_px) {
    throw ConfigError("calibration origin outside the monitor");
  }
}

void GridSpec::validate(const MonitorSpec& monitor) const {
  if (rows < 2 || cols < 2) throw ConfigError("grid needs at least 2 rows and 2 columns");
  if (!(spacing_x_px > 0.0) || !(spacing_y_px > 0.0)) throw ConfigError("grid spacing must be positive");
  const double x_last = origin_px.x_px + (cols - 1) * spacing_x_px;
  const double y_last = origin_px.y_px + (rows - 1) * spacing_y_px;
  if (origin_px.x_px < 0.0 || origin_px.y_px < 0.0 || x_last > monitor.width_px ||
      y_last > monitor.height_px) {
    throw ConfigError("grid exceeds monitor bounds");
  }
}

GazeVector screen_to_gaze(const ScreenPoint& p, const CalibratedScreen& s) {
  const auto& m = s.monitor;
  return normalized((p.x_px - s.calib_px.x_px) * m.pixel_pitch_mm,
                    -(p.y_px - s.calib_px.y_px) * m.pixel_pitch_mm, m.distance_mm);
}

ScreenPoint gaze_to_screen(const GazeVector& v, const CalibratedScreen& s) {
  if (!(v.z > kMinProjectableZ)) {
    throw UnprojectableGaze("unprojectable gaze: z = " + std::to_string(v.z));
  }
  const double k = s.monitor.distance_mm / s.monitor.pixel_pitch_mm;
  return {s.calib_px.x_px + k * v.x / v.z, s.calib_px.y_px - k * v.y / v.z};
}

ProjectionJacobian gaze_to_screen_jacobian(const GazeVector& v, const CalibratedScreen& s) {
  if (!(v.z > kMinProjectableZ)) {
    throw UnprojectableGaze("unprojectable gaze: z = " + std::to_string(v.z));
  }
  const double k = s.monitor.distance_mm / s.monitor.pixel_pitch_mm;
  const double iz = 1.0 / v.z;
  return {{{k * iz, 0.0, -k * v.x * iz * iz}, {0.0, -k * iz, k * v.y * iz * iz}}};
}

double angular_error_deg(const GazeVector& a, const GazeVector& b) {
  const double dot = std::clamp(a.x * b.x + a.y * b.y + a.z * b.z, -1.0, 1.0);
  return std::acos(dot) * kRadToDeg;
}

std::vector<ScreenPoint> make_grid(const GridSpec& g, const MonitorSpec& monitor) {
  g.validate(monitor);
  std::vector<ScreenPoint> pts;
  pts.reserve(static_cast<std::size_t>(g.rows * g.cols));
  for (int i = 0; i < g.rows; ++i) {
    for (int j = 0; j < g.cols; ++j) {
      pts.push_back({g.origin_px.x_px + j * g.spacing_x_px, g.origin_px.y_px + i * g.spacing_y_px});
    }
  }
  return pts;
}

GridAngularStats grid_angular_stats(const GridSpec& g, const CalibratedScreen& s) {
  GridAngularStats st;
  st.rows = g.rows;
  st.cols = g.cols;
  st.points = make_grid(g, s.monitor);
  std::vector<GazeVector> gaze;
  gaze.reserve(st.points.size());
  for (const auto& p : st.points) gaze.push_back(screen_to_gaze(p, s));
  const GazeVector ahead{0.0, 0.0, 1.0};
  for (const auto& v : gaze) st.eccentricity_deg.push_back(angular_error_deg(v, ahead));

  const auto at = [&](int i, int j) { return gaze[static_cast<std::size_t>(i * g.cols + j)]; };
  for (int i = 0; i < g.rows; ++i) {
    for (int j = 0; j + 1 < g.cols; ++j) st.dtheta_x_deg.push_back(angular_error_deg(at(i, j), at(i, j + 1)));
  }
  for (int i = 0; i + 1 < g.rows; ++i) {
    for (int j = 0; j < g.cols; ++j) st.dtheta_y_deg.push_back(angular_error_deg(at(i, j), at(i + 1, j)));
  }
  const auto [mnx, mxx] = std::minmax_element(st.dtheta_x_deg.begin(), st.dtheta_x_deg.end());
  const auto [mny, mxy] = std::minmax_element(st.dtheta_y_deg.begin(), st.dtheta_y_deg.end());
  st.min_dx_deg = *mnx;
  st.max_dx_deg = *mxx;
  st.min_dy_deg = *mny;
  st.max_dy_deg = *mxy;
  return st;
}

double fov_deg(double extent_px, Axis /*axis*/, const CalibratedScreen& s) {
  if (extent_px < 0.0) throw ConfigError("fov extent must be non-negative");
  // Square pixels: both axes share the pitch.
  const double half_mm = 0.5 * extent_px * s.monitor.pixel_pitch_mm;
  return 2.0 * std::atan(half_mm / s.monitor.distance_mm) * kRadToDeg;
}

}  // namespace flattrack::geometry
