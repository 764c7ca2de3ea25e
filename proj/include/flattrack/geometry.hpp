#pragma once

#include <array>
#include <vector>

namespace flattrack::geometry {

/// Unit gaze direction in the eye frame: x screen-right, y screen-up,
/// z from the eye toward the screen plane.
struct GazeVector {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  double norm() const noexcept;
  friend bool operator==(const GazeVector&, const GazeVector&) = default;
};

GazeVector normalized(double x, double y, double z);

/// Monitor pixel coordinates, origin top-left, y growing downward. Not
/// clamped to the visible area.
struct ScreenPoint {
  double x_px = 0.0;
  double y_px = 0.0;
  friend bool operator==(const ScreenPoint&, const ScreenPoint&) = default;
};

struct MonitorSpec {
  int width_px = 1920;
  int height_px = 1080;
  double pixel_pitch_mm = 0.2938;
  double distance_mm = 500.0;
};

struct CalibratedScreen {
  MonitorSpec monitor{};
  ScreenPoint calib_px{960.0, 540.0};  // pixel the eye faces head-on

  void validate() const;
};

struct GridSpec {
  int rows = 15;
  int cols = 15;
  double spacing_x_px = 121.3;
  double spacing_y_px = 66.3;
  ScreenPoint origin_px{110.9, 75.9};  // top-left grid point

  void validate(const MonitorSpec& monitor) const;
};

GazeVector screen_to_gaze(const ScreenPoint& p, const CalibratedScreen& s);

/// Throws UnprojectableGaze when v.z <= 1e-6.
ScreenPoint gaze_to_screen(const GazeVector& v, const CalibratedScreen& s);

/// d(screen point)/d(v): row 0 is x_px, row 1 is y_px; columns are v.x, v.y, v.z.
using ProjectionJacobian = std::array<std::array<double, 3>, 2>;
ProjectionJacobian gaze_to_screen_jacobian(const GazeVector& v, const CalibratedScreen& s);

/// Angle between two unit vectors in degrees, in [0, 180].
double angular_error_deg(const GazeVector& a, const GazeVector& b);

/// Row-major grid points; point (i, j) = origin + (j*spacing_x, i*spacing_y).
std::vector<ScreenPoint> make_grid(const GridSpec& g, const MonitorSpec& monitor);

struct GridAngularStats {
  int rows = 0;
  int cols = 0;
  std::vector<ScreenPoint> points;  // row-major
  // Angle to the next point along x (cols-1 entries per row) and along y
  // ((rows-1) entries per column), both stored row-major in degrees.
  std::vector<double> dtheta_x_deg;
  std::vector<double> dtheta_y_deg;
  std::vector<double> eccentricity_deg;  // angle from head-on per point
  double min_dx_deg = 0.0;
  double max_dx_deg = 0.0;
  double min_dy_deg = 0.0;
  double max_dy_deg = 0.0;

  double dx(int i, int j) const { return dtheta_x_deg[static_cast<std::size_t>(i * (cols - 1) + j)]; }
  double dy(int i, int j) const { return dtheta_y_deg[static_cast<std::size_t>(i * cols + j)]; }
};

GridAngularStats grid_angular_stats(const GridSpec& g, const CalibratedScreen& s);

enum class Axis { x, y };

/// Angle subtended at the eye by a segment of extent_px centered on calib_px.
double fov_deg(double extent_px, Axis axis, const CalibratedScreen& s);

}  // namespace flattrack::geometry
