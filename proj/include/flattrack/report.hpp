#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "flattrack/regressor.hpp"

namespace flattrack::report {

/// epoch,train_loss,val_loss,val_err_deg,lr,skipped
void write_history_csv(const std::filesystem::path& path, const std::vector<regress::EpochRecord>& history);

/// grid_i,grid_j,x_px,y_px,mean_err_deg,count
void write_per_point_csv(const std::filesystem::path& path, const std::vector<regress::GridPointError>& points);
std::vector<regress::GridPointError> read_per_point_csv(const std::filesystem::path& path);

struct LatencyRow {
  std::string stage;
  regress::LatencyStats stats;
};

/// stage,median_ms,p95_ms,mean_ms,iterations,fps (fps = 1000 / median_ms)
void write_latency_csv(const std::filesystem::path& path, const std::vector<LatencyRow>& rows);

inline constexpr double kMinCircleRadiusPx = 2.0;

struct GridSvgOptions {
  double width_px = 1920.0;
  double height_px = 1080.0;
  // Radius given to the largest error, as a fraction of the smallest grid spacing.
  double max_radius_fraction = 0.45;
};

/// Radius in screen pixels: proportional to error, floored at kMinCircleRadiusPx.
double circle_radius(double err_deg, double px_per_deg);

/// One circle per grid point, centered at its screen position, radius
/// proportional to its mean error.
void write_grid_svg(const std::filesystem::path& path, const std::vector<regress::GridPointError>& points,
                    const GridSvgOptions& opts = {});

/// Writes text to a file, throwing DataError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace flattrack::report
