#include "flattrack/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "flattrack/csv.hpp"
#include "flattrack/error.hpp"

namespace flattrack::report {

namespace {

constexpr const char* kPerPointHeader = "grid_i,grid_j,x_px,y_px,mean_err_deg,count";

double min_positive_gap(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double d = v[i] - v[i - 1];
    if (d > 1e-9) best = std::min(best, d);
  }
  return best;
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

void write_history_csv(const std::filesystem::path& path, const std::vector<regress::EpochRecord>& history) {
  std::string s = "epoch,train_loss,val_loss,val_err_deg,lr,skipped\n";
  for (const auto& h : history) {
    s += csv::row(csv::num(h.epoch), csv::num(h.train_loss), csv::num(h.val_loss), csv::num(h.val_err_deg),
                  csv::num(h.lr), csv::num(h.skipped));
  }
  write_text(path, s);
}

void write_per_point_csv(const std::filesystem::path& path, const std::vector<regress::GridPointError>& points) {
  std::string s = std::string(kPerPointHeader) + "\n";
  for (const auto& p : points) {
    s += csv::row(csv::num(p.grid_i), csv::num(p.grid_j), csv::num(p.screen_pt.x_px), csv::num(p.screen_pt.y_px),
                  csv::num(p.mean_err_deg), csv::num(p.count));
  }
  write_text(path, s);
}

std::vector<regress::GridPointError> read_per_point_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || csv::split(line) != csv::split(kPerPointHeader)) {
    throw DataError("unexpected per-point header in " + path.string());
  }
  std::vector<regress::GridPointError> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 6) throw DataError("malformed per-point row in " + path.string() + ": " + line);
    try {
      regress::GridPointError p;
      p.grid_i = std::stoi(f[0]);
      p.grid_j = std::stoi(f[1]);
      p.screen_pt = {std::stod(f[2]), std::stod(f[3])};
      p.mean_err_deg = std::stod(f[4]);
      p.count = std::stoi(f[5]);
      if (!std::isfinite(p.mean_err_deg) || p.mean_err_deg < 0.0) throw std::invalid_argument("error value");
      out.push_back(p);
    } catch (const std::logic_error&) {
      throw DataError("malformed per-point row in " + path.string() + ": " + line);
    }
  }
  return out;
}

void write_latency_csv(const std::filesystem::path& path, const std::vector<LatencyRow>& rows) {
  std::string s = "stage,median_ms,p95_ms,mean_ms,iterations,fps\n";
  for (const auto& r : rows) {
    const double fps = r.stats.median_ms > 0.0 ? 1000.0 / r.stats.median_ms : 0.0;
    s += csv::row(r.stage, csv::num(r.stats.median_ms), csv::num(r.stats.p95_ms), csv::num(r.stats.mean_ms),
                  csv::num(r.stats.iterations), csv::num(fps));
  }
  write_text(path, s);
}

double circle_radius(double err_deg, double px_per_deg) {
  return std::max(kMinCircleRadiusPx, err_deg * px_per_deg);
}

void write_grid_svg(const std::filesystem::path& path, const std::vector<regress::GridPointError>& points,
                    const GridSvgOptions& opts) {
  std::vector<double> xs;
  std::vector<double> ys;
  double max_err = 0.0;
  for (const auto& p : points) {
    xs.push_back(p.screen_pt.x_px);
    ys.push_back(p.screen_pt.y_px);
    max_err = std::max(max_err, p.mean_err_deg);
  }
  double spacing = std::min(min_positive_gap(xs), min_positive_gap(ys));
  if (!std::isfinite(spacing)) spacing = 0.1 * std::min(opts.width_px, opts.height_px);
  const double px_per_deg = max_err > 0.0 ? opts.max_radius_fraction * spacing / max_err : 0.0;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << csv::num(opts.width_px) << ' '
    << csv::num(opts.height_px) << "\" width=\"" << csv::num(opts.width_px / 2) << "\" height=\""
    << csv::num(opts.height_px / 2) << "\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << csv::num(opts.width_px) << "\" height=\"" << csv::num(opts.height_px)
    << "\" fill=\"white\" stroke=\"black\"/>\n";
  s << "<!-- radius_px = max(" << csv::num(kMinCircleRadiusPx) << ", err_deg * " << csv::num(px_per_deg)
    << ") -->\n";
  for (const auto& p : points) {
    s << "<circle data-i=\"" << p.grid_i << "\" data-j=\"" << p.grid_j << "\" data-err-deg=\""
      << csv::num(p.mean_err_deg) << "\" cx=\"" << csv::num(p.screen_pt.x_px) << "\" cy=\""
      << csv::num(p.screen_pt.y_px) << "\" r=\"" << csv::num(circle_radius(p.mean_err_deg, px_per_deg))
      << "\" fill=\"steelblue\" fill-opacity=\"0.6\"/>\n";
  }
  s << "</svg>\n";
  write_text(path, s.str());
}

}  // namespace flattrack::report
