#include "flattrack/optics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "flattrack/error.hpp"
#include "flattrack/fft.hpp"
#include "flattrack/rng.hpp"

namespace flattrack::optics {

Psf::Psf(Image kernel) : kernel_(std::move(kernel)) {
  if (kernel_.empty()) throw ConfigError("PSF must be non-empty");
  for (double v : kernel_.pixels()) {
    if (!std::isfinite(v)) throw DataError("PSF contains a non-finite value");
    if (v < 0.0) throw DataError("PSF contains a negative value");
  }
  normalized_ = std::abs(kernel_.sum() - 1.0) <= 1e-9;
}

Psf normalize(const Image& kernel) {
  const double total = kernel.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("cannot normalize an all-zero PSF");
  Image out = kernel;
  for (double& v : out.pixels()) v /= total;
  out = quantize_f32(std::move(out));
  // Push the float32 rounding residual into the largest sample.
  auto px = out.pixels();
  const auto peak = static_cast<std::size_t>(std::max_element(px.begin(), px.end()) - px.begin());
  for (int iter = 0; iter < 4; ++iter) {
    const double residual = 1.0 - out.sum();
    if (residual == 0.0) break;
    px[peak] = static_cast<double>(static_cast<float>(px[peak] + residual));
  }
  return Psf(std::move(out));
}

void NoiseModel::validate() const {
  if (!(sigma_rel >= 0.0) || !(sigma_rel < 1.0)) throw ConfigError("noise sigma_rel must lie in [0, 1)");
}

Image full_convolve(const Image& x, const Image& p) {
  if (x.empty() || p.empty()) throw ConfigError("full_convolve: empty operand");
  const long long out_h = static_cast<long long>(x.height()) + p.height() - 1;
  const long long out_w = static_cast<long long>(x.width()) + p.width() - 1;
  if (out_h > (1 << 15) || out_w > (1 << 15)) throw ConfigError("full_convolve: dimension overflow");
  const int grid_h = fft::next_fast_size(static_cast<int>(out_h));
  const int grid_w = fft::next_fast_size(static_cast<int>(out_w));
  auto fx = fft::forward(x, grid_h, grid_w);
  const auto fp = fft::forward(p, grid_h, grid_w);
  for (std::size_t i = 0; i < fx.bins.size(); ++i) fx.bins[i] *= fp.bins[i];
  return crop(fft::inverse(fx), 0, 0, static_cast<int>(out_h), static_cast<int>(out_w));
}

Image full_convolve(const Image& x, const Psf& p) { return full_convolve(x, p.image()); }

Image simulate_measurement(const Image& x, const Psf& p, const NoiseModel& noise, std::uint64_t seed) {
  noise.validate();
  Image y = full_convolve(x, p);
  if (noise.kind == NoiseModel::Kind::none || noise.sigma_rel == 0.0) return y;
  const double sigma = noise.sigma_rel * y.max();
  Xoshiro256 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (double& v : y.pixels()) v += gauss(rng);
  return y;
}

Image crop_to_sensor(const Image& y, int sensor_h, int sensor_w) {
  if (sensor_h <= 0 || sensor_w <= 0) throw ConfigError("sensor dimensions must be positive");
  if (sensor_h > y.height() || sensor_w > y.width()) {
    throw ConfigError("sensor larger than measurement");
  }
  return center_crop(y, sensor_h, sensor_w);
}

Psf generate_contour_psf(int h, int w, const ContourPsfParams& params, std::uint64_t seed) {
  if (h < 16 || w < 16) throw ConfigError("contour PSF needs dimensions >= 16");
  if (params.n_waves < 1 || !(params.levelset_width > 0.0) || !(params.fill_target > 0.0) ||
      !(params.fill_target < 1.0)) {
    throw ConfigError("degenerate contour PSF parameters");
  }
  Xoshiro256 rng(seed);
  const double two_pi = 2.0 * std::numbers::pi;
  const double min_period = 4.0;
  const double max_period = std::max(6.0, std::min(h, w) / 4.0);

  struct Wave {
    double kx, ky, phase;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < params.n_waves; ++i) {
    const double theta = two_pi * rng.uniform();
    const double period = min_period + (max_period - min_period) * rng.uniform();
    const double k = two_pi / period;
    waves.push_back({k * std::cos(theta), k * std::sin(theta), two_pi * rng.uniform()});
  }

  std::vector<double> field(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double f = 0.0;
      for (const auto& wv : waves) f += std::cos(wv.kx * c + wv.ky * r + wv.phase);
      field[static_cast<std::size_t>(r) * w + c] = f;
    }
  }

  std::vector<double> sorted = field;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  double var = 0.0;
  for (double f : field) var += (f - median) * (f - median);
  const double scale = std::sqrt(var / field.size());
  if (!(scale > 0.0)) throw NumericalError("contour PSF field is constant");

  std::vector<double> dist(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) dist[i] = std::abs(field[i] - median) / scale;

  // Keep the requested band unless its fill misses the target by more than
  // 20%; then widen/narrow it to the target quantile.
  double width = params.levelset_width;
  const auto fill_at = [&](double wd) {
    return static_cast<double>(std::count_if(dist.begin(), dist.end(), [wd](double d) { return d < wd; })) /
           static_cast<double>(dist.size());
  };
  const double fill = fill_at(width);
  if (fill < 0.8 * params.fill_target || fill > 1.2 * params.fill_target) {
    std::vector<double> sd = dist;
    const auto k = std::min(sd.size() - 1, static_cast<std::size_t>(params.fill_target * sd.size()));
    std::nth_element(sd.begin(), sd.begin() + k, sd.end());
    width = sd[k];
  }
  if (!(width > 0.0)) throw NumericalError("contour PSF band collapsed to zero width");

  Image mask(h, w);
  auto px = mask.pixels();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    px[i] = dist[i] < width ? 1.0 - dist[i] / width : 0.0;
  }
  if (!(mask.sum() > 0.0)) throw NumericalError("contour PSF parameters produce an all-zero mask");
  return normalize(mask);
}

double spectral_flatness_ratio(const Psf& p) {
  const auto spec = fft::forward(p.image(), p.height(), p.width());
  // Expand the half spectrum to the full grid by Hermitian symmetry.
  double mx = 0.0;
  double total = 0.0;
  const int bc = spec.bin_cols();
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const bool mirrored = c >= bc;
      const int rr = mirrored ? (spec.rows - r) % spec.rows : r;
      const int cc = mirrored ? spec.cols - c : c;
      const double mag = std::abs(spec.bins[static_cast<std::size_t>(rr) * bc + cc]);
      mx = std::max(mx, mag);
      total += mag;
    }
  }
  return mx / (total / (static_cast<double>(spec.rows) * spec.cols));
}

double fill_fraction(const Psf& p) {
  const auto px = p.image().pixels();
  return static_cast<double>(std::count_if(px.begin(), px.end(), [](double v) { return v > 0.0; })) /
         static_cast<double>(px.size());
}

void save_psf(const Psf& p, const std::filesystem::path& path) { save_fltimg(p.image(), path); }

Psf load_psf(const std::filesystem::path& path) { return Psf(load_fltimg(path)); }

}  // namespace flattrack::optics
