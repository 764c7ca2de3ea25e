#pragma once

#include <cstdint>
#include <filesystem>

#include "flattrack/image.hpp"

namespace flattrack::optics {

/// Non-negative intensity PSF. When normalized its samples sum to one.
class Psf {
 public:
  Psf() = default;
  /// Validates non-negativity and finiteness; sets the normalized flag
  /// when the sum is within 1e-9 of one.
  explicit Psf(Image kernel);

  const Image& image() const noexcept { return kernel_; }
  int height() const noexcept { return kernel_.height(); }
  int width() const noexcept { return kernel_.width(); }
  bool normalized() const noexcept { return normalized_; }

 private:
  Image kernel_;
  bool normalized_ = false;
};

/// Rescales to unit sum on the float32 grid, so the PSF survives FLTIMG
/// round trips exactly and still sums to one within 1e-9.
Psf normalize(const Image& kernel);

struct NoiseModel {
  enum class Kind { none, gaussian };
  Kind kind = Kind::gaussian;
  double sigma_rel = 5e-3;  // std dev as a fraction of max(Y)

  void validate() const;
};

/// Linear (full-size) convolution, output (Hx+Hp-1) x (Wx+Wp-1).
Image full_convolve(const Image& x, const Image& p);
Image full_convolve(const Image& x, const Psf& p);

/// Y = P * X + N with N drawn deterministically from seed.
Image simulate_measurement(const Image& x, const Psf& p, const NoiseModel& noise, std::uint64_t seed);

/// Centered crop modelling a finite sensor.
Image crop_to_sensor(const Image& y, int sensor_h, int sensor_w);

struct ContourPsfParams {
  int n_waves = 24;
  double levelset_width = 0.08;  // half-width of the band, in units of the field's std dev
  double fill_target = 0.15;     // desired nonzero fraction
};

/// Sparse contour-band mask: a sum of random-orientation cosines kept
/// only near its median level set.
Psf generate_contour_psf(int h, int w, const ContourPsfParams& params, std::uint64_t seed);

/// max|F(P)| / mean|F(P)| on the PSF's own grid.
double spectral_flatness_ratio(const Psf& p);

/// Fraction of strictly positive samples.
double fill_fraction(const Psf& p);

void save_psf(const Psf& p, const std::filesystem::path& path);
/// Rejects malformed files and negative samples.
Psf load_psf(const std::filesystem::path& path);

}  // namespace flattrack::optics
