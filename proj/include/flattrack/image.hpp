#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace flattrack {

/// Row-major grayscale image with double samples. Carries scenes,
/// PSFs, measurements and reconstructions alike.
class Image {
 public:
  Image() = default;
  Image(int height, int width, double fill = 0.0);
  Image(int height, int width, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int row, int col) noexcept { return data_[index(row, col)]; }
  double operator()(int row, int col) const noexcept { return data_[index(row, col)]; }

  std::span<double> pixels() noexcept { return data_; }
  std::span<const double> pixels() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  double sum() const noexcept;
  double max() const noexcept;
  double min() const noexcept;
  double mean() const noexcept;
  bool all_finite() const noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Crop of size (h, w) whose top-left corner sits at (row0, col0).
Image crop(const Image& img, int row0, int col0, int h, int w);

/// Centered crop; when the margin is odd the extra row/column is dropped
/// from the bottom/right (floor-centered).
Image center_crop(const Image& img, int h, int w);

/// Area-averaging resample to (h, w). Exact box filter for integer factors.
Image resize_area(const Image& img, int h, int w);

Image clip01(Image img);

/// Rounds every sample to the nearest float32, i.e. what FLTIMG stores.
Image quantize_f32(Image img);

/// Peak signal-to-noise ratio in dB for signals with unit peak.
double psnr(const Image& estimate, const Image& reference);

// FLTIMG: "FLTIMG1 <height> <width>\n" then height*width little-endian
// float32 values, row-major.
void save_fltimg(const Image& img, const std::filesystem::path& path);
Image load_fltimg(const std::filesystem::path& path);

/// 8-bit binary PGM for visualization; values clamped to [0,1].
void save_pgm(const Image& img, const std::filesystem::path& path);

}  // namespace flattrack
