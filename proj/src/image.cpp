#include "flattrack/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "flattrack/error.hpp"

namespace flattrack {

Image::Image(int height, int width, double fill) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw ConfigError("image dimensions must be non-negative");
  data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

Image::Image(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height < 0 || width < 0) throw ConfigError("image dimensions must be non-negative");
  if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw ConfigError("image data length does not match dimensions");
  }
}

double Image::sum() const noexcept { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Image::max() const noexcept {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

double Image::min() const noexcept {
  return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double Image::mean() const noexcept {
  return data_.empty() ? 0.0 : sum() / static_cast<double>(data_.size());
}

bool Image::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Image crop(const Image& img, int row0, int col0, int h, int w) {
  if (row0 < 0 || col0 < 0 || h < 0 || w < 0 || row0 + h > img.height() ||
      col0 + w > img.width()) {
    throw ConfigError("crop window outside image");
  }
  Image out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) out(r, c) = img(row0 + r, col0 + c);
  }
  return out;
}

Image center_crop(const Image& img, int h, int w) {
  if (h > img.height() || w > img.width()) {
    throw ConfigError("crop size exceeds image size");
  }
  return crop(img, (img.height() - h) / 2, (img.width() - w) / 2, h, w);
}

namespace {

// Overlap weights of destination cells onto source cells along one axis.
struct AxisWeights {
  std::vector<int> first;
  std::vector<std::vector<double>> weights;
};

AxisWeights area_weights(int src, int dst) {
  AxisWeights aw;
  aw.first.resize(static_cast<std::size_t>(dst));
  aw.weights.resize(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int d = 0; d < dst; ++d) {
    const double lo = d * scale;
    const double hi = (d + 1) * scale;
    const int s0 = static_cast<int>(std::floor(lo));
    const int s1 = std::min(src, static_cast<int>(std::ceil(hi)));
    aw.first[d] = s0;
    for (int s = s0; s < s1; ++s) {
      const double overlap = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
      aw.weights[d].push_back(overlap / scale);
    }
  }
  return aw;
}

}  // namespace

Image resize_area(const Image& img, int h, int w) {
  if (h <= 0 || w <= 0 || img.empty()) throw ConfigError("resize to empty image");
  if (h == img.height() && w == img.width()) return img;
  const auto rows = area_weights(img.height(), h);
  const auto cols = area_weights(img.width(), w);
  Image out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < rows.weights[r].size(); ++i) {
        const int sr = rows.first[r] + static_cast<int>(i);
        double row_acc = 0.0;
        for (std::size_t j = 0; j < cols.weights[c].size(); ++j) {
          row_acc += cols.weights[c][j] * img(sr, cols.first[c] + static_cast<int>(j));
        }
        acc += rows.weights[r][i] * row_acc;
      }
      out(r, c) = acc;
    }
  }
  return out;
}

Image clip01(Image img) {
  for (double& v : img.pixels()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

Image quantize_f32(Image img) {
  for (double& v : img.pixels()) v = static_cast<double>(static_cast<float>(v));
  return img;
}

double psnr(const Image& estimate, const Image& reference) {
  if (estimate.height() != reference.height() || estimate.width() != reference.width()) {
    throw ConfigError("psnr: dimension mismatch");
  }
  double mse = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double d = estimate.data()[i] - reference.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(estimate.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffU) << 24) | ((v & 0xff00U) << 8) | ((v >> 8) & 0xff00U) | (v >> 24);
  }
}

}  // namespace

void save_fltimg(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "FLTIMG1 " << img.height() << ' ' << img.width() << '\n';
  std::vector<std::uint32_t> words(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float f = static_cast<float>(img.data()[i]);
    words[i] = to_little_endian(std::bit_cast<std::uint32_t>(f));
  }
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (!out) throw DataError("write failed: " + path.string());
}

Image load_fltimg(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw DataError("missing FLTIMG header: " + path.string());
  std::istringstream hs(header);
  std::string magic;
  long long h = -1;
  long long w = -1;
  std::string trailing;
  if (!(hs >> magic >> h >> w) || magic != "FLTIMG1" || (hs >> trailing)) {
    throw DataError("malformed FLTIMG header: " + path.string());
  }
  if (h < 0 || w < 0 || h > (1 << 20) || w > (1 << 20)) {
    throw DataError("implausible FLTIMG dimensions: " + path.string());
  }
  const auto n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  std::vector<std::uint32_t> words(n);
  in.read(reinterpret_cast<char*>(words.data()),
          static_cast<std::streamsize>(n * sizeof(std::uint32_t)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(std::uint32_t)) {
    throw DataError("truncated FLTIMG payload: " + path.string());
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes after FLTIMG payload: " + path.string());
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float f = std::bit_cast<float>(to_little_endian(words[i]));
    if (!std::isfinite(f)) throw DataError("non-finite value in FLTIMG: " + path.string());
    data[i] = f;
  }
  return Image(static_cast<int>(h), static_cast<int>(w), std::move(data));
}

void save_pgm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> bytes(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data()[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace flattrack
