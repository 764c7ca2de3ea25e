#pragma once

#include <complex>
#include <vector>

#include "flattrack/image.hpp"

namespace flattrack::fft {

/// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
int next_fast_size(int n);

/// Half-spectrum of a real (rows x cols) grid: rows x (cols/2 + 1) bins.
struct Spectrum {
  int rows = 0;
  int cols = 0;  // spatial width of the grid
  std::vector<std::complex<double>> bins;

  int bin_cols() const noexcept { return cols / 2 + 1; }
};

/// Zero-pads img into a (rows x cols) grid at the top-left and transforms it.
Spectrum forward(const Image& img, int rows, int cols);

/// Unnormalized-inverse compensated: inverse(forward(x)) == x.
Image inverse(const Spectrum& spec);

}  // namespace flattrack::fft
