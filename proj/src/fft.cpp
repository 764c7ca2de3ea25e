#include "flattrack/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "flattrack/error.hpp"

namespace flattrack::fft {

int next_fast_size(int n) {
  if (n < 1) return 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

namespace {

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw NumericalError("fftw_malloc failed");
  return FftwBuffer<T>(p);
}

// FFTW's planner is not re-entrant; plans are created once per grid size
// under a lock and executed through the thread-safe new-array interface on
// fftw_malloc'd (identically aligned) buffers.
struct PlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plans] : plans_) {
      fftw_destroy_plan(plans.r2c);
      fftw_destroy_plan(plans.c2r);
    }
  }

  PlanPair get(int rows, int cols) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(rows, cols);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const auto n_real = static_cast<std::size_t>(rows) * cols;
    const auto n_cplx = static_cast<std::size_t>(rows) * (cols / 2 + 1);
    auto real = fftw_alloc<double>(n_real);
    auto cplx = fftw_alloc<fftw_complex>(n_cplx);
    PlanPair pp;
    pp.r2c = fftw_plan_dft_r2c_2d(rows, cols, real.get(), cplx.get(), FFTW_ESTIMATE);
    pp.c2r = fftw_plan_dft_c2r_2d(rows, cols, cplx.get(), real.get(), FFTW_ESTIMATE);
    if (pp.r2c == nullptr || pp.c2r == nullptr) throw NumericalError("FFTW planning failed");
    plans_.emplace(key, pp);
    return pp;
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, PlanPair> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

Spectrum forward(const Image& img, int rows, int cols) {
  if (rows < img.height() || cols < img.width()) throw ConfigError("FFT grid smaller than image");
  if (rows <= 0 || cols <= 0) throw ConfigError("FFT grid must be non-empty");
  const auto plans = plan_cache().get(rows, cols);
  const auto n_real = static_cast<std::size_t>(rows) * cols;
  const int bcols = cols / 2 + 1;
  const auto n_cplx = static_cast<std::size_t>(rows) * bcols;
  auto real = fftw_alloc<double>(n_real);
  auto cplx = fftw_alloc<fftw_complex>(n_cplx);
  std::memset(real.get(), 0, sizeof(double) * n_real);
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) real[static_cast<std::size_t>(r) * cols + c] = img(r, c);
  }
  fftw_execute_dft_r2c(plans.r2c, real.get(), cplx.get());
  Spectrum spec;
  spec.rows = rows;
  spec.cols = cols;
  spec.bins.resize(n_cplx);
  for (std::size_t i = 0; i < n_cplx; ++i) spec.bins[i] = {cplx[i][0], cplx[i][1]};
  return spec;
}

Image inverse(const Spectrum& spec) {
  const auto plans = plan_cache().get(spec.rows, spec.cols);
  const auto n_real = static_cast<std::size_t>(spec.rows) * spec.cols;
  const auto n_cplx = spec.bins.size();
  if (n_cplx != static_cast<std::size_t>(spec.rows) * spec.bin_cols()) {
    throw ConfigError("spectrum size does not match its grid");
  }
  auto real = fftw_alloc<double>(n_real);
  auto cplx = fftw_alloc<fftw_complex>(n_cplx);
  for (std::size_t i = 0; i < n_cplx; ++i) {
    cplx[i][0] = spec.bins[i].real();
    cplx[i][1] = spec.bins[i].imag();
  }
  fftw_execute_dft_c2r(plans.c2r, cplx.get(), real.get());
  const double scale = 1.0 / static_cast<double>(n_real);
  std::vector<double> data(n_real);
  for (std::size_t i = 0; i < n_real; ++i) data[i] = real[i] * scale;
  return Image(spec.rows, spec.cols, std::move(data));
}

}  // namespace flattrack::fft
