#pragma once

#include <functional>
#include <map>
#include <string>

#include "flattrack/image.hpp"
#include "flattrack/optics.hpp"

namespace flattrack::recon {

struct WienerConfig {
  double gamma = 1e-5;
  // Expected scene size; 0 infers it from the measurement and PSF sizes.
  int output_h = 0;
  int output_w = 0;
  bool clip01 = false;

  void validate() const;
};

/// Size of the zero-padded grid the deconvolution works on for a
/// measurement of the given size: the next FFT-friendly size per axis.
std::pair<int, int> padded_grid(int meas_h, int meas_w);

/// Regularized inverse on the whole padded grid, PSF anchored top-left:
///   X = F^-1( conj(F(P)) F(Y) / (|F(P)|^2 + gamma) )
/// This is the exact minimizer of the circular-model Tikhonov objective.
Image wiener_deconvolve_full(const Image& y, const optics::Psf& p, double gamma);

/// Leading output_h x output_w block of the full-grid estimate, optionally
/// clamped to [0,1].
Image wiener_deconvolve(const Image& y, const optics::Psf& p, const WienerConfig& cfg);

/// ||Y - P (*) X||_F^2 + gamma ||X||_F^2 with circular convolution on the
/// padded grid of Y; x_hat may be the scene-sized block or the full grid.
double tikhonov_objective(const Image& x_hat, const Image& y, const optics::Psf& p, double gamma);

using Reconstructor = std::function<Image(const Image&, const optics::Psf&, const WienerConfig&)>;

/// Name -> reconstructor table. "wiener" and "identity" are built in; the
/// identity entry returns the measurement untouched (lens-based baseline).
class ReconstructorRegistry {
 public:
  ReconstructorRegistry();

  void add(const std::string& name, Reconstructor fn);
  bool contains(const std::string& name) const { return table_.count(name) != 0; }
  const Reconstructor& get(const std::string& name) const;

 private:
  std::map<std::string, Reconstructor> table_;
};

const ReconstructorRegistry& default_registry();

/// Entry point of the first pipeline stage.
Image reconstruct(const Image& y, const optics::Psf& p, const WienerConfig& cfg,
                  const std::string& method = "wiener");

}  // namespace flattrack::recon
