#include "flattrack/reconstruct.hpp"

#include <cmath>

#include "flattrack/error.hpp"
#include "flattrack/fft.hpp"

namespace flattrack::recon {

void WienerConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("Wiener gamma must be positive");
  if (output_h < 0 || output_w < 0) throw ConfigError("Wiener output size must be non-negative");
}

std::pair<int, int> padded_grid(int meas_h, int meas_w) {
  return {fft::next_fast_size(meas_h), fft::next_fast_size(meas_w)};
}

Image wiener_deconvolve_full(const Image& y, const optics::Psf& p, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("Wiener gamma must be positive");
  if (y.height() < p.height() || y.width() < p.width()) {
    throw ConfigError("measurement smaller than PSF");
  }
  const auto [gh, gw] = padded_grid(y.height(), y.width());
  auto fy = fft::forward(y, gh, gw);
  const auto fp = fft::forward(p.image(), gh, gw);
  for (std::size_t i = 0; i < fy.bins.size(); ++i) {
    const auto h = fp.bins[i];
    fy.bins[i] = std::conj(h) * fy.bins[i] / (std::norm(h) + gamma);
  }
  return fft::inverse(fy);
}

Image wiener_deconvolve(const Image& y, const optics::Psf& p, const WienerConfig& cfg) {
  cfg.validate();
  if (y.height() < p.height() || y.width() < p.width()) {
    throw ConfigError("measurement smaller than PSF");
  }
  const int oh = cfg.output_h > 0 ? cfg.output_h : y.height() - p.height() + 1;
  const int ow = cfg.output_w > 0 ? cfg.output_w : y.width() - p.width() + 1;
  if (y.height() != oh + p.height() - 1 || y.width() != ow + p.width() - 1) {
    throw ConfigError("measurement size does not match scene + PSF - 1");
  }
  Image x = crop(wiener_deconvolve_full(y, p, cfg.gamma), 0, 0, oh, ow);
  return cfg.clip01 ? clip01(std::move(x)) : x;
}

double tikhonov_objective(const Image& x_hat, const Image& y, const optics::Psf& p, double gamma) {
  const auto [gh, gw] = padded_grid(y.height(), y.width());
  if (x_hat.height() > gh || x_hat.width() > gw) throw ConfigError("estimate larger than the padded grid");
  auto fx = fft::forward(x_hat, gh, gw);
  const auto fp = fft::forward(p.image(), gh, gw);
  for (std::size_t i = 0; i < fx.bins.size(); ++i) fx.bins[i] *= fp.bins[i];
  const Image model = fft::inverse(fx);
  double data_term = 0.0;
  for (int r = 0; r < gh; ++r) {
    for (int c = 0; c < gw; ++c) {
      const double yv = (r < y.height() && c < y.width()) ? y(r, c) : 0.0;
      const double d = yv - model(r, c);
      data_term += d * d;
    }
  }
  double reg = 0.0;
  for (double v : x_hat.pixels()) reg += v * v;
  return data_term + gamma * reg;
}

ReconstructorRegistry::ReconstructorRegistry() {
  add("wiener", [](const Image& y, const optics::Psf& p, const WienerConfig& cfg) {
    return wiener_deconvolve(y, p, cfg);
  });
  add("identity", [](const Image& y, const optics::Psf&, const WienerConfig&) { return y; });
}

void ReconstructorRegistry::add(const std::string& name, Reconstructor fn) {
  table_[name] = std::move(fn);
}

const Reconstructor& ReconstructorRegistry::get(const std::string& name) const {
  const auto it = table_.find(name);
  if (it == table_.end()) throw ConfigError("unknown reconstructor: " + name);
  return it->second;
}

const ReconstructorRegistry& default_registry() {
  static const ReconstructorRegistry registry;
  return registry;
}

Image reconstruct(const Image& y, const optics::Psf& p, const WienerConfig& cfg, const std::string& method) {
  return default_registry().get(method)(y, p, cfg);
}

}  // namespace flattrack::recon
