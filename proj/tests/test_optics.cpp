#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "flattrack/error.hpp"
#include "flattrack/optics.hpp"
#include "oracles.hpp"

using namespace flattrack;
using namespace flattrack::optics;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "flattrack_test_optics";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("full_convolve: small worked example") {
  const Image x(2, 2, {1, 2, 3, 4});
  const Image p(2, 2, {1, 0, 0, 1});
  const Image expected = oracle::direct_convolve(x, p);
  CHECK(expected == Image(3, 3, {1, 2, 0, 3, 5, 2, 0, 3, 4}));
  const Image y = full_convolve(x, p);
  REQUIRE(y.height() == 3);
  REQUIRE(y.width() == 3);
  CHECK(oracle::max_abs_diff(y, expected) < 1e-12);
}

TEST_CASE("full_convolve: 1x1 unit kernel is the identity") {
  std::mt19937_64 rng(1);
  const Image x = oracle::random_image(rng, 7, 5);
  CHECK(oracle::max_abs_diff(full_convolve(x, Image(1, 1, 1.0)), x) < 1e-12);
}

TEST_CASE("full_convolve matches direct summation and commutes (sizes up to 32)") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dim(1, 32);
  for (int k = 0; k < 40; ++k) {
    const Image x = oracle::random_image(rng, dim(rng), dim(rng), -1.0, 1.0);
    const Image p = oracle::random_image(rng, dim(rng), dim(rng));
    const Image direct = oracle::direct_convolve(x, p);
    const Image fast = full_convolve(x, p);
    CHECK(oracle::rel_error(fast, direct) < 1e-9);
    CHECK(oracle::rel_error(full_convolve(p, x), fast) < 1e-9);
  }
}

TEST_CASE("full_convolve is linear and preserves energy with a normalized PSF") {
  std::mt19937_64 rng(3);
  const Image x1 = oracle::random_image(rng, 20, 17);
  const Image x2 = oracle::random_image(rng, 20, 17);
  const Psf p = generate_contour_psf(16, 16, {}, 5);
  const double a = 0.7;
  const double b = -2.3;
  Image mix(20, 17);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.pixels()[i] = a * x1.data()[i] + b * x2.data()[i];
  const Image lhs = full_convolve(mix, p);
  const Image y1 = full_convolve(x1, p);
  const Image y2 = full_convolve(x2, p);
  Image rhs(lhs.height(), lhs.width());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs.pixels()[i] = a * y1.data()[i] + b * y2.data()[i];
  CHECK(oracle::rel_error(lhs, rhs) < 1e-9);
  CHECK(std::abs(y1.sum() - x1.sum()) / x1.sum() < 1e-6);
}

TEST_CASE("simulate_measurement noise contract") {
  std::mt19937_64 rng(4);
  const Image x = oracle::random_image(rng, 24, 24);
  const Psf p = generate_contour_psf(16, 16, {}, 9);
  const Image clean = full_convolve(x, p);
  CHECK(simulate_measurement(x, p, {NoiseModel::Kind::none, 0.3}, 1) == clean);
  CHECK(simulate_measurement(x, p, {NoiseModel::Kind::gaussian, 0.0}, 1) == clean);
  const NoiseModel g{NoiseModel::Kind::gaussian, 0.02};
  CHECK(simulate_measurement(x, p, g, 42) == simulate_measurement(x, p, g, 42));
  CHECK_FALSE(simulate_measurement(x, p, g, 42) == simulate_measurement(x, p, g, 43));
  CHECK_THROWS_AS(simulate_measurement(x, p, {NoiseModel::Kind::gaussian, 1.0}, 1), ConfigError);
}

TEST_CASE("simulate_measurement: empirical noise std within 2% of sigma_rel*max(Y)") {
  // Statistical oracle over >= 1e5 pixels.
  std::mt19937_64 rng(5);
  const Image x = oracle::random_image(rng, 300, 300);
  const Psf p = generate_contour_psf(32, 32, {}, 3);
  const NoiseModel g{NoiseModel::Kind::gaussian, 0.01};
  const Image clean = full_convolve(x, p);
  const Image noisy = simulate_measurement(x, p, g, 1234);
  REQUIRE(noisy.size() >= 100000);
  double mean = 0.0;
  for (std::size_t i = 0; i < noisy.size(); ++i) mean += noisy.data()[i] - clean.data()[i];
  mean /= static_cast<double>(noisy.size());
  double var = 0.0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const double d = noisy.data()[i] - clean.data()[i] - mean;
    var += d * d;
  }
  const double sd = std::sqrt(var / static_cast<double>(noisy.size() - 1));
  const double target = 0.01 * clean.max();
  CHECK(std::abs(sd - target) / target < 0.02);
}

TEST_CASE("crop_to_sensor centering") {
  Image y(5, 5);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) y(r, c) = 10 * r + c;
  CHECK(crop_to_sensor(y, 5, 5) == y);
  const Image c3 = crop_to_sensor(y, 3, 3);
  CHECK(c3(0, 0) == 11);
  CHECK(c3(2, 2) == 33);
  const Image c2 = crop_to_sensor(y, 2, 2);
  CHECK(c2(0, 0) == 11);
  CHECK(c2(1, 1) == 22);
  CHECK_THROWS_AS(crop_to_sensor(y, 6, 5), ConfigError);
}

TEST_CASE("contour PSF: normalization, determinism, fill and validation") {
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
    const Psf p = generate_contour_psf(64, 48, {}, seed);
    CHECK(std::abs(p.image().sum() - 1.0) < 1e-9);
    CHECK(p.image().min() >= 0.0);
    CHECK(p.normalized());
    CHECK(std::abs(fill_fraction(p) - 0.15) <= 0.2 * 0.15);
    CHECK(generate_contour_psf(64, 48, {}, seed).image() == p.image());
  }
  CHECK_THROWS_AS(generate_contour_psf(15, 64, {}, 1), ConfigError);
  CHECK_THROWS_AS(generate_contour_psf(64, 64, {0, 0.08, 0.15}, 1), ConfigError);
  CHECK_THROWS_AS(generate_contour_psf(64, 64, {24, 0.08, 0.0}, 1), ConfigError);
}

TEST_CASE("contour PSF spectral flatness on 128x128 (naive DFT oracle)") {
  const Psf p = generate_contour_psf(128, 128, {}, 2024);
  const auto [mx, mean] = oracle::dft_magnitude_stats(p.image());
  const double ratio = mx / mean;
  MESSAGE("max|F|/mean|F| = " << ratio);
  CHECK(spectral_flatness_ratio(p) == doctest::Approx(ratio).epsilon(1e-9));
  // Parseval bound: the ratio cannot drop below 1/sqrt(sum p^2).
  double sq = 0.0;
  for (double v : p.image().pixels()) sq += v * v;
  CHECK(ratio >= 1.0 / std::sqrt(sq) - 1e-9);
  CHECK(ratio < 70.0);
}

TEST_CASE("FLTIMG round trip and validation") {
  const Psf p = generate_contour_psf(32, 20, {}, 77);
  const auto path = temp_path("psf.fltimg");
  save_psf(p, path);
  const Psf q = load_psf(path);
  CHECK(q.image() == p.image());
  CHECK(q.normalized());

  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(bytes.rfind("FLTIMG1 32 20\n", 0) == 0);
  CHECK(bytes.size() == 14 + 32 * 20 * 4);

  const auto trunc = temp_path("trunc.fltimg");
  std::ofstream(trunc, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(load_psf(trunc), DataError);

  const auto bad_magic = temp_path("magic.fltimg");
  std::ofstream(bad_magic, std::ios::binary) << "FLTIMG2 1 1\n" << std::string(4, '\0');
  CHECK_THROWS_AS(load_fltimg(bad_magic), DataError);

  const auto negative = temp_path("neg.fltimg");
  save_fltimg(Image(1, 2, {0.5, -0.25}), negative);
  CHECK_NOTHROW(load_fltimg(negative));
  CHECK_THROWS_AS(load_psf(negative), DataError);

  const auto nan_file = temp_path("nan.fltimg");
  save_fltimg(Image(1, 1, {std::nan("")}), nan_file);
  CHECK_THROWS_AS(load_fltimg(nan_file), DataError);
}
