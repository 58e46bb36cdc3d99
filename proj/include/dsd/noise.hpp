// noise.hpp - reproducible AWGN and multiplicative speckle simulators.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>

#include "dsd/image.hpp"

namespace dsd {

namespace detail {

// Uniform in (0, 1]; never returns 0 so logs stay finite.
inline double uniform_open(std::mt19937_64& rng) {
  return (double(rng() >> 11) + 1.0) * 0x1p-53;
}

// Box-Muller; hand rolled because std::normal_distribution is
// implementation-defined and the simulators promise seed-reproducibility.
inline double standard_normal(std::mt19937_64& rng) {
  const double u1 = uniform_open(rng);
  const double u2 = uniform_open(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

// Unit-mean Gamma(L, 1/L) multiplier: mean of L unit exponentials.
inline double speckle_multiplier(std::mt19937_64& rng, int looks) {
  double sum = 0.0;
  for (int i = 0; i < looks; ++i) sum += -std::log(uniform_open(rng));
  return sum / double(looks);
}

} // namespace detail

/// Add zero-mean Gaussian noise of standard deviation sigma, pixel by pixel
/// in row-major order. Values are left unclipped; clipping happens only at
/// image export.
inline Image add_awgn(const Image& img, double sigma, std::uint64_t seed) {
  require_valid(img);
  if (sigma < 0.0) throw std::invalid_argument("add_awgn: sigma must be >= 0");
  Image out = img;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  for (Eigen::Index r = 0; r < img.height(); ++r)
    for (Eigen::Index c = 0; c < img.width(); ++c)
      out.at(r, c) += sigma * detail::standard_normal(rng);
  return out;
}

/// Multiply every pixel by an independent unit-mean Gamma(L, 1/L) variate
/// (L = 1 gives the one-look exponential case). Input must be strictly
/// positive.
inline Image add_speckle(const Image& img, int looks, std::uint64_t seed) {
  require_valid(img);
  if (looks < 1) throw std::invalid_argument("add_speckle: looks must be >= 1");
  if ((img.pixels.array() <= 0.0).any())
    throw std::invalid_argument("add_speckle: image must be strictly positive");
  Image out = img;
  std::mt19937_64 rng(seed);
  for (Eigen::Index r = 0; r < img.height(); ++r)
    for (Eigen::Index c = 0; c < img.width(); ++c)
      out.at(r, c) *= detail::speckle_multiplier(rng, looks);
  return out;
}

enum class NoiseKind { awgn, speckle };

/// Reproducible noise simulator configuration.
struct NoiseModel {
  NoiseKind kind = NoiseKind::awgn;
  double sigma = 0.0; // AWGN standard deviation
  int looks = 1;      // speckle looks
  std::uint64_t seed = 0;

  Image apply(const Image& img) const {
    return kind == NoiseKind::awgn ? add_awgn(img, sigma, seed)
                                   : add_speckle(img, looks, seed);
  }
};

/// Mean of log-speckle for integer L: psi(L) - log(L); for L = 1 this is
/// minus the Euler-Mascheroni constant.
inline double log_speckle_mean(int looks) {
  if (looks < 1)
    throw std::invalid_argument("log_speckle_mean: looks must be >= 1");
  double harmonic = 0.0;
  for (int j = 1; j < looks; ++j) harmonic += 1.0 / double(j);
  return -std::numbers::egamma + harmonic - std::log(double(looks));
}

/// Standard deviation of log-speckle for integer L: sqrt(trigamma(L)).
inline double log_speckle_sigma(int looks) {
  if (looks < 1)
    throw std::invalid_argument("log_speckle_sigma: looks must be >= 1");
  double trigamma = std::numbers::pi * std::numbers::pi / 6.0;
  for (int j = 1; j < looks; ++j) trigamma -= 1.0 / (double(j) * double(j));
  return std::sqrt(trigamma);
}

} // namespace dsd
