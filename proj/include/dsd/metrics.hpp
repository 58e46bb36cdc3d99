// metrics.hpp - PSNR and SSIM quality measures.
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dsd/image.hpp"

namespace dsd {

struct MetricConfig {
  double c1 = 0.0;
  double c2 = 0.0;
  double dynamic_range = 255.0;

  static MetricConfig for_range(double range) {
    MetricConfig cfg;
    cfg.dynamic_range = range;
    cfg.c1 = (0.01 * range) * (0.01 * range);
    cfg.c2 = (0.03 * range) * (0.03 * range);
    return cfg;
  }

  void validate() const {
    if (!(c1 > 0.0) || !(c2 > 0.0))
      throw std::invalid_argument("metric config: c1 and c2 must be > 0");
  }
};

/// PSNR in dB with the peak taken from the reference image:
/// 20*log10(max reference) - 10*log10(MSE). Identical images return the
/// +infinity sentinel. `peak_override` substitutes a fixed peak (say 255)
/// for cross-tool comparisons.
inline double psnr(const Image& reference, const Image& test,
                   double peak_override = 0.0) {
  require_same_shape(reference, test);
  require_valid(reference, "psnr reference");
  require_valid(test, "psnr test");

  const double mse =
      (reference.pixels - test.pixels).squaredNorm() / double(reference.pixel_count());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  const double peak =
      peak_override > 0.0 ? peak_override : reference.pixels.maxCoeff();
  return 20.0 * std::log10(peak) - 10.0 * std::log10(mse);
}

namespace detail {

// Population covariance; cov(a, a) doubles as the variance so identical
// inputs hit the SSIM numerator and denominator with identical arithmetic.
inline double covariance(const Eigen::MatrixXd& a, double mean_a,
                         const Eigen::MatrixXd& b, double mean_b) {
  return ((a.array() - mean_a) * (b.array() - mean_b)).sum() / double(a.size());
}

} // namespace detail

/// Global-statistics SSIM: one window spanning the whole image.
inline double ssim(const Image& reference, const Image& test,
                   const MetricConfig& cfg) {
  cfg.validate();
  require_same_shape(reference, test);
  require_valid(reference, "ssim reference");
  require_valid(test, "ssim test");

  const double mu_r = reference.pixels.mean();
  const double mu_t = test.pixels.mean();
  const double var_r = detail::covariance(reference.pixels, mu_r, reference.pixels, mu_r);
  const double var_t = detail::covariance(test.pixels, mu_t, test.pixels, mu_t);
  const double cov = detail::covariance(reference.pixels, mu_r, test.pixels, mu_t);

  return ((2.0 * mu_r * mu_t + cfg.c1) * (2.0 * cov + cfg.c2)) /
         ((mu_r * mu_r + mu_t * mu_t + cfg.c1) * (var_r + var_t + cfg.c2));
}

inline double ssim(const Image& reference, const Image& test) {
  return ssim(reference, test, MetricConfig::for_range(reference.dynamic_range));
}

/// Mean SSIM over sliding 11x11 Gaussian windows (sigma 1.5), the
/// conventional local variant; offered for comparability with other tools.
inline double ssim_windowed(const Image& reference, const Image& test,
                            const MetricConfig& cfg, int window = 11,
                            double sigma = 1.5) {
  cfg.validate();
  require_same_shape(reference, test);
  if (reference.height() < window || reference.width() < window)
    throw std::invalid_argument("ssim_windowed: image smaller than window");

  Eigen::MatrixXd w(window, window);
  const double center = (window - 1) / 2.0;
  for (int i = 0; i < window; ++i)
    for (int j = 0; j < window; ++j)
      w(i, j) = std::exp(-((i - center) * (i - center) +
                           (j - center) * (j - center)) /
                         (2.0 * sigma * sigma));
  w /= w.sum();

  double total = 0.0;
  long positions = 0;
  for (Eigen::Index r = 0; r + window <= reference.height(); ++r)
    for (Eigen::Index c = 0; c + window <= reference.width(); ++c) {
      const auto br = reference.pixels.block(r, c, window, window).array();
      const auto bt = test.pixels.block(r, c, window, window).array();
      const double mu_r = (w.array() * br).sum();
      const double mu_t = (w.array() * bt).sum();
      const double var_r = (w.array() * (br - mu_r).square()).sum();
      const double var_t = (w.array() * (bt - mu_t).square()).sum();
      const double cov = (w.array() * (br - mu_r) * (bt - mu_t)).sum();
      total += ((2.0 * mu_r * mu_t + cfg.c1) * (2.0 * cov + cfg.c2)) /
               ((mu_r * mu_r + mu_t * mu_t + cfg.c1) * (var_r + var_t + cfg.c2));
      ++positions;
    }
  return total / double(positions);
}

} // namespace dsd
