// image.hpp - 2-D grayscale raster with real-valued pixels.
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace dsd {

/// Grayscale image. Pixels are stored as doubles so intermediate results
/// (noise fields, log-domain data, unclipped estimates) keep full precision;
/// dynamic_range records the nominal intensity maximum of the container the
/// image came from (255 for 8-bit sources).
struct Image {
  Eigen::MatrixXd pixels;        // height x width
  double dynamic_range = 255.0;

  Image() = default;
  Image(Eigen::Index height, Eigen::Index width, double fill = 0.0,
        double range = 255.0)
      : pixels(Eigen::MatrixXd::Constant(height, width, fill)),
        dynamic_range(range) {}
  explicit Image(Eigen::MatrixXd values, double range = 255.0)
      : pixels(std::move(values)), dynamic_range(range) {}

  Eigen::Index height() const { return pixels.rows(); }
  Eigen::Index width() const { return pixels.cols(); }
  Eigen::Index pixel_count() const { return pixels.size(); }

  double& at(Eigen::Index r, Eigen::Index c) { return pixels(r, c); }
  double at(Eigen::Index r, Eigen::Index c) const { return pixels(r, c); }

  bool finite() const { return pixels.allFinite(); }
};

inline void require_valid(const Image& img, const char* what = "image") {
  if (img.height() < 1 || img.width() < 1)
    throw std::invalid_argument(std::string(what) + ": empty raster");
  if (!img.finite())
    throw std::invalid_argument(std::string(what) +
                                ": non-finite pixel values");
}

inline void require_same_shape(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw std::invalid_argument("image dimensions differ");
}

} // namespace dsd
