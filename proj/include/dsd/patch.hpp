// patch.hpp - image <-> patch-matrix conversion and overlap aggregation.
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dsd/image.hpp"

namespace dsd {

/// Matrix whose columns are vectorized square patches of a source image.
/// Column m holds the patch whose top-left corner sits at origins[m];
/// vectorization is row-major within the patch, so entry (i*edge + j, m)
/// is source pixel (origins[m].first + i, origins[m].second + j).
struct PatchMatrix {
  int patch_edge = 0;
  Eigen::MatrixXd data;                        // N x M, N = patch_edge^2
  std::vector<std::pair<int, int>> origins;    // M top-left (row, col)

  Eigen::Index dim() const { return data.rows(); }
  Eigen::Index count() const { return data.cols(); }
};

inline Eigen::VectorXd vectorize_patch(const Eigen::MatrixXd& patch) {
  Eigen::VectorXd v(patch.size());
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < patch.rows(); ++i)
    for (Eigen::Index j = 0; j < patch.cols(); ++j) v[n++] = patch(i, j);
  return v;
}

inline Eigen::MatrixXd devectorize_patch(const Eigen::VectorXd& v, int edge) {
  if (v.size() != Eigen::Index(edge) * edge)
    throw std::invalid_argument("devectorize_patch: length mismatch");
  Eigen::MatrixXd patch(edge, edge);
  Eigen::Index n = 0;
  for (int i = 0; i < edge; ++i)
    for (int j = 0; j < edge; ++j) patch(i, j) = v[n++];
  return patch;
}

namespace detail {

// Positions 0, stride, 2*stride, ... plus the clamped last position so the
// far border is always covered. When the stride exceeds the patch edge the
// plain grid would leave gaps between patches; fill positions are inserted
// so that every pixel stays covered.
inline std::vector<int> grid_positions(int extent, int edge, int stride) {
  std::vector<int> pos;
  const int last = extent - edge;
  for (int p = 0; p <= last; p += stride) pos.push_back(p);
  if (pos.back() != last) pos.push_back(last);
  if (stride > edge) {
    const std::vector<int> grid = pos;
    for (size_t i = 0; i + 1 < grid.size(); ++i)
      for (int p = grid[i] + edge; p < grid[i + 1]; p += edge)
        pos.push_back(p);
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
  }
  return pos;
}

} // namespace detail

inline PatchMatrix extract_patches(const Image& img, int patch_edge,
                                   int stride) {
  require_valid(img);
  if (patch_edge < 1 || stride < 1)
    throw std::invalid_argument("extract_patches: patch_edge and stride must be >= 1");
  if (patch_edge > img.height() || patch_edge > img.width())
    throw std::invalid_argument("extract_patches: patch larger than image");

  const auto rows = detail::grid_positions(int(img.height()), patch_edge, stride);
  const auto cols = detail::grid_positions(int(img.width()), patch_edge, stride);

  PatchMatrix pm;
  pm.patch_edge = patch_edge;
  pm.data.resize(Eigen::Index(patch_edge) * patch_edge,
                 Eigen::Index(rows.size()) * Eigen::Index(cols.size()));
  pm.origins.reserve(rows.size() * cols.size());

  Eigen::Index m = 0;
  for (int r : rows) {
    for (int c : cols) {
      Eigen::Index n = 0;
      for (int i = 0; i < patch_edge; ++i)
        for (int j = 0; j < patch_edge; ++j)
          pm.data(n++, m) = img.at(r + i, c + j);
      pm.origins.emplace_back(r, c);
      ++m;
    }
  }
  return pm;
}

/// Per-pixel weighted accumulation buffer used when folding overlapping
/// patch estimates back into an image. Pixels never touched by any patch
/// keep weight 0 and are flagged uncovered on finalize.
struct PixelAccumulator {
  Eigen::MatrixXd sum;
  Eigen::MatrixXd weight;

  PixelAccumulator(Eigen::Index height, Eigen::Index width)
      : sum(Eigen::MatrixXd::Zero(height, width)),
        weight(Eigen::MatrixXd::Zero(height, width)) {}

  void add_patch(int row, int col, int edge,
                 const Eigen::Ref<const Eigen::VectorXd>& values, double w) {
    if (w <= 0.0 || !std::isfinite(w))
      throw std::invalid_argument("PixelAccumulator: weight must be positive");
    if (row < 0 || col < 0 || row + edge > sum.rows() || col + edge > sum.cols())
      throw std::invalid_argument("PixelAccumulator: patch outside canvas");
    Eigen::Index n = 0;
    for (int i = 0; i < edge; ++i)
      for (int j = 0; j < edge; ++j) {
        sum(row + i, col + j) += w * values[n++];
        weight(row + i, col + j) += w;
      }
  }

  Image finalize(double dynamic_range = 255.0) const {
    Image out(sum.rows(), sum.cols(), 0.0, dynamic_range);
    for (Eigen::Index r = 0; r < sum.rows(); ++r)
      for (Eigen::Index c = 0; c < sum.cols(); ++c) {
        if (weight(r, c) <= 0.0)
          throw std::runtime_error("aggregate: uncovered pixel at (" +
                                   std::to_string(r) + "," + std::to_string(c) +
                                   ")");
        out.at(r, c) = sum(r, c) / weight(r, c);
      }
    return out;
  }
};

/// Weight-average overlapping per-patch estimates into an image.
/// `estimates` must have the shape of `patches.data`; `weights` holds one
/// positive weight per column.
inline Image aggregate(const PatchMatrix& patches,
                       const Eigen::MatrixXd& estimates,
                       const std::vector<double>& weights,
                       Eigen::Index canvas_height, Eigen::Index canvas_width,
                       double dynamic_range = 255.0) {
  if (estimates.rows() != patches.dim() || estimates.cols() != patches.count())
    throw std::invalid_argument("aggregate: estimate shape mismatch");
  if (Eigen::Index(weights.size()) != patches.count())
    throw std::invalid_argument("aggregate: one weight per column required");

  PixelAccumulator acc(canvas_height, canvas_width);
  for (Eigen::Index m = 0; m < patches.count(); ++m)
    acc.add_patch(patches.origins[m].first, patches.origins[m].second,
                  patches.patch_edge, estimates.col(m), weights[m]);
  return acc.finalize(dynamic_range);
}

inline Image aggregate(const PatchMatrix& patches,
                       const Eigen::MatrixXd& estimates,
                       Eigen::Index canvas_height, Eigen::Index canvas_width,
                       double dynamic_range = 255.0) {
  return aggregate(patches, estimates,
                   std::vector<double>(size_t(patches.count()), 1.0),
                   canvas_height, canvas_width, dynamic_range);
}

} // namespace dsd
