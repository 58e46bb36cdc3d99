// grouping.hpp - nonlocal self-similarity: gather the most similar patches
// around a reference patch under a Gaussian- or speckle-suited metric.
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "dsd/patch.hpp"

namespace dsd {

enum class SimilarityMetric { euclidean, ppb };

struct GroupingConfig {
  int gamma = 90;       // group size
  int window = 39;      // search-window edge, centered on the reference
  SimilarityMetric metric = SimilarityMetric::euclidean;
  double looks = 1.0;   // equivalent number of looks (ppb only)
  int ref_stride = 4;   // stride between reference patches

  void validate(int patch_edge) const {
    if (gamma < 1) throw std::invalid_argument("grouping: gamma must be >= 1");
    if (window < patch_edge)
      throw std::invalid_argument("grouping: window smaller than patch");
    if (looks < 1.0) throw std::invalid_argument("grouping: looks must be >= 1");
    if (ref_stride < 1)
      throw std::invalid_argument("grouping: ref_stride must be >= 1");
  }
};

/// Squared Euclidean distance; smaller means more similar.
inline double euclidean_similarity(const Eigen::Ref<const Eigen::VectorXd>& a,
                                   const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("euclidean_similarity: length mismatch");
  return (a - b).squaredNorm();
}

/// Patch similarity for multiplicative speckle, evaluated on log-domain
/// patches: (2L-1) * sum_k log(sqrt(y_i/y_j) + sqrt(y_j/y_i)) with
/// y = exp(x). Each term reduces to |d|/2 + log(1 + exp(-|d|)) for
/// d = x_i(k) - x_j(k), which stays finite for any intensity gap.
/// Minimum value is N*log(2)*(2L-1), attained at identical patches.
inline double ppb_similarity(const Eigen::Ref<const Eigen::VectorXd>& a,
                             const Eigen::Ref<const Eigen::VectorXd>& b,
                             double looks) {
  if (a.size() != b.size())
    throw std::invalid_argument("ppb_similarity: length mismatch");
  if (looks < 1.0)
    throw std::invalid_argument("ppb_similarity: looks must be >= 1");
  if (!a.allFinite() || !b.allFinite())
    throw std::invalid_argument("ppb_similarity: non-finite input");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double d = std::abs(a[k] - b[k]);
    sum += 0.5 * d + std::log1p(std::exp(-d));
  }
  return (2.0 * looks - 1.0) * sum;
}

/// A reference patch with its most similar companions. Members are column
/// indices into the source PatchMatrix; the reference is always member 0.
/// `shortfall` counts how many members the window could not provide.
struct Group {
  int reference_index = 0;
  std::vector<int> member_indices;
  std::vector<double> similarities; // ascending, most similar first
  int shortfall = 0;
};

/// Candidates are the patches whose origin falls inside the search window
/// centered on the reference origin; the gamma most similar are kept, ties
/// broken by ascending column index. The reference itself is pinned first
/// at the metric's minimum.
inline Group form_group(const PatchMatrix& patches, int reference,
                        const GroupingConfig& cfg) {
  cfg.validate(patches.patch_edge);
  if (reference < 0 || reference >= patches.count())
    throw std::invalid_argument("form_group: reference index out of range");

  const auto [ref_row, ref_col] = patches.origins[size_t(reference)];
  const int half = cfg.window / 2;
  const auto ref_patch = patches.data.col(reference);

  auto score = [&](int m) {
    return cfg.metric == SimilarityMetric::euclidean
               ? euclidean_similarity(ref_patch, patches.data.col(m))
               : ppb_similarity(ref_patch, patches.data.col(m), cfg.looks);
  };

  std::vector<std::pair<double, int>> scored;
  for (Eigen::Index m = 0; m < patches.count(); ++m) {
    if (int(m) == reference) continue;
    const auto [r, c] = patches.origins[size_t(m)];
    if (std::abs(r - ref_row) > half || std::abs(c - ref_col) > half) continue;
    scored.emplace_back(score(int(m)), int(m));
  }

  const size_t wanted = size_t(cfg.gamma) - 1;
  if (scored.size() > wanted) {
    std::partial_sort(scored.begin(), scored.begin() + long(wanted),
                      scored.end());
    scored.resize(wanted);
  } else {
    std::sort(scored.begin(), scored.end());
  }

  Group group;
  group.reference_index = reference;
  group.member_indices.push_back(reference);
  group.similarities.push_back(score(reference));
  for (const auto& [s, m] : scored) {
    group.member_indices.push_back(m);
    group.similarities.push_back(s);
  }
  group.shortfall = cfg.gamma - int(group.member_indices.size());
  return group;
}

} // namespace dsd
