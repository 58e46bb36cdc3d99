// pipeline.hpp - end-to-end denoising: group, sparse-decompose, split off
// the noise atoms, reconstruct, aggregate. Homomorphic wrapper for speckle.
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dsd/grouping.hpp"
#include "dsd/image.hpp"
#include "dsd/noise.hpp"
#include "dsd/patch.hpp"
#include "dsd/sparse.hpp"
#include "dsd/subdict.hpp"

namespace dsd {

enum class NoiseMode { additive, speckle };
enum class DictScope { per_group, global };
enum class WeightRule { sparsity, uniform };

struct DenoiseConfig {
  int patch_edge = 8;
  int stride = 1;           // patch extraction stride
  int dict_atoms = 256;     // K (per-group runs cap it at 2 * group size)
  double epsilon = -1.0;    // per-pixel RMS tolerance; < 0 = derive (speckle)
  GroupingConfig grouping;  // gamma, window, ref_stride; metric set by mode
  NoiseMode mode = NoiseMode::additive;
  DictScope dict_scope = DictScope::global;
  WeightRule weights = WeightRule::sparsity;
  int learn_iters = 12;
  std::optional<int> max_support; // default: half the patch dimension N/2
  int looks = 1;                  // speckle only
  bool bias_correction = true;    // speckle log-domain mean debias
  std::uint64_t seed = 0;
};

struct GroupRecord {
  int reference = 0;  // column index of the reference patch
  int members = 0;
  int atoms = 0;      // dictionary size the split saw (unused atoms pruned)
  int cut = 0;        // P; 0 when every code in the group was empty
  double rep_rmse = 0.0; // per-pixel RMS of z - D*A over the group
};

struct DenoiseReport {
  NoiseMode mode = NoiseMode::additive;
  DictScope scope = DictScope::per_group;
  bool split_applied = true;
  bool bias_correction_applied = false;
  double epsilon = 0.0;
  int total_groups = 0;
  int principal_majority_warnings = 0; // splits with P > K/2
  int under_determined_groups = 0;     // learned with K > M
  std::vector<GroupRecord> groups;
  double ms_extract = 0, ms_group = 0, ms_learn = 0, ms_encode = 0,
         ms_split = 0, ms_aggregate = 0, ms_total = 0;

  void write(std::ostream& os) const {
    os << "mode=" << (mode == NoiseMode::additive ? "additive" : "speckle")
       << "\nscope=" << (scope == DictScope::per_group ? "per_group" : "global")
       << "\nsplit=" << (split_applied ? 1 : 0)
       << "\nbias_correction=" << (bias_correction_applied ? 1 : 0)
       << "\nepsilon=" << epsilon << "\ntotal_groups=" << total_groups
       << "\np_warn_count=" << principal_majority_warnings
       << "\nunder_determined_groups=" << under_determined_groups
       << "\nms_extract=" << ms_extract << "\nms_group=" << ms_group
       << "\nms_learn=" << ms_learn << "\nms_encode=" << ms_encode
       << "\nms_split=" << ms_split << "\nms_aggregate=" << ms_aggregate
       << "\nms_total=" << ms_total << "\n";
    os << "group\tref\tmembers\tatoms\tcut\trep_rmse\n";
    for (size_t i = 0; i < groups.size(); ++i) {
      const auto& g = groups[i];
      os << i << '\t' << g.reference << '\t' << g.members << '\t' << g.atoms
         << '\t' << g.cut << '\t' << g.rep_rmse << '\n';
    }
  }
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

// Drop atoms no code uses so the histogram mode is taken over the atoms
// that actually participate; unused atoms belong to the noise part either
// way, only the modal-frequency estimate changes.
inline Subdictionary prune_unused(const Dictionary& dict,
                                  const SparseCodes& codes,
                                  const Eigen::VectorXi& freq) {
  std::vector<int> used;
  for (int k = 0; k < int(freq.size()); ++k)
    if (freq[k] > 0) used.push_back(k);
  return take_atoms(dict, codes, used, 0, used.size());
}

// Reference columns: every ref_stride-th grid position plus the clamped
// last row/column, so reference patches alone already cover the canvas.
inline std::vector<int> reference_columns(const PatchMatrix& patches,
                                          int ref_stride) {
  std::vector<int> rows, cols;
  rows.reserve(patches.origins.size());
  cols.reserve(patches.origins.size());
  for (const auto& [r, c] : patches.origins) {
    rows.push_back(r);
    cols.push_back(c);
  }
  auto uniq = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(rows);
  uniq(cols);

  auto pick = [&](const std::vector<int>& v) {
    std::vector<int> out;
    for (size_t i = 0; i < v.size(); i += size_t(ref_stride)) out.push_back(v[i]);
    if (out.back() != v.back()) out.push_back(v.back());
    return out;
  };
  const auto ref_rows = pick(rows);
  const auto ref_cols = pick(cols);

  std::map<std::pair<int, int>, int> origin_to_col;
  for (Eigen::Index m = 0; m < patches.count(); ++m)
    origin_to_col[patches.origins[size_t(m)]] = int(m);

  std::vector<int> refs;
  refs.reserve(ref_rows.size() * ref_cols.size());
  for (int r : ref_rows)
    for (int c : ref_cols) refs.push_back(origin_to_col.at({r, c}));
  return refs;
}

struct GroupEstimate {
  GroupRecord record;
  bool under_determined = false;
  std::vector<int> members;
  Eigen::MatrixXd estimate;     // N x members
  std::vector<double> weights;  // per member
};

inline double column_weight(WeightRule rule, int support) {
  return rule == WeightRule::uniform ? 1.0 : 1.0 / (1.0 + double(support));
}

// Support caps may not exceed the atom count of the dictionary in use.
inline SparseConfig with_support_cap(SparseConfig cfg, int atom_count) {
  if (cfg.max_support)
    cfg.max_support = std::min(*cfg.max_support, atom_count);
  return cfg;
}

} // namespace detail

/// Shared driver behind denoise / denoise_single / despeckle. `use_split`
/// selects the principal-subspace reconstruction; without it the full
/// dictionary product is used (the single-decomposition baseline).
inline Image run_denoise_pipeline(const Image& input, DenoiseConfig cfg,
                                  bool use_split, DenoiseReport* report_out) {
  const auto t_total = std::chrono::steady_clock::now();
  require_valid(input);

  if (cfg.epsilon < 0.0) {
    if (cfg.mode == NoiseMode::speckle)
      cfg.epsilon = log_speckle_sigma(cfg.looks);
    else
      throw std::invalid_argument("denoise: epsilon not set");
  }
  cfg.grouping.metric = cfg.mode == NoiseMode::speckle
                            ? SimilarityMetric::ppb
                            : SimilarityMetric::euclidean;
  cfg.grouping.looks = double(cfg.looks);
  cfg.grouping.validate(cfg.patch_edge);
  if (cfg.stride < 1 || cfg.patch_edge < 1 || cfg.dict_atoms < 1 ||
      cfg.learn_iters < 0)
    throw std::invalid_argument("denoise: invalid configuration");
  if (cfg.grouping.ref_stride * cfg.stride > cfg.patch_edge)
    throw std::invalid_argument(
        "denoise: ref_stride * stride exceeds the patch edge, reference "
        "patches would leave pixels uncovered");

  const int n_dim = cfg.patch_edge * cfg.patch_edge;
  SparseConfig scfg;
  scfg.epsilon = cfg.epsilon;
  scfg.max_support = cfg.max_support ? *cfg.max_support
                                     : std::max(1, n_dim / 2);
  scfg.learn_iters = cfg.learn_iters;
  scfg.seed = cfg.seed;

  Image work = input;
  if (cfg.mode == NoiseMode::speckle) {
    if ((input.pixels.array() <= 0.0).any())
      throw std::invalid_argument(
          "despeckle: intensities must be strictly positive");
    work.pixels = input.pixels.array().log();
  }

  DenoiseReport report;
  report.mode = cfg.mode;
  report.scope = cfg.dict_scope;
  report.split_applied = use_split;
  report.epsilon = cfg.epsilon;

  auto t0 = std::chrono::steady_clock::now();
  const PatchMatrix patches =
      extract_patches(work, cfg.patch_edge, cfg.stride);
  report.ms_extract = detail::ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  const std::vector<int> refs =
      detail::reference_columns(patches, cfg.grouping.ref_stride);
  std::vector<Group> groups(refs.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8)
#endif
  for (size_t i = 0; i < refs.size(); ++i)
    groups[i] = form_group(patches, refs[i], cfg.grouping);
  report.ms_group = detail::ms_since(t0);
  report.total_groups = int(groups.size());

  // Global scope: one dictionary from every patch, one split from its
  // codes; groups then only steer which estimates are averaged where.
  Eigen::MatrixXd global_estimates;
  std::vector<double> global_weights;
  GroupRecord global_record;
  bool global_under_determined = false;
  if (cfg.dict_scope == DictScope::global) {
    t0 = std::chrono::steady_clock::now();
    LearnStats lstats;
    auto [global_dict, global_codes] = ksvd_learn(
        patches.data, cfg.dict_atoms,
        detail::with_support_cap(scfg, cfg.dict_atoms), &lstats);
    global_under_determined = lstats.under_determined;
    report.ms_learn = detail::ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    const Eigen::VectorXi freq = atom_frequencies(global_codes);
    global_record.members = int(patches.count());
    global_record.rep_rmse = std::sqrt(
        (patches.data - reconstruct(global_dict, global_codes)).squaredNorm() /
        double(patches.data.size()));
    global_weights.resize(size_t(patches.count()));
    if (use_split && freq.maxCoeff() > 0) {
      const Subdictionary used =
          detail::prune_unused(global_dict, global_codes, freq);
      const SubdictSplit split = analyze_codes(used.codes);
      const Subdictionary principal =
          split_dictionary(used.dict, used.codes, split).first;
      global_estimates = principal_reconstruct(principal);
      for (Eigen::Index m = 0; m < patches.count(); ++m)
        global_weights[size_t(m)] = detail::column_weight(
            cfg.weights, principal.codes.support_size(m));
      global_record.atoms = int(used.dict.atom_count());
      global_record.cut = split.cut;
      if (split.cut > int(used.dict.atom_count()) / 2)
        report.principal_majority_warnings = 1;
    } else {
      global_estimates = reconstruct(global_dict, global_codes);
      for (Eigen::Index m = 0; m < patches.count(); ++m)
        global_weights[size_t(m)] = detail::column_weight(
            cfg.weights, global_codes.support_size(m));
      global_record.atoms = int(global_dict.atom_count());
      global_record.cut = use_split ? 0 : global_record.atoms;
    }
    report.ms_split = detail::ms_since(t0);
  }

  // Per-group work units are independent; results are stored by slot and
  // aggregated in group order so the output is bit-stable for any thread
  // count.
  std::vector<detail::GroupEstimate> results(groups.size());
  std::string failure;
  bool failed = false;

  t0 = std::chrono::steady_clock::now();
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    if (failed) continue;
    try {
      const Group& group = groups[gi];
      detail::GroupEstimate res;
      res.members = group.member_indices;
      res.record.reference = group.reference_index;
      res.record.members = int(group.member_indices.size());

      if (cfg.dict_scope == DictScope::global) {
        res.estimate.resize(n_dim, Eigen::Index(res.members.size()));
        res.weights.resize(res.members.size());
        for (size_t j = 0; j < res.members.size(); ++j) {
          res.estimate.col(Eigen::Index(j)) =
              global_estimates.col(res.members[j]);
          res.weights[j] = global_weights[size_t(res.members[j])];
        }
        res.record.atoms = global_record.atoms;
        res.record.cut = global_record.cut;
        res.record.rep_rmse = global_record.rep_rmse;
      } else {
        Eigen::MatrixXd z(n_dim, Eigen::Index(res.members.size()));
        for (size_t j = 0; j < res.members.size(); ++j)
          z.col(Eigen::Index(j)) = patches.data.col(res.members[j]);

        const int k_group =
            std::min(cfg.dict_atoms, 2 * int(res.members.size()));
        SparseConfig gcfg = detail::with_support_cap(scfg, k_group);
        gcfg.seed = detail::mix_seed(cfg.seed, gi);
        LearnStats lstats;
        auto [dict, codes] = ksvd_learn(z, k_group, gcfg, &lstats);
        res.under_determined = lstats.under_determined;
        res.record.rep_rmse =
            std::sqrt((z - reconstruct(dict, codes)).squaredNorm() /
                      double(z.size()));

        const Eigen::VectorXi freq = atom_frequencies(codes);
        if (use_split && freq.maxCoeff() > 0) {
          const Subdictionary used = detail::prune_unused(dict, codes, freq);
          const SubdictSplit split = analyze_codes(used.codes);
          const Subdictionary principal =
              split_dictionary(used.dict, used.codes, split).first;
          res.estimate = principal_reconstruct(principal);
          res.weights.resize(res.members.size());
          for (size_t j = 0; j < res.members.size(); ++j)
            res.weights[j] = detail::column_weight(
                cfg.weights, principal.codes.support_size(Eigen::Index(j)));
          res.record.atoms = int(used.dict.atom_count());
          res.record.cut = split.cut;
        } else {
          res.estimate = reconstruct(dict, codes);
          res.weights.resize(res.members.size());
          for (size_t j = 0; j < res.members.size(); ++j)
            res.weights[j] = detail::column_weight(
                cfg.weights, codes.support_size(Eigen::Index(j)));
          res.record.atoms = k_group;
          res.record.cut = use_split ? 0 : k_group;
        }
      }
      results[gi] = std::move(res);
    } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical(dsd_pipeline_failure)
#endif
      {
        if (!failed) {
          failure = "denoise: group " + std::to_string(gi) + ": " + e.what();
          failed = true;
        }
      }
    }
  }
  if (failed) throw std::runtime_error(failure);
  const double ms_groups_work = detail::ms_since(t0);
  if (cfg.dict_scope == DictScope::global)
    report.ms_encode = ms_groups_work;
  else
    report.ms_learn = ms_groups_work;

  t0 = std::chrono::steady_clock::now();
  report.under_determined_groups += global_under_determined ? 1 : 0;
  report.groups.reserve(results.size());
  PixelAccumulator acc(work.height(), work.width());
  for (auto& res : results) {
    for (size_t j = 0; j < res.members.size(); ++j) {
      const auto [r, c] = patches.origins[size_t(res.members[j])];
      acc.add_patch(r, c, cfg.patch_edge, res.estimate.col(Eigen::Index(j)),
                    res.weights[j]);
    }
    if (res.under_determined) ++report.under_determined_groups;
    if (cfg.dict_scope == DictScope::per_group && use_split &&
        res.record.cut > res.record.atoms / 2 && res.record.cut > 0)
      ++report.principal_majority_warnings;
    report.groups.push_back(res.record);
  }
  Image out = acc.finalize(input.dynamic_range);
  report.ms_aggregate = detail::ms_since(t0);

  if (cfg.mode == NoiseMode::speckle) {
    const double bias = cfg.bias_correction ? log_speckle_mean(cfg.looks) : 0.0;
    out.pixels = (out.pixels.array() - bias).exp();
    report.bias_correction_applied = cfg.bias_correction;
  }
  if (!out.finite())
    throw std::runtime_error("denoise: non-finite output");

  report.ms_total = detail::ms_since(t_total);
  if (report_out) *report_out = std::move(report);
  return out;
}

/// Full dual-decomposition denoiser (Gaussian or speckle per cfg.mode).
inline std::pair<Image, DenoiseReport> denoise(const Image& noisy,
                                               const DenoiseConfig& cfg) {
  DenoiseReport report;
  Image out = run_denoise_pipeline(noisy, cfg, /*use_split=*/true, &report);
  return {std::move(out), std::move(report)};
}

/// Single-decomposition baseline: identical pipeline with the subspace
/// split disabled (full-dictionary reconstruction).
inline Image denoise_single(const Image& noisy, DenoiseConfig cfg,
                            double epsilon,
                            DenoiseReport* report_out = nullptr) {
  cfg.epsilon = epsilon;
  return run_denoise_pipeline(noisy, cfg, /*use_split=*/false, report_out);
}

/// Homomorphic despeckling: log-transform, denoise with PPB grouping,
/// exponentiate with the analytic log-speckle mean removed.
inline std::pair<Image, DenoiseReport> despeckle(const Image& noisy_intensity,
                                                 DenoiseConfig cfg) {
  cfg.mode = NoiseMode::speckle;
  DenoiseReport report;
  Image out =
      run_denoise_pipeline(noisy_intensity, cfg, /*use_split=*/true, &report);
  return {std::move(out), std::move(report)};
}

} // namespace dsd
