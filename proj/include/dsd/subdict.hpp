// subdict.hpp - split a dictionary into principal and noise parts by how
// often each atom occurs in the sparse codes.
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dsd/sparse.hpp"

namespace dsd {

/// Result of the frequency analysis: per-atom occurrence counts, the
/// permutation sorting them descending, and the cut index separating the
/// principal subspace (first `cut` sorted atoms) from the noise subspace.
struct SubdictSplit {
  Eigen::VectorXi frequencies; // length K, f_k = occurrences of atom k
  std::vector<int> order;      // permutation of [0..K), descending f
  int cut = 0;                 // P in [1, K]
  int modal_frequency = 0;     // histogram-mode frequency value f*
};

/// f_k = number of observations whose stored code uses atom k with a
/// nonzero coefficient.
inline Eigen::VectorXi atom_frequencies(const SparseCodes& codes) {
  Eigen::VectorXi freq = Eigen::VectorXi::Zero(codes.rows);
  for (const auto& column : codes.columns)
    for (const auto& e : column)
      if (e.value != 0.0) ++freq[e.atom];
  return freq;
}

/// Stable descending sort permutation; equal frequencies keep ascending
/// original atom order.
inline std::vector<int> sort_by_frequency(const Eigen::VectorXi& freq) {
  std::vector<int> order(size_t(freq.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return freq[a] > freq[b]; });
  return order;
}

/// Histogram-mode cut on a descending frequency vector. The mode f* is the
/// smallest frequency value attaining the maximum bin count (bin width 1);
/// the principal part holds the atoms strictly above f*. When no atom
/// exceeds f* the split degenerates to keeping everything (P = K).
inline std::pair<int, int> histogram_cut(const std::vector<int>& freq_sorted) {
  if (freq_sorted.empty())
    throw std::invalid_argument("histogram_cut: empty frequency vector");
  for (size_t i = 1; i < freq_sorted.size(); ++i)
    if (freq_sorted[i] > freq_sorted[i - 1])
      throw std::invalid_argument("histogram_cut: input not sorted descending");

  std::map<int, int> hist;
  for (int f : freq_sorted) ++hist[f];

  int modal = freq_sorted.front();
  int best_count = 0;
  for (const auto& [value, count] : hist) // ascending values: smallest tie wins
    if (count > best_count) {
      best_count = count;
      modal = value;
    }

  const int k_total = int(freq_sorted.size());
  int above = 0;
  while (above < k_total && freq_sorted[size_t(above)] > modal) ++above;
  const int cut = above == 0 ? k_total : std::min(above, k_total);
  return {cut, modal};
}

inline SubdictSplit analyze_codes(const SparseCodes& codes) {
  SubdictSplit s;
  s.frequencies = atom_frequencies(codes);
  s.order = sort_by_frequency(s.frequencies);
  std::vector<int> sorted(size_t(codes.rows));
  for (size_t i = 0; i < sorted.size(); ++i)
    sorted[i] = s.frequencies[s.order[i]];
  std::tie(s.cut, s.modal_frequency) = histogram_cut(sorted);
  return s;
}

/// A sub-dictionary together with the matching coefficient rows. Row p of
/// `codes` corresponds to atom p of `dict` (i.e. original atom
/// `atom_indices[p]`).
struct Subdictionary {
  Dictionary dict;
  SparseCodes codes;
  std::vector<int> atom_indices; // original indices, sorted-order slice
};

namespace detail {

inline Subdictionary take_atoms(const Dictionary& dict,
                                const SparseCodes& codes,
                                const std::vector<int>& order, size_t begin,
                                size_t end) {
  Subdictionary part;
  part.atom_indices.assign(order.begin() + long(begin), order.begin() + long(end));
  part.dict.atoms.resize(dict.atom_len(), Eigen::Index(end - begin));
  std::vector<int> remap(size_t(dict.atom_count()), -1);
  for (size_t i = begin; i < end; ++i) {
    part.dict.atoms.col(Eigen::Index(i - begin)) = dict.atoms.col(order[i]);
    remap[size_t(order[i])] = int(i - begin);
  }
  part.codes.rows = int(end - begin);
  part.codes.columns.resize(codes.columns.size());
  for (size_t m = 0; m < codes.columns.size(); ++m)
    for (const auto& e : codes.columns[m])
      if (remap[size_t(e.atom)] >= 0)
        part.codes.columns[m].push_back({remap[size_t(e.atom)], e.value});
  return part;
}

} // namespace detail

/// Partition dictionary and codes at the split's cut. The two parts cover
/// every original atom exactly once, so their reconstructions sum to D * A.
inline std::pair<Subdictionary, Subdictionary> split_dictionary(
    const Dictionary& dict, const SparseCodes& codes, const SubdictSplit& s) {
  const int k_total = int(dict.atom_count());
  if (codes.rows != k_total || int(s.order.size()) != k_total ||
      s.frequencies.size() != k_total)
    throw std::invalid_argument("split_dictionary: inconsistent shapes");
  if (s.cut < 1 || s.cut > k_total)
    throw std::invalid_argument("split_dictionary: cut out of [1, K]");

  Subdictionary principal =
      detail::take_atoms(dict, codes, s.order, 0, size_t(s.cut));
  Subdictionary noise =
      detail::take_atoms(dict, codes, s.order, size_t(s.cut), size_t(k_total));
  return {std::move(principal), std::move(noise)};
}

/// Signal estimate from the principal part alone.
inline Eigen::MatrixXd principal_reconstruct(const Subdictionary& part) {
  return reconstruct(part.dict, part.codes);
}

} // namespace dsd
