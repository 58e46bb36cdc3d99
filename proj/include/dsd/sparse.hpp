// sparse.hpp - greedy sparse coding under an error tolerance and
// dictionary learning with per-atom rank-1 updates.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsd {

// ----------------------------------------------------------------------
// Types
// ----------------------------------------------------------------------

/// Over-complete dictionary: columns are unit-norm atoms.
struct Dictionary {
  Eigen::MatrixXd atoms; // N x K

  Eigen::Index atom_len() const { return atoms.rows(); }
  Eigen::Index atom_count() const { return atoms.cols(); }

  bool unit_normalized(double tol = 1e-9) const {
    for (Eigen::Index k = 0; k < atoms.cols(); ++k)
      if (std::abs(atoms.col(k).norm() - 1.0) > tol) return false;
    return true;
  }
};

inline void require_unit_norm(const Dictionary& dict) {
  if (dict.atom_count() < 1)
    throw std::invalid_argument("dictionary: no atoms");
  if (!dict.unit_normalized())
    throw std::invalid_argument("dictionary: atoms must have unit l2 norm");
}

struct SparseEntry {
  int atom = 0;
  double value = 0.0;
};

using SparseColumn = std::vector<SparseEntry>;

/// Column-sparse K x M coefficient matrix. Exact zeros are never stored,
/// so the entry count of column m is its l0 norm.
struct SparseCodes {
  int rows = 0;                      // K
  std::vector<SparseColumn> columns; // M columns

  Eigen::Index count() const { return Eigen::Index(columns.size()); }
  int support_size(Eigen::Index m) const { return int(columns[size_t(m)].size()); }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, count());
    for (Eigen::Index m = 0; m < count(); ++m)
      for (const auto& e : columns[size_t(m)]) a(e.atom, m) = e.value;
    return a;
  }

  /// Row vector of coefficient row k (one entry per observation).
  Eigen::RowVectorXd row(int k) const {
    Eigen::RowVectorXd beta = Eigen::RowVectorXd::Zero(count());
    for (Eigen::Index m = 0; m < count(); ++m)
      for (const auto& e : columns[size_t(m)])
        if (e.atom == k) beta[m] = e.value;
    return beta;
  }
};

struct SparseConfig {
  double epsilon = 0.0;                // per-pixel RMS error tolerance
  std::optional<int> max_support;      // cap on per-column support size
  int learn_iters = 12;                // dictionary-learning sweeps
  std::uint64_t seed = 0;

  void validate(int atom_count) const {
    if (!(epsilon >= 0.0))
      throw std::invalid_argument("sparse config: epsilon must be >= 0");
    if (max_support && (*max_support < 1 || *max_support > atom_count))
      throw std::invalid_argument("sparse config: max_support out of [1, K]");
    if (learn_iters < 0)
      throw std::invalid_argument("sparse config: learn_iters must be >= 0");
  }
};

struct OmpStats {
  int support = 0;
  double residual_norm = 0.0;
  bool tolerance_met = false;
  bool cap_bound = false; // support cap reached with the tolerance unmet
};

struct LearnStats {
  int sweeps = 0;
  bool under_determined = false; // K > M
  int replaced_atoms = 0;
  std::vector<double> sweep_rmse; // representation RMSE after each sweep
};

// ----------------------------------------------------------------------
// Orthogonal matching pursuit
// ----------------------------------------------------------------------

/// Greedy pursuit: repeatedly select the atom most correlated with the
/// residual and refit all coefficients by least squares on the support.
/// Stops when ||x - D a||_2 <= epsilon * sqrt(N) or the support cap binds.
/// The returned column stores only nonzero coefficients.
inline SparseColumn omp_encode(const Dictionary& dict,
                               const Eigen::Ref<const Eigen::VectorXd>& x,
                               const SparseConfig& cfg,
                               OmpStats* stats = nullptr) {
  require_unit_norm(dict);
  cfg.validate(int(dict.atom_count()));
  if (x.size() != dict.atom_len())
    throw std::invalid_argument("omp_encode: signal length mismatch");
  if (!x.allFinite())
    throw std::invalid_argument("omp_encode: non-finite signal");

  const Eigen::Index n = dict.atom_len();
  const Eigen::Index k_total = dict.atom_count();
  const double target = cfg.epsilon * std::sqrt(double(n));
  const double numeric_floor = 1e-12 * std::max(1.0, x.norm());
  const int natural_cap = int(std::min(n, k_total));
  const int cap = cfg.max_support ? std::min(*cfg.max_support, natural_cap)
                                  : natural_cap;

  std::vector<int> support;
  Eigen::VectorXd coef;
  Eigen::VectorXd residual = x;
  double rnorm = residual.norm();

  auto publish = [&](bool met, bool capped) {
    // Coefficients at relative machine-zero are not support; the least
    // squares refit can null out an atom picked early once better atoms
    // join, and keeping such entries would misstate the l0 norm.
    double coef_peak = 0.0;
    for (Eigen::Index i = 0; i < coef.size(); ++i)
      coef_peak = std::max(coef_peak, std::abs(coef[i]));
    const double coef_floor = 1e-12 * coef_peak;
    SparseColumn col;
    col.reserve(support.size());
    for (size_t i = 0; i < support.size(); ++i)
      if (coef.size() > Eigen::Index(i) &&
          std::abs(coef[Eigen::Index(i)]) > coef_floor)
        col.push_back({support[i], coef[Eigen::Index(i)]});
    if (stats) {
      stats->support = int(col.size());
      stats->residual_norm = rnorm;
      stats->tolerance_met = met;
      stats->cap_bound = capped;
    }
    return col;
  };

  if (rnorm <= std::max(target, numeric_floor)) return publish(true, false);

  Eigen::MatrixXd sub(n, cap); // selected atoms, grown column by column
  std::vector<char> used(size_t(k_total), 0);

  while (true) {
    // Most correlated unused atom.
    int best = -1;
    double best_corr = 0.0;
    for (Eigen::Index k = 0; k < k_total; ++k) {
      if (used[size_t(k)]) continue;
      const double corr = std::abs(dict.atoms.col(k).dot(residual));
      if (corr > best_corr) {
        best_corr = corr;
        best = int(k);
      }
    }
    const bool stalled = best < 0 || best_corr <= numeric_floor;
    if (stalled) {
      // Residual (numerically) orthogonal to every remaining atom.
      if (cfg.max_support) return publish(false, false);
      throw std::runtime_error(
          "omp_encode: tolerance unreachable, residual orthogonal to the "
          "dictionary span (residual=" + std::to_string(rnorm) + ")");
    }

    used[size_t(best)] = 1;
    support.push_back(best);
    const Eigen::Index s = Eigen::Index(support.size());
    sub.col(s - 1) = dict.atoms.col(best);

    coef = sub.leftCols(s).colPivHouseholderQr().solve(x);
    residual = x - sub.leftCols(s) * coef;
    rnorm = residual.norm();

    if (rnorm <= std::max(target, numeric_floor)) return publish(true, false);
    if (int(s) >= cap) {
      if (cfg.max_support) return publish(false, true);
      throw std::runtime_error(
          "omp_encode: tolerance unreachable after " + std::to_string(s) +
          " atoms (residual=" + std::to_string(rnorm) + ")");
    }
  }
}

/// Column-wise sparse coding of a whole data matrix. Columns are
/// independent; per-column diagnostics land in `stats` when given.
inline SparseCodes encode_all(const Dictionary& dict,
                              const Eigen::MatrixXd& data,
                              const SparseConfig& cfg,
                              std::vector<OmpStats>* stats = nullptr) {
  require_unit_norm(dict);
  if (data.rows() != dict.atom_len())
    throw std::invalid_argument("encode_all: row count mismatch");

  SparseCodes codes;
  codes.rows = int(dict.atom_count());
  codes.columns.resize(size_t(data.cols()));
  if (stats) stats->resize(size_t(data.cols()));

  // Exceptions must not escape the parallel region; remember the first
  // failing column and rethrow afterwards.
  std::string failure;
  bool failed = false;

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16)
#endif
  for (Eigen::Index m = 0; m < data.cols(); ++m) {
    if (failed) continue;
    try {
      OmpStats st;
      codes.columns[size_t(m)] = omp_encode(dict, data.col(m), cfg, &st);
      if (stats) (*stats)[size_t(m)] = st;
    } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical(dsd_encode_all_failure)
#endif
      {
        if (!failed) {
          failure = "encode_all: column " + std::to_string(m) + ": " + e.what();
          failed = true;
        }
      }
    }
  }
  if (failed) throw std::runtime_error(failure);
  return codes;
}

/// D * A computed from the sparse storage.
inline Eigen::MatrixXd reconstruct(const Dictionary& dict,
                                   const SparseCodes& codes) {
  if (codes.rows != int(dict.atom_count()))
    throw std::invalid_argument("reconstruct: code rows != atom count");
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(dict.atom_len(), codes.count());
  for (Eigen::Index m = 0; m < codes.count(); ++m)
    for (const auto& e : codes.columns[size_t(m)])
      out.col(m) += e.value * dict.atoms.col(e.atom);
  return out;
}

// ----------------------------------------------------------------------
// Dictionary learning
// ----------------------------------------------------------------------

namespace detail {

// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
inline void shuffle_indices(std::vector<Eigen::Index>& idx,
                            std::mt19937_64& rng) {
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[size_t(rng() % i)]);
}

inline double represent_rmse(const Eigen::MatrixXd& data,
                             const Dictionary& dict,
                             const SparseCodes& codes) {
  return std::sqrt((data - reconstruct(dict, codes)).squaredNorm() /
                   double(data.size()));
}

} // namespace detail

/// Seed the dictionary with K distinct data columns, normalized. When the
/// data has fewer columns than K the selection cycles and later copies get
/// a small seeded jitter so no two atoms coincide.
inline Dictionary init_dictionary(const Eigen::MatrixXd& data, int atom_count,
                                  std::uint64_t seed) {
  if (atom_count < 1)
    throw std::invalid_argument("init_dictionary: need at least one atom");
  if (data.cols() < 1)
    throw std::invalid_argument("init_dictionary: empty data");

  std::vector<Eigen::Index> candidates;
  for (Eigen::Index m = 0; m < data.cols(); ++m)
    if (data.col(m).norm() > 1e-300) candidates.push_back(m);
  if (candidates.empty())
    throw std::invalid_argument("init_dictionary: all data columns are zero");

  std::mt19937_64 rng(seed);
  detail::shuffle_indices(candidates, rng);

  Dictionary dict;
  dict.atoms.resize(data.rows(), atom_count);
  for (int k = 0; k < atom_count; ++k) {
    Eigen::VectorXd atom = data.col(candidates[size_t(k) % candidates.size()]);
    if (size_t(k) >= candidates.size()) {
      // Cycled copy: jitter to keep atoms distinct, then renormalize.
      const double scale = 1e-3 * atom.norm();
      for (Eigen::Index i = 0; i < atom.size(); ++i) {
        const double u = double(rng() >> 11) * 0x1p-53; // [0,1)
        atom[i] += scale * (2.0 * u - 1.0);
      }
    }
    const double norm = atom.norm();
    if (norm <= 1e-300)
      throw std::invalid_argument("init_dictionary: degenerate atom");
    dict.atoms.col(k) = atom / norm;
  }
  return dict;
}

/// Replace (d_k, beta_k restricted to its support) with the best rank-1
/// approximation of the residual matrix that excludes atom k's own
/// contribution. Atoms with empty support are re-seeded from the currently
/// worst-represented data column. Returns true when the atom was re-seeded.
///
/// The dominant singular pair comes from alternating power iteration warm
/// started at the current atom, so the representation error never increases
/// even if the iteration cap is hit.
inline bool ksvd_atom_update(Dictionary& dict, SparseCodes& codes,
                             const Eigen::MatrixXd& data, int k,
                             std::vector<char>* columns_taken = nullptr) {
  const Eigen::Index n = dict.atom_len();

  std::vector<Eigen::Index> omega; // columns whose code uses atom k
  for (Eigen::Index m = 0; m < codes.count(); ++m)
    for (const auto& e : codes.columns[size_t(m)])
      if (e.atom == k && e.value != 0.0) {
        omega.push_back(m);
        break;
      }

  auto reseed_from_worst_column = [&]() {
    Eigen::Index worst = -1;
    double worst_err = -1.0;
    const Eigen::MatrixXd approx = reconstruct(dict, codes);
    for (Eigen::Index m = 0; m < data.cols(); ++m) {
      if (columns_taken && (*columns_taken)[size_t(m)]) continue;
      if (data.col(m).norm() <= 1e-300) continue;
      const double err = (data.col(m) - approx.col(m)).squaredNorm();
      if (err > worst_err) {
        worst_err = err;
        worst = m;
      }
    }
    if (worst < 0) return false; // nothing usable, keep the old atom
    dict.atoms.col(k) = data.col(worst) / data.col(worst).norm();
    if (columns_taken) (*columns_taken)[size_t(worst)] = 1;
    return true;
  };

  if (omega.empty()) return reseed_from_worst_column();

  // Restricted residual without atom k's contribution.
  Eigen::MatrixXd err(n, Eigen::Index(omega.size()));
  for (size_t i = 0; i < omega.size(); ++i) {
    const Eigen::Index m = omega[i];
    Eigen::VectorXd col = data.col(m);
    for (const auto& e : codes.columns[size_t(m)])
      if (e.atom != k) col -= e.value * dict.atoms.col(e.atom);
    err.col(Eigen::Index(i)) = col;
  }

  // Dominant singular pair by alternating power iteration on err.
  Eigen::VectorXd u = dict.atoms.col(k);
  Eigen::VectorXd v;
  double sigma = 0.0, sigma_prev = -1.0;
  for (int iter = 0; iter < 1000; ++iter) {
    v = err.transpose() * u;
    const double vn = v.norm();
    if (vn <= 1e-300) break;
    v /= vn;
    Eigen::VectorXd u_next = err * v;
    sigma = u_next.norm();
    if (sigma <= 1e-300) break;
    u = u_next / sigma;
    if (std::abs(sigma - sigma_prev) <= 1e-10 * sigma) break;
    sigma_prev = sigma;
  }

  if (sigma <= 1e-300) {
    // Degenerate iteration; keep the current pair so the error cannot grow.
    return false;
  }

  dict.atoms.col(k) = u;
  for (size_t i = 0; i < omega.size(); ++i) {
    const double value = sigma * v[Eigen::Index(i)];
    auto& col = codes.columns[size_t(omega[i])];
    for (auto it = col.begin(); it != col.end(); ++it)
      if (it->atom == k) {
        if (value != 0.0)
          it->value = value;
        else
          col.erase(it);
        break;
      }
  }
  return false;
}

/// Alternate column-wise sparse coding with per-atom rank-1 updates.
inline std::pair<Dictionary, SparseCodes> ksvd_learn(
    const Eigen::MatrixXd& data, int atom_count, const SparseConfig& cfg,
    LearnStats* stats = nullptr) {
  cfg.validate(atom_count);
  if (data.cols() < 1)
    throw std::invalid_argument("ksvd_learn: empty data");
  if (data.norm() <= 1e-300)
    throw std::invalid_argument("ksvd_learn: all-zero data");

  LearnStats local;
  local.under_determined = atom_count > data.cols();

  Dictionary dict = init_dictionary(data, atom_count, cfg.seed);
  SparseCodes codes;
  codes.rows = atom_count;
  codes.columns.resize(size_t(data.cols()));

  for (int sweep = 0; sweep < cfg.learn_iters; ++sweep) {
    codes = encode_all(dict, data, cfg);
    std::vector<char> taken(size_t(data.cols()), 0);
    for (int k = 0; k < atom_count; ++k)
      if (ksvd_atom_update(dict, codes, data, k, &taken))
        ++local.replaced_atoms;
    ++local.sweeps;
    local.sweep_rmse.push_back(detail::represent_rmse(data, dict, codes));
  }
  if (cfg.learn_iters == 0) codes = encode_all(dict, data, cfg);

  if (stats) *stats = local;
  return {std::move(dict), std::move(codes)};
}

} // namespace dsd
