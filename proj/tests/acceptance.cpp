// acceptance.cpp - end-to-end acceptance suite; prints one PASS/FAIL line
// per criterion and exits nonzero if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dsd/dsd.hpp"

namespace {

struct Harness {
  int failed = 0;
  int total = 0;

  void run(const std::string& name, const std::function<bool(std::string&)>& fn) {
    ++total;
    std::string detail;
    bool ok = false;
    try {
      ok = fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("%s  %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
                detail.empty() ? "" : "  -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failed;
  }
};

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

double uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1p-53; }

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                              std::mt19937_64& rng) {
  return Eigen::MatrixXd::NullaryExpr(
      rows, cols, [&]() { return 2.0 * uniform(rng) - 1.0; });
}

dsd::Dictionary random_unit_dictionary(Eigen::Index n, Eigen::Index k,
                                       std::mt19937_64& rng) {
  dsd::Dictionary d;
  d.atoms = random_matrix(n, k, rng);
  for (Eigen::Index j = 0; j < k; ++j) d.atoms.col(j).normalize();
  return d;
}

dsd::SparseCodes random_codes(int rows, int cols, int max_support,
                              std::mt19937_64& rng) {
  dsd::SparseCodes codes;
  codes.rows = rows;
  codes.columns.resize(size_t(cols));
  for (auto& col : codes.columns) {
    const int support = int(rng() % std::uint64_t(max_support + 1));
    std::set<int> atoms;
    while (int(atoms.size()) < support)
      atoms.insert(int(rng() % std::uint64_t(rows)));
    for (int a : atoms) {
      double v = 0.0;
      while (v == 0.0) v = 2.0 * uniform(rng) - 1.0;
      col.push_back({a, v});
    }
  }
  return codes;
}

std::string fixture_path(const char* name) {
  return std::string(DSD_TEST_DATA_DIR) + "/" + name;
}

// ----------------------------------------------------------------------
// criteria
// ----------------------------------------------------------------------

bool criterion_frequency_oracle(std::string& detail) {
  const double t0 = now_s();
  auto rng = make_rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + int(rng() % 64);
    const int m = 1 + int(rng() % 256);
    const int max_support = std::min(k, 6);
    const dsd::SparseCodes codes = random_codes(k, m, max_support, rng);
    const Eigen::VectorXi freq = dsd::atom_frequencies(codes);
    const Eigen::MatrixXd dense = codes.dense();
    for (int row = 0; row < k; ++row) {
      int count = 0;
      for (Eigen::Index col = 0; col < dense.cols(); ++col)
        if (dense(row, col) != 0.0) ++count;
      if (freq[row] != count) {
        detail = "mismatch at trial " + std::to_string(trial);
        return false;
      }
    }
  }
  const double elapsed = now_s() - t0;
  detail = "100 matrices in " + std::to_string(elapsed) + " s";
  return elapsed < 5.0;
}

bool criterion_partition_identity(std::string& detail) {
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    auto rng = make_rng(200 + std::uint64_t(trial));
    const Eigen::MatrixXd data = 5.0 * random_matrix(16, 100, rng);
    dsd::SparseConfig cfg;
    cfg.epsilon = 0.1;
    cfg.max_support = 6;
    cfg.learn_iters = 3;
    cfg.seed = std::uint64_t(trial);
    auto [dict, codes] = dsd::ksvd_learn(data, 24, cfg);
    const Eigen::MatrixXd full = dsd::reconstruct(dict, codes);
    dsd::SubdictSplit split = dsd::analyze_codes(codes);
    const int k_total = int(dict.atom_count());
    for (int cut : {1, k_total / 4, split.cut, k_total}) {
      if (cut < 1 || cut > k_total) continue;
      split.cut = cut;
      auto [principal, noise] = dsd::split_dictionary(dict, codes, split);
      const Eigen::MatrixXd sum = dsd::principal_reconstruct(principal) +
                                  dsd::reconstruct(noise.dict, noise.codes);
      worst = std::max(worst, (full - sum).norm() / full.norm());
    }
  }
  detail = "worst relative error " + std::to_string(worst);
  return worst <= 1e-12;
}

bool criterion_omp_contracts(std::string& detail) {
  // residual bound / cap reporting / orthogonality
  auto rng = make_rng(300);
  const dsd::Dictionary dict = random_unit_dictionary(16, 40, rng);
  const Eigen::MatrixXd data = 8.0 * random_matrix(16, 120, rng);
  for (double eps : {0.05, 0.4}) {
    dsd::SparseConfig cfg;
    cfg.epsilon = eps;
    cfg.max_support = 8;
    std::vector<dsd::OmpStats> stats;
    const dsd::SparseCodes codes = dsd::encode_all(dict, data, cfg, &stats);
    for (Eigen::Index m = 0; m < data.cols(); ++m) {
      Eigen::VectorXd residual = data.col(m);
      for (const auto& e : codes.columns[size_t(m)])
        residual -= e.value * dict.atoms.col(e.atom);
      const bool within = residual.norm() <= eps * 4.0 + 1e-12;
      if (!within && !stats[size_t(m)].cap_bound) {
        detail = "column neither within tolerance nor cap-bound";
        return false;
      }
      for (const auto& e : codes.columns[size_t(m)])
        if (std::abs(residual.dot(dict.atoms.col(e.atom))) > 1e-8) {
          detail = "residual not orthogonal to a selected atom";
          return false;
        }
    }
  }

  // noiseless 3-sparse recovery, 200 seeded trials, K = 2N = 32;
  // Gaussian dictionaries, log-uniform [1, 40] coefficient magnitudes
  int recovered = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto trial_rng = make_rng(4000 + std::uint64_t(trial));
    dsd::Dictionary d;
    d.atoms.resize(16, 32);
    for (int j = 0; j < 32; ++j)
      for (int i = 0; i < 16; ++i) {
        const double u1 = (double(trial_rng() >> 11) + 1.0) * 0x1p-53;
        d.atoms(i, j) = std::sqrt(-2.0 * std::log(u1)) *
                        std::cos(2.0 * std::numbers::pi * uniform(trial_rng));
      }
    for (int j = 0; j < 32; ++j) d.atoms.col(j).normalize();
    std::set<int> want;
    while (want.size() < 3) want.insert(int(trial_rng() % 32));
    Eigen::VectorXd x = Eigen::VectorXd::Zero(16);
    for (int a : want) {
      const double sign = (trial_rng() & 1) ? 1.0 : -1.0;
      x += sign * std::pow(40.0, uniform(trial_rng)) * d.atoms.col(a);
    }
    dsd::SparseConfig cfg;
    cfg.epsilon = 1e-9;
    cfg.max_support = 6;
    std::set<int> got;
    for (const auto& e : dsd::omp_encode(d, x, cfg)) got.insert(e.atom);
    if (got == want) ++recovered;
  }
  detail = "support recovery " + std::to_string(recovered) + "/200";
  return recovered >= 190;
}

bool criterion_ksvd_monotone(std::string& detail) {
  double worst_increase = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    auto rng = make_rng(500 + std::uint64_t(trial));
    const Eigen::MatrixXd data = random_matrix(16, 64, rng);
    dsd::SparseConfig cfg;
    cfg.epsilon = 0.05;
    cfg.max_support = 5;
    cfg.seed = std::uint64_t(trial);
    dsd::Dictionary dict = dsd::init_dictionary(data, 24, cfg.seed);
    dsd::SparseCodes codes = dsd::encode_all(dict, data, cfg);
    double before = (data - dsd::reconstruct(dict, codes)).norm();
    for (int k = 0; k < 24; ++k) {
      dsd::ksvd_atom_update(dict, codes, data, k);
      const double after = (data - dsd::reconstruct(dict, codes)).norm();
      if (before > 0.0)
        worst_increase = std::max(worst_increase, (after - before) / before);
      before = after;
    }
  }
  detail = "worst relative increase " + std::to_string(worst_increase);
  return worst_increase <= 1e-9;
}

bool criterion_histogram_cut(std::string& detail) {
  std::vector<int> fixture;
  for (int i = 0; i < 10; ++i) fixture.push_back(40);
  for (int i = 0; i < 90; ++i) fixture.push_back(2);
  const auto [cut, modal] = dsd::histogram_cut(fixture);
  const auto [cut_eq, modal_eq] = dsd::histogram_cut(std::vector<int>(64, 7));
  detail = "fixture P=" + std::to_string(cut) + " f*=" + std::to_string(modal) +
           ", degenerate P=" + std::to_string(cut_eq);
  return cut == 10 && modal == 2 && cut_eq == 64 && modal_eq == 7;
}

bool criterion_metric_fidelity(std::string& detail) {
  const dsd::Image ref(16, 16, 255.0);
  dsd::Image off = ref;
  off.pixels.array() -= 1.0;
  const double want_psnr = 20.0 * std::log10(255.0);
  if (std::abs(dsd::psnr(ref, off) - want_psnr) > 1e-6) {
    detail = "psnr closed form";
    return false;
  }
  dsd::Image far = ref;
  far.pixels.array() += 255.0;
  if (std::abs(dsd::psnr(ref, far)) > 1e-6) {
    detail = "psnr zero-dB case";
    return false;
  }

  auto rng = make_rng(600);
  dsd::Image a(12, 12), b(12, 12);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 12; ++c) {
      a.at(r, c) = 255.0 * uniform(rng);
      b.at(r, c) = 255.0 * uniform(rng);
    }
  if (dsd::ssim(a, a) != 1.0) {
    detail = "ssim(identical) != 1";
    return false;
  }
  const auto cfg = dsd::MetricConfig::for_range(255.0);
  const double lum = (2.0 * 80.0 * 120.0 + cfg.c1) /
                     (80.0 * 80.0 + 120.0 * 120.0 + cfg.c1);
  const double got =
      dsd::ssim(dsd::Image(6, 6, 80.0), dsd::Image(6, 6, 120.0), cfg);
  if (std::abs(got - lum) > 1e-6) {
    detail = "ssim constant-pair closed form";
    return false;
  }
  detail = "psnr/ssim closed forms within 1e-6";
  return true;
}

bool criterion_denoising_trend(std::string& detail) {
  const double t0 = now_s();
  const char* names[3] = {"camera_128.pgm", "moon_128.pgm", "brick_128.pgm"};
  int psnr_wins = 0, psnr_margin_wins = 0, ssim_wins = 0;
  std::string log;
  for (int i = 0; i < 3; ++i) {
    const dsd::Image clean = dsd::read_image(fixture_path(names[i]));
    const dsd::Image noisy = dsd::add_awgn(clean, 35.0, 900 + std::uint64_t(i));

    dsd::DenoiseConfig cfg;
    cfg.patch_edge = 8;
    cfg.stride = 1;
    cfg.dict_atoms = 256;
    cfg.epsilon = 35.0;
    cfg.grouping.gamma = 90;
    cfg.grouping.window = 39;
    cfg.grouping.ref_stride = 4;
    cfg.dict_scope = dsd::DictScope::global;
    cfg.learn_iters = 12;
    cfg.seed = 77 + std::uint64_t(i);

    auto [dual, report] = dsd::denoise(noisy, cfg);
    const dsd::Image single = dsd::denoise_single(noisy, cfg, cfg.epsilon);

    const double psnr_dual = dsd::psnr(clean, dual);
    const double psnr_single = dsd::psnr(clean, single);
    const double ssim_dual = dsd::ssim(clean, dual);
    const double ssim_single = dsd::ssim(clean, single);

    if (psnr_dual >= psnr_single) ++psnr_wins;
    if (psnr_dual >= psnr_single + 0.3) ++psnr_margin_wins;
    if (ssim_dual > ssim_single) ++ssim_wins;

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "[%s dual %.2f dB / %.4f vs single %.2f dB / %.4f, P=%d/%d] ",
                  names[i], psnr_dual, ssim_dual, psnr_single, ssim_single,
                  report.groups.front().cut, report.groups.front().atoms);
    log += buf;
  }
  const double elapsed = now_s() - t0;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "wins %d/3, +0.3dB on %d, ssim on %d, %.0f s",
                psnr_wins, psnr_margin_wins, ssim_wins, elapsed);
  detail = log + buf;
  return psnr_wins == 3 && psnr_margin_wins >= 2 && ssim_wins >= 2 &&
         elapsed < 600.0;
}

bool criterion_despeckle(std::string& detail) {
  const double t0 = now_s();
  dsd::Image phantom(128, 128, 60.0);
  for (int r = 0; r < 128; ++r)
    for (int c = 0; c < 128; ++c) {
      if (r >= 64 && c < 64) phantom.at(r, c) = 120.0;
      if (r < 64 && c >= 64) phantom.at(r, c) = 180.0;
      if (r >= 64 && c >= 64) phantom.at(r, c) = 240.0;
      const int dr = r - 32, dc = c - 32;
      if (dr * dr + dc * dc < 18 * 18) phantom.at(r, c) = 210.0;
    }

  const dsd::Image speckled = dsd::add_speckle(phantom, 1, 321);
  dsd::DenoiseConfig cfg;
  cfg.patch_edge = 8;
  cfg.stride = 1;
  cfg.dict_atoms = 256;
  cfg.grouping.gamma = 90;
  cfg.grouping.window = 39;
  cfg.grouping.ref_stride = 4;
  cfg.dict_scope = dsd::DictScope::global;
  cfg.learn_iters = 12;
  cfg.looks = 1;
  cfg.seed = 9;
  auto [out, report] = dsd::despeckle(speckled, cfg);

  const double psnr_noisy = dsd::psnr(phantom, speckled);
  const double psnr_out = dsd::psnr(phantom, out);

  // flat-region check: interior of the 120 quadrant, away from edges
  const double flat_mean = out.pixels.block(80, 16, 32, 32).mean();
  const double rel_bias = std::abs(flat_mean - 120.0) / 120.0;

  const double elapsed = now_s() - t0;
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "noisy %.2f dB -> out %.2f dB, flat mean %.2f (bias %.1f%%), "
                "%.0f s",
                psnr_noisy, psnr_out, flat_mean, 100.0 * rel_bias, elapsed);
  detail = buf;
  return psnr_out >= psnr_noisy + 5.0 && rel_bias <= 0.05 && elapsed < 600.0;
}

bool criterion_property_suite(std::string& detail) {
  auto rng = make_rng(700);

  // self-minimality of both metrics
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd x = random_matrix(16, 1, rng);
    const Eigen::VectorXd y = random_matrix(16, 1, rng);
    if (dsd::euclidean_similarity(x, x) > dsd::euclidean_similarity(x, y)) {
      detail = "euclidean self-minimality";
      return false;
    }
    const double self = dsd::ppb_similarity(x, x, 2.0);
    if (self > dsd::ppb_similarity(x, y, 2.0) + 1e-12 ||
        std::abs(self - 16.0 * std::log(2.0) * 3.0) > 1e-9) {
      detail = "ppb self-minimality / minimum value";
      return false;
    }
  }

  // group determinism and gamma monotonicity
  dsd::Image img(20, 20);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c) img.at(r, c) = 255.0 * uniform(rng);
  const dsd::PatchMatrix patches = dsd::extract_patches(img, 4, 1);
  dsd::GroupingConfig gcfg;
  gcfg.window = 13;
  for (int gamma = 1; gamma <= 16; gamma += 5) {
    gcfg.gamma = gamma;
    const dsd::Group a = dsd::form_group(patches, 120, gcfg);
    const dsd::Group b = dsd::form_group(patches, 120, gcfg);
    if (a.member_indices != b.member_indices) {
      detail = "group determinism";
      return false;
    }
    gcfg.gamma = gamma + 5;
    const dsd::Group bigger = dsd::form_group(patches, 120, gcfg);
    for (size_t i = 0; i < a.member_indices.size(); ++i)
      if (bigger.member_indices[i] != a.member_indices[i]) {
        detail = "gamma monotonicity";
        return false;
      }
  }

  // extract/aggregate round trip
  for (int t = 0; t < 5; ++t) {
    const int h = 8 + int(rng() % 20), w = 8 + int(rng() % 20);
    dsd::Image src(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) src.at(r, c) = 255.0 * uniform(rng);
    const int edge = 2 + int(rng() % 5);
    const int stride = 1 + int(rng() % 3);
    const dsd::PatchMatrix pm = dsd::extract_patches(src, edge, stride);
    const dsd::Image back = dsd::aggregate(pm, pm.data, h, w);
    if ((back.pixels - src.pixels).cwiseAbs().maxCoeff() > 1e-12) {
      detail = "extract/aggregate round trip";
      return false;
    }
  }

  // seeded end-to-end bit reproducibility
  dsd::Image scene(32, 32);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      scene.at(r, c) = 128.0 + 50.0 * std::sin(0.3 * r) * std::cos(0.4 * c);
  const dsd::Image noisy = dsd::add_awgn(scene, 20.0, 5);
  dsd::DenoiseConfig dcfg;
  dcfg.patch_edge = 4;
  dcfg.stride = 1;
  dcfg.dict_atoms = 24;
  dcfg.epsilon = 20.0;
  dcfg.grouping.gamma = 12;
  dcfg.grouping.window = 11;
  dcfg.grouping.ref_stride = 2;
  dcfg.learn_iters = 2;
  dcfg.seed = 42;
  for (auto scope : {dsd::DictScope::global, dsd::DictScope::per_group}) {
    dcfg.dict_scope = scope;
    const dsd::Image a = dsd::denoise(noisy, dcfg).first;
    const dsd::Image b = dsd::denoise(noisy, dcfg).first;
    if (!(a.pixels == b.pixels)) {
      detail = "seeded end-to-end bit reproducibility";
      return false;
    }
  }

  detail = "similarity, grouping, round-trip and reproducibility properties";
  return true;
}

} // namespace

int main() {
  Harness h;
  h.run("1. atom-frequency oracle equivalence (100 random code matrices)",
        criterion_frequency_oracle);
  h.run("2. partition identity at every cut (<= 1e-12 relative)",
        criterion_partition_identity);
  h.run("3. OMP contracts: residual bound, orthogonality, 3-sparse recovery",
        criterion_omp_contracts);
  h.run("4. K-SVD atom updates never increase the fixed-support error",
        criterion_ksvd_monotone);
  h.run("5. histogram cut: synthetic fixture and degenerate case",
        criterion_histogram_cut);
  h.run("6. metric fidelity against closed forms (1e-6)",
        criterion_metric_fidelity);
  h.run("7. dual beats the single-decomposition baseline at sigma 35",
        criterion_denoising_trend);
  h.run("8. one-look despeckling: +5 dB and flat-region bias within 5%",
        criterion_despeckle);
  h.run("9. property suites: similarity minima, grouping, round trips, "
        "reproducibility",
        criterion_property_suite);
  std::printf("%d/%d criteria passed\n", h.total - h.failed, h.total);
  return h.failed == 0 ? 0 : 1;
}
