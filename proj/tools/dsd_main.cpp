// dsd_main.cpp - batch CLI: denoise / despeckle / simulate / metrics /
// learn-dict / split-dict.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dsd/dsd.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadArgs = 2;
constexpr int kExitIo = 3;
constexpr int kExitPipeline = 4;

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct CommonOpts {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string manifest_path;
  std::string config_path;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--threads", o.threads,
                  "worker threads (0 = all available)");
  cmd->add_option("--manifest", o.manifest_path,
                  "manifest path (default: derived from --out)");
  cmd->add_option("--config", o.config_path,
                  "key=value config file; explicit flags win");
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw dsd::io_error("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key=value, got '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// Config precedence is flags > file > defaults: keys the command line
// already supplied are skipped, the rest are injected and the arguments
// re-parsed.
void apply_config_file(CLI::App& app, int argc, char** argv) {
  if (app.get_subcommands().empty()) return;
  CLI::App* sub = app.get_subcommands().front();
  const CLI::Option* copt = sub->get_option_no_throw("--config");
  if (!copt || copt->count() == 0) return;
  const std::string path = copt->results().front();

  std::vector<std::string> tokens;
  for (const auto& [key, value] : read_config_file(path)) {
    CLI::Option* op = sub->get_option_no_throw("--" + key);
    if (!op)
      throw std::runtime_error("config: unknown key '" + key +
                               "' for subcommand " + sub->get_name());
    if (op->count() > 0) continue;
    tokens.push_back("--" + key + "=" + value);
  }
  if (tokens.empty()) return;
  if (argc < 2 || !sub->check_name(argv[1]))
    throw std::runtime_error("config: cannot locate the subcommand argument");

  std::vector<std::string> args; // CLI11 consumes from the back
  for (int i = argc - 1; i >= 2; --i) args.emplace_back(argv[i]);
  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it)
    args.push_back(*it);
  args.emplace_back(argv[1]);
  app.parse(args);
}

void apply_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

// Runs `work`, writing the manifest (status + error included) whether the
// command succeeds or not.
int run_with_manifest(dsd::RunManifest& manifest, const std::string& path,
                      int failure_code, const std::function<int()>& work) {
  const auto t0 = std::chrono::steady_clock::now();
  int code = kExitOk;
  try {
    code = work();
  } catch (const dsd::io_error& e) {
    manifest.status = "error";
    manifest.error = e.what();
    code = kExitIo;
  } catch (const std::exception& e) {
    manifest.status = "error";
    manifest.error = e.what();
    code = failure_code;
  }
  manifest.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
  if (!path.empty()) {
    try {
      manifest.save(path);
    } catch (const std::exception& e) {
      std::cerr << "warning: could not write manifest " << path << ": "
                << e.what() << "\n";
      if (code == kExitOk) code = kExitIo;
    }
  }
  if (!manifest.error.empty()) std::cerr << "error: " << manifest.error << "\n";
  return code;
}

std::string default_sibling(const std::string& out, const char* suffix) {
  return out + suffix;
}

// Fail before the expensive stages when an output path cannot be created.
void require_writable(const std::string& path) {
  std::ofstream probe(path, std::ios::binary | std::ios::app);
  if (!probe) throw dsd::io_error("cannot create " + path);
}

// ----------------------------------------------------------------------
// denoise / despeckle
// ----------------------------------------------------------------------

struct DenoiseOpts {
  std::string in, out, report_path;
  double sigma = -1.0, epsilon = -1.0;
  std::string mode = "additive", dict_scope = "global",
              weights = "sparsity";
  int looks = 1, patch_edge = 8, stride = 1, atoms = 256, gamma = 90,
      window = 39, ref_stride = 4, learn_iters = 12, max_support = 0;
  bool single = false, no_bias_correction = false;
  CommonOpts common;
};

void add_denoise_options(CLI::App* cmd, DenoiseOpts& o, bool with_mode) {
  cmd->add_option("--in", o.in, "noisy input image")->required();
  cmd->add_option("--out", o.out, "denoised output image")->required();
  cmd->add_option("--sigma", o.sigma, "noise standard deviation");
  cmd->add_option("--epsilon", o.epsilon,
                  "per-pixel RMS tolerance (default: sigma)");
  if (with_mode)
    cmd->add_option("--mode", o.mode, "additive|speckle")
        ->check(CLI::IsMember({"additive", "speckle"}));
  cmd->add_option("--looks", o.looks, "equivalent number of looks (speckle)");
  cmd->add_option("--patch-edge", o.patch_edge, "square patch edge");
  cmd->add_option("--stride", o.stride, "patch extraction stride");
  cmd->add_option("--atoms", o.atoms, "dictionary atoms K");
  cmd->add_option("--gamma", o.gamma, "group size");
  cmd->add_option("--window", o.window, "search-window edge (pixels)");
  cmd->add_option("--ref-stride", o.ref_stride,
                  "stride between reference patches");
  cmd->add_option("--dict-scope", o.dict_scope, "per_group|global")
      ->check(CLI::IsMember({"per_group", "global"}));
  cmd->add_option("--weights", o.weights, "sparsity|uniform")
      ->check(CLI::IsMember({"sparsity", "uniform"}));
  cmd->add_option("--learn-iters", o.learn_iters, "dictionary sweeps");
  cmd->add_option("--max-support", o.max_support,
                  "per-patch support cap (0 = patch dim / 2)");
  cmd->add_flag("--single", o.single,
                "single-decomposition baseline (no subspace split)");
  cmd->add_flag("--no-bias-correction", o.no_bias_correction,
                "skip log-speckle mean correction (speckle mode)");
  cmd->add_option("--report", o.report_path,
                  "run report path (default: <out>.report.txt)");
  add_common(cmd, o.common);
}

int cmd_denoise(DenoiseOpts& o) {
  apply_threads(o.common.threads);
  const bool speckle = o.mode == "speckle";
  if (o.epsilon < 0.0) {
    if (!speckle && o.sigma < 0.0) {
      std::cerr << "error: additive mode needs --sigma or --epsilon\n";
      return kExitBadArgs;
    }
    o.epsilon = speckle ? dsd::log_speckle_sigma(o.looks) : o.sigma;
  }
  if (o.report_path.empty())
    o.report_path = default_sibling(o.out, ".report.txt");
  if (o.common.manifest_path.empty())
    o.common.manifest_path = default_sibling(o.out, ".manifest.json");

  dsd::DenoiseConfig cfg;
  cfg.patch_edge = o.patch_edge;
  cfg.stride = o.stride;
  cfg.dict_atoms = o.atoms;
  cfg.epsilon = o.epsilon;
  cfg.grouping.gamma = o.gamma;
  cfg.grouping.window = o.window;
  cfg.grouping.ref_stride = o.ref_stride;
  cfg.mode = speckle ? dsd::NoiseMode::speckle : dsd::NoiseMode::additive;
  cfg.dict_scope = o.dict_scope == "global" ? dsd::DictScope::global
                                            : dsd::DictScope::per_group;
  cfg.weights = o.weights == "uniform" ? dsd::WeightRule::uniform
                                       : dsd::WeightRule::sparsity;
  cfg.learn_iters = o.learn_iters;
  if (o.max_support > 0) cfg.max_support = o.max_support;
  cfg.looks = o.looks;
  cfg.bias_correction = !o.no_bias_correction;
  cfg.seed = o.common.seed;

  dsd::RunManifest manifest;
  manifest.command = o.single ? "denoise --single" : "denoise";
  manifest.inputs["image"] = o.in;
  manifest.outputs["image"] = o.out;
  manifest.outputs["report"] = o.report_path;
  manifest.params = {{"mode", speckle ? "speckle" : "additive"},
                     {"sigma", fmt(o.sigma)},
                     {"epsilon", fmt(o.epsilon)},
                     {"looks", std::to_string(o.looks)},
                     {"patch_edge", std::to_string(o.patch_edge)},
                     {"stride", std::to_string(o.stride)},
                     {"atoms", std::to_string(o.atoms)},
                     {"gamma", std::to_string(o.gamma)},
                     {"window", std::to_string(o.window)},
                     {"ref_stride", std::to_string(o.ref_stride)},
                     {"dict_scope", o.dict_scope},
                     {"weights", o.weights},
                     {"learn_iters", std::to_string(o.learn_iters)},
                     {"max_support", std::to_string(o.max_support)},
                     {"single", o.single ? "1" : "0"},
                     {"bias_correction", o.no_bias_correction ? "0" : "1"},
                     {"seed", std::to_string(o.common.seed)},
                     {"threads", std::to_string(o.common.threads)}};

  return run_with_manifest(manifest, o.common.manifest_path, kExitPipeline,
                           [&]() {
    const dsd::Image noisy = dsd::read_image(o.in);
    require_writable(o.out);
    require_writable(o.report_path);
    dsd::DenoiseReport report;
    dsd::Image result =
        o.single
            ? dsd::denoise_single(noisy, cfg, cfg.epsilon, &report)
            : dsd::run_denoise_pipeline(noisy, cfg, true, &report);
    dsd::write_image(o.out, result);
    std::ofstream rs(o.report_path);
    if (!rs) throw dsd::io_error("cannot create " + o.report_path);
    report.write(rs);
    std::cout << "denoised " << o.in << " -> " << o.out << " (groups "
              << report.total_groups << ", " << fmt(report.ms_total)
              << " ms)\n";
    return kExitOk;
  });
}

// ----------------------------------------------------------------------
// simulate
// ----------------------------------------------------------------------

struct SimulateOpts {
  std::string in, out, noise = "awgn";
  double sigma = 35.0;
  int looks = 1;
  CommonOpts common;
};

int cmd_simulate(SimulateOpts& o) {
  if (o.common.manifest_path.empty())
    o.common.manifest_path = default_sibling(o.out, ".manifest.json");
  dsd::RunManifest manifest;
  manifest.command = "simulate";
  manifest.inputs["image"] = o.in;
  manifest.outputs["image"] = o.out;
  manifest.params = {{"noise", o.noise},
                     {"sigma", fmt(o.sigma)},
                     {"looks", std::to_string(o.looks)},
                     {"seed", std::to_string(o.common.seed)}};
  return run_with_manifest(manifest, o.common.manifest_path, kExitPipeline,
                           [&]() {
    const dsd::Image clean = dsd::read_image(o.in);
    dsd::NoiseModel model;
    model.kind = o.noise == "awgn" ? dsd::NoiseKind::awgn
                                   : dsd::NoiseKind::speckle;
    model.sigma = o.sigma;
    model.looks = o.looks;
    model.seed = o.common.seed;
    const dsd::Image noisy = model.apply(clean);
    dsd::write_image(o.out, noisy);
    std::cout << "simulated " << o.noise << " noise: " << o.in << " -> "
              << o.out << "\n";
    return kExitOk;
  });
}

// ----------------------------------------------------------------------
// metrics
// ----------------------------------------------------------------------

struct MetricsOpts {
  std::string ref, test;
  double peak = 0.0, range = 0.0;
  bool windowed = false;
  CommonOpts common;
};

int cmd_metrics(MetricsOpts& o) {
  dsd::RunManifest manifest;
  manifest.command = "metrics";
  manifest.inputs["reference"] = o.ref;
  manifest.inputs["test"] = o.test;
  manifest.params = {{"peak", fmt(o.peak)},
                     {"range", fmt(o.range)},
                     {"windowed", o.windowed ? "1" : "0"}};
  return run_with_manifest(manifest, o.common.manifest_path, kExitPipeline,
                           [&]() {
    const dsd::Image ref = dsd::read_image(o.ref);
    const dsd::Image test = dsd::read_image(o.test);
    const double range = o.range > 0.0 ? o.range : ref.dynamic_range;
    const auto cfg = dsd::MetricConfig::for_range(range);
    std::cout << "psnr_db=" << fmt(dsd::psnr(ref, test, o.peak)) << "\n";
    std::cout << "ssim=" << fmt(dsd::ssim(ref, test, cfg)) << "\n";
    if (o.windowed)
      std::cout << "ssim_windowed=" << fmt(dsd::ssim_windowed(ref, test, cfg))
                << "\n";
    std::cout << "c1=" << fmt(cfg.c1) << "\n";
    std::cout << "c2=" << fmt(cfg.c2) << "\n";
    return kExitOk;
  });
}

// ----------------------------------------------------------------------
// learn-dict / split-dict
// ----------------------------------------------------------------------

struct LearnDictOpts {
  std::string in, out;
  double sigma = -1.0, epsilon = -1.0;
  int atoms = 256, patch_edge = 8, stride = 1, learn_iters = 12,
      max_support = 0;
  CommonOpts common;
};

int cmd_learn_dict(LearnDictOpts& o) {
  apply_threads(o.common.threads);
  if (o.epsilon < 0.0) {
    if (o.sigma < 0.0) {
      std::cerr << "error: learn-dict needs --sigma or --epsilon\n";
      return kExitBadArgs;
    }
    o.epsilon = o.sigma;
  }
  if (o.common.manifest_path.empty())
    o.common.manifest_path = default_sibling(o.out, ".manifest.json");
  dsd::RunManifest manifest;
  manifest.command = "learn-dict";
  manifest.inputs["image"] = o.in;
  manifest.outputs["dictionary"] = o.out;
  manifest.params = {{"epsilon", fmt(o.epsilon)},
                     {"atoms", std::to_string(o.atoms)},
                     {"patch_edge", std::to_string(o.patch_edge)},
                     {"stride", std::to_string(o.stride)},
                     {"learn_iters", std::to_string(o.learn_iters)},
                     {"max_support", std::to_string(o.max_support)},
                     {"seed", std::to_string(o.common.seed)}};
  return run_with_manifest(manifest, o.common.manifest_path, kExitPipeline,
                           [&]() {
    const dsd::Image img = dsd::read_image(o.in);
    require_writable(o.out);
    const dsd::PatchMatrix patches =
        dsd::extract_patches(img, o.patch_edge, o.stride);
    dsd::SparseConfig scfg;
    scfg.epsilon = o.epsilon;
    scfg.learn_iters = o.learn_iters;
    scfg.seed = o.common.seed;
    scfg.max_support = std::min(
        o.atoms, o.max_support > 0
                     ? o.max_support
                     : std::max(1, o.patch_edge * o.patch_edge / 2));
    dsd::LearnStats stats;
    auto [dict, codes] = dsd::ksvd_learn(patches.data, o.atoms, scfg, &stats);
    dsd::write_dictionary(o.out, dict);
    std::cout << "learned " << dict.atom_count() << " atoms from "
              << patches.count() << " patches";
    if (!stats.sweep_rmse.empty())
      std::cout << " (final rmse " << fmt(stats.sweep_rmse.back()) << ")";
    std::cout << "\n";
    return kExitOk;
  });
}

struct SplitDictOpts {
  std::string dict, in, out_principal, out_noise, report_path;
  double sigma = -1.0, epsilon = -1.0;
  int stride = 1, max_support = 0;
  CommonOpts common;
};

int cmd_split_dict(SplitDictOpts& o) {
  apply_threads(o.common.threads);
  if (o.epsilon < 0.0) {
    if (o.sigma < 0.0) {
      std::cerr << "error: split-dict needs --sigma or --epsilon\n";
      return kExitBadArgs;
    }
    o.epsilon = o.sigma;
  }
  if (o.report_path.empty())
    o.report_path = default_sibling(o.out_principal, ".freq.txt");
  if (o.common.manifest_path.empty())
    o.common.manifest_path = default_sibling(o.out_principal, ".manifest.json");
  dsd::RunManifest manifest;
  manifest.command = "split-dict";
  manifest.inputs["dictionary"] = o.dict;
  manifest.inputs["image"] = o.in;
  manifest.outputs["principal"] = o.out_principal;
  manifest.outputs["noise"] = o.out_noise;
  manifest.outputs["report"] = o.report_path;
  manifest.params = {{"epsilon", fmt(o.epsilon)},
                     {"stride", std::to_string(o.stride)},
                     {"max_support", std::to_string(o.max_support)}};
  return run_with_manifest(manifest, o.common.manifest_path, kExitPipeline,
                           [&]() {
    const dsd::Dictionary dict = dsd::read_dictionary(o.dict);
    const int patch_edge = int(std::lround(std::sqrt(double(dict.atom_len()))));
    if (patch_edge * patch_edge != int(dict.atom_len()))
      throw std::invalid_argument("split-dict: atom length is not square");
    const dsd::Image img = dsd::read_image(o.in);
    require_writable(o.out_principal);
    require_writable(o.out_noise);
    require_writable(o.report_path);
    const dsd::PatchMatrix patches =
        dsd::extract_patches(img, patch_edge, o.stride);

    dsd::SparseConfig scfg;
    scfg.epsilon = o.epsilon;
    scfg.max_support = std::min(
        int(dict.atom_count()),
        o.max_support > 0 ? o.max_support
                          : std::max(1, patch_edge * patch_edge / 2));
    const dsd::SparseCodes codes = dsd::encode_all(dict, patches.data, scfg);
    const dsd::SubdictSplit split = dsd::analyze_codes(codes);
    auto [principal, noise] = dsd::split_dictionary(dict, codes, split);
    dsd::write_dictionary(o.out_principal, principal.dict);
    dsd::write_dictionary(o.out_noise, noise.dict);

    std::ofstream rs(o.report_path);
    if (!rs) throw dsd::io_error("cannot create " + o.report_path);
    rs << "atoms=" << dict.atom_count() << "\npatches=" << patches.count()
       << "\nmodal_frequency=" << split.modal_frequency
       << "\ncut=" << split.cut << "\n";
    if (split.cut > int(dict.atom_count()) / 2)
      rs << "warning=principal part larger than half the dictionary\n";
    rs << "rank\tatom\tfrequency\n";
    for (size_t i = 0; i < split.order.size(); ++i)
      rs << i << '\t' << split.order[i] << '\t'
         << split.frequencies[split.order[i]] << '\n';

    std::cout << "split " << dict.atom_count() << " atoms: principal "
              << split.cut << ", noise "
              << (dict.atom_count() - split.cut) << " (f*="
              << split.modal_frequency << ")\n";
    return kExitOk;
  });
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"patch-based image denoising by dual sparse decomposition"};
  app.set_version_flag("--version", dsd::version_string);
  app.require_subcommand(1);

  DenoiseOpts denoise_opts;
  add_denoise_options(app.add_subcommand("denoise",
                                         "denoise an image (additive or "
                                         "speckle noise)"),
                      denoise_opts, true);

  DenoiseOpts despeckle_opts;
  despeckle_opts.mode = "speckle";
  add_denoise_options(app.add_subcommand("despeckle",
                                         "despeckle an intensity image "
                                         "(speckle mode shortcut)"),
                      despeckle_opts, false);

  SimulateOpts sim_opts;
  auto* sim = app.add_subcommand("simulate", "add synthetic noise");
  sim->add_option("--in", sim_opts.in, "clean input image")->required();
  sim->add_option("--out", sim_opts.out, "noisy output image")->required();
  sim->add_option("--noise", sim_opts.noise, "awgn|speckle")
      ->check(CLI::IsMember({"awgn", "speckle"}));
  sim->add_option("--sigma", sim_opts.sigma, "AWGN standard deviation");
  sim->add_option("--looks", sim_opts.looks, "speckle looks");
  add_common(sim, sim_opts.common);

  MetricsOpts met_opts;
  auto* met = app.add_subcommand("metrics", "PSNR/SSIM of an image pair");
  met->add_option("--ref", met_opts.ref, "reference image")->required();
  met->add_option("--test", met_opts.test, "test image")->required();
  met->add_option("--peak", met_opts.peak,
                  "fixed PSNR peak (default: reference max)");
  met->add_option("--range", met_opts.range,
                  "SSIM dynamic range (default: reference container)");
  met->add_flag("--windowed", met_opts.windowed,
                "also print 11x11 Gaussian-window mean SSIM");
  add_common(met, met_opts.common);

  LearnDictOpts learn_opts;
  auto* learn = app.add_subcommand("learn-dict",
                                   "learn a dictionary from an image");
  learn->add_option("--in", learn_opts.in, "input image")->required();
  learn->add_option("--out", learn_opts.out, "dictionary file")->required();
  learn->add_option("--sigma", learn_opts.sigma, "noise std (epsilon default)");
  learn->add_option("--epsilon", learn_opts.epsilon, "coding tolerance");
  learn->add_option("--atoms", learn_opts.atoms, "dictionary atoms K");
  learn->add_option("--patch-edge", learn_opts.patch_edge, "patch edge");
  learn->add_option("--stride", learn_opts.stride, "extraction stride");
  learn->add_option("--learn-iters", learn_opts.learn_iters, "sweeps");
  learn->add_option("--max-support", learn_opts.max_support,
                    "support cap (0 = patch dim / 2)");
  add_common(learn, learn_opts.common);

  SplitDictOpts split_opts;
  auto* split = app.add_subcommand(
      "split-dict", "split a dictionary by atom occurrence frequency");
  split->add_option("--dict", split_opts.dict, "dictionary file")->required();
  split->add_option("--in", split_opts.in, "image supplying the codes")
      ->required();
  split->add_option("--out-principal", split_opts.out_principal,
                    "principal sub-dictionary file")
      ->required();
  split->add_option("--out-noise", split_opts.out_noise,
                    "noise sub-dictionary file")
      ->required();
  split->add_option("--report", split_opts.report_path,
                    "frequency report path");
  split->add_option("--sigma", split_opts.sigma, "noise std (epsilon default)");
  split->add_option("--epsilon", split_opts.epsilon, "coding tolerance");
  split->add_option("--stride", split_opts.stride, "extraction stride");
  split->add_option("--max-support", split_opts.max_support,
                    "support cap (0 = patch dim / 2)");
  add_common(split, split_opts.common);

  try {
    app.parse(argc, argv);
    apply_config_file(app, argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadArgs;
  } catch (const dsd::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadArgs;
  }

  if (app.got_subcommand("denoise")) return cmd_denoise(denoise_opts);
  if (app.got_subcommand("despeckle")) return cmd_denoise(despeckle_opts);
  if (app.got_subcommand("simulate")) return cmd_simulate(sim_opts);
  if (app.got_subcommand("metrics")) return cmd_metrics(met_opts);
  if (app.got_subcommand("learn-dict")) return cmd_learn_dict(learn_opts);
  if (app.got_subcommand("split-dict")) return cmd_split_dict(split_opts);
  return kExitBadArgs;
}
