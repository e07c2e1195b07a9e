#include "gap/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gap/checkpoint.hpp"
#include "gap/datasets.hpp"
#include "gap/error.hpp"
#include "gap/image_io.hpp"
#include "gap/metrics.hpp"
#include "gap/model.hpp"
#include "gap/noise.hpp"
#include "gap/oracle.hpp"
#include "gap/sampler.hpp"
#include "gap/training.hpp"

namespace gap::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kTwoTemplatePrior =
    "# two equally likely templates on a 1x2 grid\n"
    "1 2 2\n"
    "0.5\n2 1\n"
    "0.5\n1 2\n";

// Options every subcommand understands.
struct Common {
  std::string out;
  int threads = 0;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::App* app = nullptr;
};

void add_common(CLI::App* sub, Common& c, bool stochastic, bool needs_out = true) {
  c.app = sub;
  sub->option_defaults()->always_capture_default();
  auto* out = sub->add_option("--out", c.out, "Output directory");
  if (needs_out) out->required();
  sub->add_option("--threads", c.threads, "Worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
  if (stochastic) c.seed_opt = sub->add_option("--seed", c.seed, "Random seed (generated when omitted)");
}

// Resolves the seed and thread count before a command runs.
void prepare(Common& c) {
  if (c.threads > 0) omp_set_num_threads(c.threads);
  if (c.seed_opt && c.seed_opt->count() == 0) {
    c.seed = fresh_seed();
    std::cout << "seed: " << c.seed << '\n';
  }
  if (!c.out.empty()) fs::create_directories(c.out);
}

// Resolved configuration with the effective seed, loadable through --config.
std::string resolved_config(const Common& c) {
  std::istringstream in(c.app->config_to_str(true, false));
  std::ostringstream out;
  out << '[' << c.app->get_name() << "]\n";
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("seed=", 0) == 0 || line.rfind("out=", 0) == 0 || line.rfind("config=", 0) == 0) continue;
    // Unset options would come back as empty strings and fail their checks.
    if (line.ends_with("=\"\"") || line.ends_with("=[]")) continue;
    out << line << '\n';
  }
  if (c.seed_opt) out << "seed=" << c.seed << '\n';
  return out.str();
}

void write_manifest(const Common& c, const std::vector<std::string>& argv,
                    const std::vector<std::string>& outputs) {
  if (c.out.empty()) return;
  const std::string config = resolved_config(c);
  {
    std::ofstream f(fs::path(c.out) / "config.toml");
    if (!f) throw FormatError("cannot write config to " + c.out);
    f << config;
  }
  nlohmann::json m;
  m["command"] = c.app->get_name();
  m["arguments"] = argv;
  m["version"] = GAP_VERSION;
  m["threads"] = c.threads;
  if (c.seed_opt) m["seed"] = c.seed;
  m["config"] = config;
  m["rerun"] = "gap " + c.app->get_name() + " --config config.toml --out <dir>";
  m["outputs"] = outputs;
  std::ofstream f(fs::path(c.out) / "manifest.json");
  if (!f) throw FormatError("cannot write manifest to " + c.out);
  f << m.dump(2) << '\n';
}

std::string path_in(const Common& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

std::string numbered(const std::string& stem, std::size_t i, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%03zu", i);
  return stem + buf + ext;
}

std::vector<PhotonImage> read_photon_files(const std::vector<std::string>& paths) {
  std::vector<PhotonImage> out;
  for (const auto& p : paths) {
    auto pages = read_photon_tiff(p);
    out.insert(out.end(), std::make_move_iterator(pages.begin()), std::make_move_iterator(pages.end()));
  }
  return out;
}

Padding parse_padding(const std::string& name) {
  if (name == "zero") return Padding::zero;
  if (name == "reflect") return Padding::reflect;
  throw ConfigError("option 'padding' must be zero or reflect, got '" + name + "'");
}

// Loads one model, or builds an expert registry from several checkpoints
// whose training ranges tile the pseudo-PSNR axis.
ExpertRegistry load_experts(const std::vector<std::string>& paths) {
  if (paths.size() == 1) return ExpertRegistry::single(std::make_shared<PredictorModel>(load_model(paths[0])));
  std::vector<ExpertRegistry::Entry> entries;
  for (const auto& p : paths) {
    const auto ckpt = load_checkpoint(p);
    entries.push_back({ckpt.psnr_range.lo, ckpt.psnr_range.hi,
                       std::make_shared<PredictorModel>(ckpt.architecture, ckpt.parameters)});
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
  entries.front().lo = -std::numeric_limits<double>::infinity();
  entries.back().hi = std::numeric_limits<double>::infinity();
  return ExpertRegistry(std::move(entries));
}

struct StopRule {
  std::uint64_t photons = 0;
  double psnr_db = 0.0;
  CLI::Option* photons_opt = nullptr;
  CLI::Option* psnr_opt = nullptr;

  void add(CLI::App* sub) {
    photons_opt = sub->add_option("--target-photons", photons, "Stop once the image holds this many photons");
    psnr_opt = sub->add_option("--target-psnr", psnr_db, "Stop at this pseudo-PSNR (dB)");
    photons_opt->excludes(psnr_opt);
  }
  std::uint64_t target(std::size_t pixels) const {
    if (photons_opt->count()) return photons;
    if (psnr_opt->count()) {
      return static_cast<std::uint64_t>(std::ceil(intensity_for_pseudo_psnr(psnr_db) * static_cast<double>(pixels)));
    }
    throw ConfigError("one of --target-photons or --target-psnr is required");
  }
};

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  Common c;
  std::string signal, world = "delta";
  std::size_t rows = 32, cols = 32, count = 1;
  double psnr_db = 0.0;
};

void simulate(SimulateArgs& a, const std::vector<std::string>& argv) {
  prepare(a.c);
  Rng rng = derive_stream(a.c.seed, 0);
  std::vector<PhotonImage> noisy;
  std::vector<RealGrid> clean;
  std::vector<std::string> outputs{"noisy.tif", "clean.tif"};
  if (!a.signal.empty()) {
    const auto pages = read_tiff(a.signal);
    if (pages.size() != 1) throw FormatError(a.signal + ": expected a single-page signal");
    const auto s = normalize(pages[0]);
    const double gamma = intensity_for_pseudo_psnr(a.psnr_db);
    const RealGrid mean = scale_ground_truth(s, gamma, s.size());
    for (std::size_t i = 0; i < a.count; ++i) noisy.push_back(sample_shot_noise(mean, rng));
    clean.push_back(mean);
  } else {
    const auto world = make_synthetic_world(parse_world_kind(a.world), {a.rows, a.cols}, rng);
    for (std::size_t i = 0; i < a.count; ++i) {
      auto smp = sample_world(world, a.psnr_db, rng);
      noisy.push_back(std::move(smp.image));
      clean.push_back(std::move(smp.mean));
    }
    std::ofstream f(path_in(a.c, "prior.txt"));
    write_prior(f, world.prior);
    outputs.push_back("prior.txt");
  }
  write_tiff(path_in(a.c, "noisy.tif"), noisy);
  write_tiff(path_in(a.c, "clean.tif"), clean);
  write_manifest(a.c, argv, outputs);
  std::cout << "wrote " << noisy.size() << " noisy image(s) to " << a.c.out << '\n';
}

// ------------------------------------------------------------ prepare-data

struct PrepareArgs {
  Common c;
  std::vector<std::string> inputs;
  double bin_nm = 20.0;
  std::optional<double> thin_p;
  std::size_t sum = 1, region = 0, split_n = 0, split_offset = 0;
  std::uint64_t min_photons = 0;
};

void prepare_data(PrepareArgs& a, const std::vector<std::string>& argv) {
  prepare(a.c);
  if (a.thin_p && !(*a.thin_p >= 0.0 && *a.thin_p <= 1.0)) throw ConfigError("option 'thin' must lie in [0, 1]");
  std::vector<PhotonImage> images;
  for (const auto& p : a.inputs) {
    if (fs::path(p).extension() == ".csv") {
      const auto table = read_localizations_csv(p);
      const Extent e = table.extent ? *table.extent : covering_extent(table, a.bin_nm);
      images.push_back(bin_localizations(table, a.bin_nm, e));
    } else {
      auto pages = read_photon_tiff(p);
      images.insert(images.end(), pages.begin(), pages.end());
    }
  }
  if (images.empty()) throw EmptyDatasetError("no input images");
  if (a.sum > 1) images = sum_frames(images, a.sum);
  if (a.thin_p) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      Rng rng = derive_stream(a.c.seed, i);
      images[i] = thin(images[i], *a.thin_p, rng);
    }
  }
  if (a.region > 0) {
    std::vector<PhotonImage> tiles;
    for (const auto& img : images) {
      auto t = extract_regions(img, a.region, a.min_photons);
      tiles.insert(tiles.end(), t.begin(), t.end());
    }
    if (tiles.empty()) throw EmptyRegionError("no region holds more than the minimum photon count");
    images = std::move(tiles);
  }
  std::vector<std::string> outputs;
  if (a.split_n > 0) {
    const auto split = split_every_nth(images, a.split_n, a.split_offset);
    if (!split.train.empty()) write_tiff(path_in(a.c, "train.tif"), split.train);
    if (!split.test.empty()) write_tiff(path_in(a.c, "test.tif"), split.test);
    outputs = {"train.tif", "test.tif"};
    std::cout << split.train.size() << " train / " << split.test.size() << " test images\n";
  } else {
    write_tiff(path_in(a.c, "images.tif"), images);
    outputs = {"images.tif"};
    std::cout << images.size() << " images\n";
  }
  write_manifest(a.c, argv, outputs);
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  Common c;
  std::vector<std::string> data;
  TrainingConfig cfg;
  ArchitectureConfig arch = ArchitectureConfig::desk();
  std::string padding = "zero";
  bool no_augment = false;
};

void train_cmd(TrainArgs& a, const std::vector<std::string>& argv) {
  prepare(a.c);
  a.cfg.seed = a.c.seed;
  a.cfg.augment = !a.no_augment;
  a.arch.padding = parse_padding(a.padding);
  a.cfg.validate();
  a.arch.validate();
  const auto images = read_photon_files(a.data);
  const std::string best = path_in(a.c, "model.ckpt"), last = path_in(a.c, "last.ckpt");
  auto snapshot = [&](const TrainingState& st) {
    Checkpoint ck;
    ck.architecture = a.arch;
    ck.parameters.assign(st.model.parameters().begin(), st.model.parameters().end());
    ck.adam_m = st.optimizer.first_moment();
    ck.adam_v = st.optimizer.second_moment();
    ck.adam_step = st.optimizer.steps();
    ck.epoch = st.record.epoch;
    ck.learning_rate = st.record.learning_rate;
    ck.psnr_range = a.cfg.psnr_range;
    return ck;
  };
  const auto result = train(images, a.cfg, a.arch, [&](const TrainingState& st) {
    const auto ck = snapshot(st);
    save_checkpoint(last, ck);
    if (st.record.improved) save_checkpoint(best, ck);
    std::cout << "epoch " << st.record.epoch << "  train " << st.record.train_loss << "  val "
              << st.record.validation_loss << "  lr " << st.record.learning_rate
              << (st.record.improved ? "  *" : "") << std::endl;
  });
  write_history_csv(path_in(a.c, "history.csv"), result.history);
  write_manifest(a.c, argv, {"model.ckpt", "last.ckpt", "history.csv"});
  std::cout << "best epoch " << result.best_epoch << ", model written to " << best << '\n';
}

// ----------------------------------------------------------------- denoise

struct DenoiseArgs {
  Common c;
  std::vector<std::string> models, inputs;
};

void denoise_cmd(DenoiseArgs& a, const std::vector<std::string>& argv) {
  prepare(a.c);
  const auto experts = load_experts(a.models);
  const auto images = read_photon_files(a.inputs);
  std::vector<RealGrid> out;
  for (const auto& img : images) out.push_back(mmse_denoise(select_expert(experts, img), img));
  write_tiff(path_in(a.c, "denoised.tif"), out);
  write_manifest(a.c, argv, {"denoised.tif"});
  std::cout << "denoised " << out.size() << " image(s)\n";
}

// ------------------------------------------------------- sample / generate

struct SampleArgs {
  Common c;
  std::vector<std::string> models, inputs;
  std::size_t samples = 8;
  SamplerConfig sampler;
  StopRule stop;
  bool record = false;
};

void sample_cmd(SampleArgs& a, const std::vector<std::string>& argv) {
  prepare(a.c);
  const auto experts = load_experts(a.models);
  const auto images = read_photon_files(a.inputs);
  std::vector<std::string> outputs;
  for (std::size_t i = 0; i < images.size(); ++i) {
    SamplerConfig cfg = a.sampler;
    cfg.target_photons = a.stop.target(images[i].size());
    cfg.record_trajectory = a.record;
    std::vector<PhotonImage> results;
    for (std::size_t k = 0; k < a.samples; ++k) {
      Rng rng = derive_stream(a.c.seed, {i, k});
      auto acc = accumulate(experts, images[i], cfg, rng);
      if (a.record) {
        const auto name = numbered(numbered("trajectory", i, ""), k, ".csv");
        write_trajectory_csv(path_in(a.c, name), acc.trajectory);
        outputs.push_back(name);
      }
      results.push_back(std::move(acc.image));
    }
    const auto name = numbered("samples", i, ".tif");
    write_tiff(path_in(a.c, name), results);
    outputs.push_back(name);
  }
  write_manifest(a.c, argv, outputs);
  std::cout << "wrote " << a.samples << " sample(s) for each of " << images.size() << " input(s)\n";
}

struct GenerateArgs {
  Common c;
  std::vector<std::string> models;
  std::size_t rows = 32, cols = 32, count = 4;
  SamplerConfig sampler;
  StopRule stop;
};

void generate_cmd(GenerateArgs& a, const std::vector<std::string>& argv) {
  prepare(a.c);
  const auto experts = load_experts(a.models);
  SamplerConfig cfg = a.sampler;
  cfg.target_photons = a.stop.target(a.rows * a.cols);
  std::vector<PhotonImage> out;
  for (std::size_t i = 0; i < a.count; ++i) {
    Rng rng = derive_stream(a.c.seed, i);
    out.push_back(accumulate(experts, PhotonImage(a.rows, a.cols), cfg, rng).image);
  }
  write_tiff(path_in(a.c, "generated.tif"), out);
  write_manifest(a.c, argv, {"generated.tif"});
  std::cout << "generated " << out.size() << " image(s)\n";
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  Common c;
  std::vector<std::string> models;
  std::string input, truth;
};

void evaluate_cmd(EvaluateArgs& a, const std::vector<std::string>& argv) {
  prepare(a.c);
  const auto experts = load_experts(a.models);
  const auto noisy = read_photon_tiff(a.input);
  const auto truth = read_tiff(a.truth);
  if (truth.size() != 1 && truth.size() != noisy.size()) {
    throw ShapeError("ground truth must hold one page or one page per input image");
  }
  EvalReport report;
  report.metadata["input"] = a.input;
  report.metadata["ground_truth"] = a.truth;
  std::string models;
  for (const auto& m : a.models) models += (models.empty() ? "" : ",") + m;
  report.metadata["model"] = models;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const auto& img = noisy[i];
    const RealGrid& gt = truth.size() == 1 ? truth[0] : truth[i];
    require_same_shape(img.shape(), gt.shape(), "evaluate");
    // The clean image is compared at the photon level of the noisy input.
    const double gamma = static_cast<double>(total_photons(img)) / static_cast<double>(img.size());
    const RealGrid gt_scaled = scale_ground_truth(normalize(gt), gamma, img.size());
    report.add(numbered("image", i, ""), psnr(mmse_denoise(select_expert(experts, img), img), gt_scaled),
               image_pseudo_psnr(img));
  }
  report.write_csv(path_in(a.c, "report.csv"));
  report.write_json(path_in(a.c, "report.json"));
  write_manifest(a.c, argv, {"report.csv", "report.json"});
  std::cout << "mean PSNR " << format_db(report.mean_psnr()) << " dB over " << noisy.size() << " image(s)\n";
}

// ------------------------------------------------------------ oracle-check

struct OracleArgs {
  Common c;
  std::string prior;
  std::vector<std::uint64_t> observation;
  int trials = 100;
};

RealGrid random_grid(Shape shape, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  RealGrid g(shape);
  for (double& v : g) v = u(rng);
  return g;
}

// Largest elementwise gap between the next-photon map and the MMSE estimate
// over random priors with unit-total signals.
double mmse_identity_gap(int trials, Rng& rng) {
  double worst = 0.0;
  std::uniform_int_distribution<std::size_t> side(1, 4), support(1, 16);
  for (int t = 0; t < trials; ++t) {
    const Shape shape{side(rng), side(rng)};
    std::vector<RealGrid> signals;
    const std::size_t k = support(rng);
    std::vector<double> w;
    for (std::size_t j = 0; j < k; ++j) {
      signals.push_back(normalize(random_grid(shape, rng)).grid());
      w.push_back(std::uniform_real_distribution<double>(0.1, 1.0)(rng));
    }
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= wsum;
    const SignalPrior prior(signals, w);
    PhotonImage x(shape);
    std::uniform_int_distribution<std::uint64_t> count(0, 3);
    for (auto& v : x) v = count(rng);
    const auto next = next_photon_distribution(prior, x);
    const auto mmse = mmse_estimate(prior, x);
    for (std::size_t i = 0; i < mmse.size(); ++i) worst = std::max(worst, std::abs(next[i] - mmse[i]));
  }
  return worst;
}

// Largest relative gap between a multi-photon loss and the sum of its
// single-photon parts.
double loss_equivalence_gap(int trials, Rng& rng) {
  double worst = 0.0;
  std::uniform_int_distribution<std::size_t> side(1, 6);
  std::uniform_int_distribution<std::uint64_t> count(0, 5);
  for (int t = 0; t < trials; ++t) {
    const Shape shape{side(rng), side(rng)};
    const auto f = normalize(random_grid(shape, rng));
    PhotonImage target(shape);
    for (auto& v : target) v = count(rng);
    target[0] += 1;
    const double total = static_cast<double>(total_photons(target));
    double singles = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      PhotonImage one(shape);
      one[i] = 1;
      singles += static_cast<double>(target[i]) * gap_loss(f, one);
    }
    const double multi = gap_loss(f, target) * total;
    worst = std::max(worst, std::abs(multi - singles) / std::max(std::abs(singles), 1e-300));
  }
  return worst;
}

std::string join(std::span<const double> v) {
  std::ostringstream s;
  s.precision(12);
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
  return s.str();
}

int oracle_check(OracleArgs& a, const std::vector<std::string>& argv) {
  prepare(a.c);
  SignalPrior prior = [&] {
    if (a.prior.empty()) {
      std::istringstream in(kTwoTemplatePrior);
      return read_prior(in);
    }
    return read_prior_file(a.prior);
  }();
  PhotonImage x(prior.shape());
  if (a.observation.empty()) {
    x[0] = 1;
  } else {
    if (a.observation.size() != x.size()) throw ConfigError("option 'observation' needs one count per pixel");
    std::copy(a.observation.begin(), a.observation.end(), x.begin());
  }
  const auto post = posterior(prior, x);
  std::cout << "posterior: " << join(post.weights) << '\n';
  std::cout << "next-photon: " << join(next_photon_distribution(prior, x).values()) << '\n';
  std::cout << "mmse: " << join(mmse_estimate(prior, x).values()) << '\n';

  Rng rng = derive_stream(a.c.seed, 0);
  const double id_gap = mmse_identity_gap(a.trials, rng);
  const double loss_gap = loss_equivalence_gap(a.trials, rng);
  const bool id_ok = id_gap <= 1e-12, loss_ok = loss_gap <= 1e-9;
  std::cout << "mmse-identity: " << (id_ok ? "PASS" : "FAIL") << " (max gap " << id_gap << ")\n";
  std::cout << "loss-equivalence: " << (loss_ok ? "PASS" : "FAIL") << " (max relative gap " << loss_gap << ")\n";
  write_manifest(a.c, argv, {});
  return id_ok && loss_ok ? 0 : 1;
}

}  // namespace

int run(int argc, const char* const* argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Photon-accumulation denoising and generation", "gap"};
  app.require_subcommand(1);
  app.set_version_flag("--version", GAP_VERSION);
  // Sections such as [train] hold the options of each subcommand. Falling
  // through lets `gap train --config run.toml` reach this option.
  app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
  app.fallthrough();

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Sample shot-noise images from a signal TIFF or a synthetic world");
  add_common(s, sim.c, true);
  auto* sig = s->add_option("--signal", sim.signal, "Single-page signal TIFF")->check(CLI::ExistingFile);
  s->add_option("--world", sim.world, "Synthetic world: delta, two-template or blob-field")->excludes(sig);
  s->add_option("--rows", sim.rows, "World height")->check(CLI::PositiveNumber);
  s->add_option("--cols", sim.cols, "World width")->check(CLI::PositiveNumber);
  s->add_option("--count", sim.count, "Number of images")->check(CLI::PositiveNumber);
  s->add_option("--psnr", sim.psnr_db, "Pseudo-PSNR of the images (dB)")->required();

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare-data", "Bin, sum, thin, tile and split raw data");
  add_common(p, prep.c, true);
  p->add_option("--input", prep.inputs, "TIFF stacks or localization CSV tables")->required()->check(CLI::ExistingFile);
  p->add_option("--bin-nm", prep.bin_nm, "Histogram bin size for localization tables")->check(CLI::PositiveNumber);
  p->add_option("--sum", prep.sum, "Sum groups of this many frames")->check(CLI::PositiveNumber);
  p->add_option("--thin", prep.thin_p, "Keep each photon with this probability");
  p->add_option("--region", prep.region, "Cut images into square tiles of this size");
  p->add_option("--min-photons", prep.min_photons, "Drop tiles with at most this many photons");
  p->add_option("--split-every", prep.split_n, "Every n-th image goes to the test set (0 = no split)");
  p->add_option("--split-offset", prep.split_offset, "Index of the first test image");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a next-photon predictor");
  add_common(t, tr.c, true);
  t->add_option("--data", tr.data, "Training image stacks (TIFF)")->required()->check(CLI::ExistingFile);
  t->add_option("--psnr-lo", tr.cfg.psnr_range.lo, "Lower pseudo-PSNR of training inputs (dB)");
  t->add_option("--psnr-hi", tr.cfg.psnr_range.hi, "Upper pseudo-PSNR of training inputs (dB)");
  t->add_option("--patch-size", tr.cfg.patch_size, "Square training crop");
  t->add_option("--batch-size", tr.cfg.batch_size);
  t->add_option("--epochs", tr.cfg.epochs);
  t->add_option("--steps-per-epoch", tr.cfg.steps_per_epoch);
  t->add_option("--learning-rate", tr.cfg.initial_learning_rate);
  t->add_option("--patience", tr.cfg.plateau_patience, "Epochs without improvement before the rate drops");
  t->add_option("--factor", tr.cfg.plateau_factor, "Learning-rate divisor on a plateau");
  t->add_option("--validation-fraction", tr.cfg.validation_fraction);
  t->add_option("--validation-pairs", tr.cfg.validation_pairs_per_image);
  t->add_option("--time-limit", tr.cfg.time_limit_seconds, "Stop after the epoch exceeding this many seconds");
  t->add_flag("--no-augment", tr.no_augment, "Disable random flips and transposes");
  t->add_option("--levels", tr.arch.levels);
  t->add_option("--base-channels", tr.arch.base_channels);
  t->add_option("--frequencies", tr.arch.encoding_frequencies, "Input encoding frequencies");
  t->add_option("--padding", tr.padding, "zero or reflect");

  DenoiseArgs den;
  auto* d = app.add_subcommand("denoise", "MMSE-denoise photon images");
  add_common(d, den.c, false);
  d->add_option("--model", den.models, "Checkpoint(s); several form an expert registry")->required()->check(CLI::ExistingFile);
  d->add_option("--input", den.inputs, "Photon image TIFFs")->required()->check(CLI::ExistingFile);

  SampleArgs smp;
  auto* sa = app.add_subcommand("sample", "Diversity denoising by photon accumulation");
  add_common(sa, smp.c, true);
  sa->add_option("--model", smp.models, "Checkpoint(s)")->required()->check(CLI::ExistingFile);
  sa->add_option("--input", smp.inputs, "Photon image TIFFs")->required()->check(CLI::ExistingFile);
  sa->add_option("--samples", smp.samples, "Samples per input")->check(CLI::PositiveNumber);
  sa->add_option("--beta", smp.sampler.beta, "Photons added per step, relative to the current count");
  sa->add_flag("--record", smp.record, "Write per-step trajectory CSVs");
  smp.stop.add(sa);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate images from an empty canvas");
  add_common(g, gen.c, true);
  g->add_option("--model", gen.models, "Checkpoint(s)")->required()->check(CLI::ExistingFile);
  g->add_option("--rows", gen.rows)->check(CLI::PositiveNumber);
  g->add_option("--cols", gen.cols)->check(CLI::PositiveNumber);
  g->add_option("--count", gen.count, "Number of images")->check(CLI::PositiveNumber);
  g->add_option("--beta", gen.sampler.beta);
  gen.stop.add(g);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "PSNR report of MMSE denoising against ground truth");
  add_common(e, ev.c, false);
  e->add_option("--model", ev.models, "Checkpoint(s)")->required()->check(CLI::ExistingFile);
  e->add_option("--input", ev.input, "Noisy photon image stack")->required()->check(CLI::ExistingFile);
  e->add_option("--ground-truth", ev.truth, "Clean images, one page or one per input")->required()->check(CLI::ExistingFile);

  OracleArgs orc;
  auto* o = app.add_subcommand("oracle-check", "Exact-oracle fixture and identity checks");
  add_common(o, orc.c, true, false);
  o->add_option("--prior", orc.prior, "Prior fixture (default: two-template example)")->check(CLI::ExistingFile);
  o->add_option("--observation", orc.observation, "Photon counts, one per pixel")->delimiter(',');
  o->add_option("--trials", orc.trials, "Random fixtures per identity check")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : 2;
  }

  try {
    if (*s) simulate(sim, args);
    if (*p) prepare_data(prep, args);
    if (*t) train_cmd(tr, args);
    if (*d) denoise_cmd(den, args);
    if (*sa) sample_cmd(smp, args);
    if (*g) generate_cmd(gen, args);
    if (*e) evaluate_cmd(ev, args);
    if (*o) return oracle_check(orc, args);
    return 0;
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const Error& err) {
    std::cerr << "error (" << err.kind() << "): " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
}

}  // namespace gap::cli
