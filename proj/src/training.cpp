#include "gap/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "gap/error.hpp"

namespace gap {
namespace {

constexpr int kMaxCropAttempts = 100;

// Stream ids kept apart so training, validation and init never share draws.
enum StreamTag : std::uint64_t { kInitStream = 1, kBatchStream = 2, kValidationStream = 3 };

std::uint64_t content_hash(const PhotonImage& img) {
  std::uint64_t h = splitmix64(img.shape().rows) ^ splitmix64(img.shape().cols + 1);
  for (std::uint64_t v : img) h = splitmix64(h ^ v);
  return h;
}

PhotonImage crop(const PhotonImage& img, std::size_t r0, std::size_t c0, std::size_t size) {
  PhotonImage out(size, size);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) out(r, c) = img(r0 + r, c0 + c);
  }
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void TrainingConfig::validate() const {
  auto need = [](bool ok, const char* field) {
    if (!ok) throw ConfigError(std::string("invalid training config field '") + field + "'");
  };
  need(psnr_range.lo <= psnr_range.hi, "psnr_range");
  need(patch_size > 0, "patch_size");
  need(batch_size > 0, "batch_size");
  need(epochs > 0, "epochs");
  need(steps_per_epoch > 0, "steps_per_epoch");
  need(initial_learning_rate > 0.0 && std::isfinite(initial_learning_rate), "initial_learning_rate");
  need(plateau_patience > 0, "plateau_patience");
  need(plateau_factor > 1.0, "plateau_factor");
  need(validation_fraction > 0.0 && validation_fraction < 1.0, "validation_fraction");
  need(validation_pairs_per_image > 0, "validation_pairs_per_image");
  need(time_limit_seconds >= 0.0, "time_limit_seconds");
}

SplitPair make_training_pair(const PhotonImage& img, const TrainingConfig& cfg, Rng& rng) {
  const std::size_t size = cfg.patch_size;
  const Shape s = img.shape();
  if (s.rows < size || s.cols < size) throw ShapeError("image smaller than the training patch");
  std::uniform_int_distribution<std::size_t> row(0, s.rows - size), col(0, s.cols - size);
  for (int attempt = 0; attempt < kMaxCropAttempts; ++attempt) {
    const std::size_t r0 = row(rng), c0 = col(rng);
    PhotonImage patch = crop(img, r0, c0, size);
    if (total_photons(patch) == 0) continue;
    const double p = sample_split_probability(patch, cfg.psnr_range, rng);
    return binomial_split(patch, p, rng);
  }
  throw EmptyRegionError("no non-empty patch found after 100 crops");
}

PhotonImage augment(const PhotonImage& img, int variant) {
  if (variant < 0 || variant > 7) throw RangeError("augmentation variant must be in 0..7");
  const bool transpose = variant & 4, flip_rows = variant & 1, flip_cols = variant & 2;
  const Shape in = img.shape();
  const Shape out_shape = transpose ? Shape{in.cols, in.rows} : in;
  PhotonImage out(out_shape);
  for (std::size_t r = 0; r < out_shape.rows; ++r) {
    for (std::size_t c = 0; c < out_shape.cols; ++c) {
      const std::size_t rr = flip_rows ? out_shape.rows - 1 - r : r;
      const std::size_t cc = flip_cols ? out_shape.cols - 1 - c : c;
      out(r, c) = transpose ? img(cc, rr) : img(rr, cc);
    }
  }
  return out;
}

double validate(const Predictor& model, std::span<const PhotonImage> images,
                const TrainingConfig& cfg, std::uint64_t seed) {
  if (images.empty()) throw EmptyDatasetError("no validation images");
  const int per = cfg.validation_pairs_per_image;
  const std::size_t count = images.size() * static_cast<std::size_t>(per);
  std::vector<double> losses(count, 0.0);
  std::vector<int> failed(count, 0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < count; ++k) {
    try {
      const PhotonImage& img = images[k / per];
      Rng rng = derive_stream(seed, {kValidationStream, content_hash(img), k % per});
      const SplitPair pair = make_training_pair(img, cfg, rng);
      losses[k] = gap_loss(model.predict(pair.input), pair.target);
    } catch (...) {
      failed[k] = 1;
    }
  }
  for (std::size_t k = 0; k < count; ++k) {
    if (!failed[k]) continue;
    const PhotonImage& img = images[k / per];
    Rng rng = derive_stream(seed, {kValidationStream, content_hash(img), k % per});
    const SplitPair pair = make_training_pair(img, cfg, rng);
    gap_loss(model.predict(pair.input), pair.target);
  }
  // Sorting makes the floating-point sum independent of image order.
  std::sort(losses.begin(), losses.end());
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(count);
}

Adam::Adam(std::vector<double> m, std::vector<double> v, std::int64_t step)
    : m_(std::move(m)), v_(std::move(v)), t_(step) {
  if (m_.size() != v_.size() || step < 0) throw ShapeError("inconsistent optimizer state");
}

void Adam::step(std::span<double> theta, std::span<const double> grad, double lr) {
  if (theta.size() != m_.size() || grad.size() != m_.size()) {
    throw ShapeError("optimizer state does not match the parameter count");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    theta[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEpsilon);
  }
}

PlateauScheduler::PlateauScheduler(double lr, int patience, double factor)
    : lr_(lr), factor_(factor), patience_(patience),
      best_(std::numeric_limits<double>::infinity()) {}

bool PlateauScheduler::observe(double metric) {
  if (metric < best_) {
    best_ = metric;
    bad_epochs_ = 0;
    return false;
  }
  if (++bad_epochs_ > patience_) {
    lr_ /= factor_;
    bad_epochs_ = 0;
    return true;
  }
  return false;
}

TrainingResult train(std::span<const PhotonImage> images, const TrainingConfig& cfg,
                     const ArchitectureConfig& arch, const EpochCallback& on_epoch) {
  cfg.validate();
  arch.validate();
  if (images.size() < 2) throw EmptyDatasetError("training needs at least two images");
  if (cfg.patch_size % arch.size_multiple() != 0) {
    throw ConfigError("patch_size must be a multiple of 2^(levels-1)");
  }
  const auto n = static_cast<std::ptrdiff_t>(images.size());
  const auto n_val = std::clamp<std::ptrdiff_t>(
      std::llround(static_cast<double>(n) * cfg.validation_fraction), 1, n - 1);
  const auto train_set = images.first(static_cast<std::size_t>(n - n_val));
  const auto val_set = images.last(static_cast<std::size_t>(n_val));

  PredictorModel model(arch, splitmix64(cfg.seed ^ kInitStream));
  Adam adam(model.parameter_count());
  PlateauScheduler scheduler(cfg.initial_learning_rate, cfg.plateau_patience, cfg.plateau_factor);
  std::vector<double> best_params(model.parameters().begin(), model.parameters().end());
  double best_val = std::numeric_limits<double>::infinity();
  TrainingResult result{model, {}, 0};

  const auto start = std::chrono::steady_clock::now();
  const std::size_t batch = cfg.batch_size;
  std::vector<SplitPair> pairs(batch);
  std::vector<double> grad(model.parameter_count());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int s = 0; s < cfg.steps_per_epoch; ++s) {
      const auto global_step = static_cast<long long>(epoch) * cfg.steps_per_epoch + s;
      std::vector<int> failed(batch, 0);
#pragma omp parallel for schedule(dynamic)
      for (std::size_t k = 0; k < batch; ++k) {
        try {
          Rng rng = derive_stream(cfg.seed, {kBatchStream, static_cast<std::uint64_t>(global_step), k});
          std::uniform_int_distribution<std::size_t> pick(0, train_set.size() - 1);
          auto pair = make_training_pair(train_set[pick(rng)], cfg, rng);
          if (cfg.augment) {
            const int v = std::uniform_int_distribution<int>(0, 7)(rng);
            pair = {augment(pair.input, v), augment(pair.target, v), pair.p};
          }
          pairs[k] = std::move(pair);
        } catch (...) {
          failed[k] = 1;
        }
      }
      for (std::size_t k = 0; k < batch; ++k) {
        if (!failed[k]) continue;
        Rng rng = derive_stream(cfg.seed, {kBatchStream, static_cast<std::uint64_t>(global_step), k});
        std::uniform_int_distribution<std::size_t> pick(0, train_set.size() - 1);
        make_training_pair(train_set[pick(rng)], cfg, rng);
      }
      BatchGradient g = batch_loss_gradient(model, pairs);
      const double scale = 1.0 / static_cast<double>(batch);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = g.grad_sum[i] * scale;
      const double loss = g.loss_sum * scale;
      if (!std::isfinite(loss) || !all_finite(grad)) {
        throw DivergenceError("non-finite loss or gradient", global_step);
      }
      adam.step(model.parameters(), grad, scheduler.learning_rate());
      epoch_loss += loss;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_loss / cfg.steps_per_epoch;
    record.learning_rate = scheduler.learning_rate();
    record.validation_loss = validate(model, val_set, cfg, cfg.seed);
    if (!std::isfinite(record.validation_loss)) {
      throw DivergenceError("non-finite validation loss",
                            static_cast<long long>(epoch + 1) * cfg.steps_per_epoch - 1);
    }
    if (record.validation_loss < best_val) {
      best_val = record.validation_loss;
      std::copy(model.parameters().begin(), model.parameters().end(), best_params.begin());
      result.best_epoch = epoch;
      record.improved = true;
    }
    scheduler.observe(record.validation_loss);
    result.history.push_back(record);
    if (on_epoch) on_epoch(TrainingState{model, adam, record});

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cfg.time_limit_seconds > 0.0 && elapsed > cfg.time_limit_seconds) break;
  }
  result.model = PredictorModel(arch, std::move(best_params));
  return result;
}

void write_history_csv(const std::string& path, std::span<const EpochRecord> history) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out.precision(17);
  out << "epoch,train_loss,validation_loss,learning_rate\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.validation_loss << ',' << r.learning_rate
        << '\n';
  }
}

}  // namespace gap
