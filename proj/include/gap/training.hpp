#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gap/model.hpp"
#include "gap/noise.hpp"
#include "gap/predictor.hpp"

namespace gap {

struct TrainingConfig {
  PsnrRange psnr_range{-40.0, -5.0};
  std::size_t patch_size = 256;
  std::size_t batch_size = 32;
  int epochs = 100;
  int steps_per_epoch = 500;
  double initial_learning_rate = 1e-4;
  int plateau_patience = 10;
  double plateau_factor = 2.0;
  double validation_fraction = 0.1;
  // Fixed split pairs drawn per validation image.
  int validation_pairs_per_image = 4;
  // Stop after the first epoch that ends past this wall-clock budget; 0 = none.
  double time_limit_seconds = 0.0;
  // Random dihedral variant per patch. Turn off for worlds without that symmetry.
  bool augment = true;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Random patch crop (retried while empty), random split probability from the
// pseudo-PSNR range, binomial split.
SplitPair make_training_pair(const PhotonImage& img, const TrainingConfig& cfg, Rng& rng);

// Dihedral group element: bit 2 transposes, then bit 0 flips rows and bit 1
// flips columns. Variant 0 is the identity.
PhotonImage augment(const PhotonImage& img, int variant);

// Mean gap_loss over validation pairs whose randomness is keyed by (seed,
// image content, pair index), so the value is comparable across epochs and
// independent of image order.
double validate(const Predictor& model, std::span<const PhotonImage> images,
                const TrainingConfig& cfg, std::uint64_t seed);

class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Adam() = default;
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}
  Adam(std::vector<double> m, std::vector<double> v, std::int64_t step);

  void step(std::span<double> theta, std::span<const double> grad, double lr);

  const std::vector<double>& first_moment() const noexcept { return m_; }
  const std::vector<double>& second_moment() const noexcept { return v_; }
  std::int64_t steps() const noexcept { return t_; }

 private:
  std::vector<double> m_, v_;
  std::int64_t t_ = 0;
};

// Reduce-on-plateau: after more than `patience` epochs without a new best
// (strictly lower) metric the rate is divided by `factor`. Validation pairs are
// fixed, so any decrease is a real improvement on that set.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, int patience, double factor);
  // Returns true when this observation reduced the learning rate.
  bool observe(double metric);
  double learning_rate() const noexcept { return lr_; }

 private:
  double lr_, factor_;
  int patience_;
  int bad_epochs_ = 0;
  double best_;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double learning_rate = 0.0;
  bool improved = false;
};

struct TrainingState {
  const PredictorModel& model;
  const Adam& optimizer;
  const EpochRecord& record;
};

using EpochCallback = std::function<void(const TrainingState&)>;

struct TrainingResult {
  PredictorModel model;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

// First (1 - validation_fraction) of the images train, the rest validate.
// Throws EmptyDatasetError with fewer than two images and DivergenceError on a
// non-finite loss or gradient.
TrainingResult train(std::span<const PhotonImage> images, const TrainingConfig& cfg,
                     const ArchitectureConfig& arch, const EpochCallback& on_epoch = {});

// Writes epoch,train_loss,validation_loss,learning_rate rows.
void write_history_csv(const std::string& path, std::span<const EpochRecord> history);

}  // namespace gap
