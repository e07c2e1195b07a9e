#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "gap/core.hpp"
#include "gap/predictor.hpp"
#include "gap/rng.hpp"

namespace gap {

struct SamplerConfig {
  double beta = 0.10;
  std::uint64_t target_photons = 1;
  bool record_trajectory = false;
  // Caps the step that would cross the target at the photons still missing,
  // so runs end close to target_photons instead of up to beta past it.
  bool truncate_final_step = true;
  // Scale lambda by the pixel count n as well.
  bool literal_lambda = false;
  // Debug mode: every step places exactly one photon drawn from the prediction.
  bool single_photon = false;

  void validate() const;
};

// predict(img) scaled by the photon count of img.
RealGrid mmse_denoise(const Predictor& model, const PhotonImage& img);

// Expected number of photons the next step adds to an image holding `total`.
double step_size(std::uint64_t total, const SamplerConfig& cfg);

// One accumulation step: img + Poisson(lambda) with lambda = s * alpha.
PhotonImage gap_step(const Predictor& model, const PhotonImage& img, const SamplerConfig& cfg,
                     Rng& rng);

// Pseudo-PSNR dispatch over half-open ranges [lo, hi). The ranges must be
// sorted and contiguous; an empty image maps to the lowest range.
class ExpertRegistry {
 public:
  struct Entry {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    std::shared_ptr<const Predictor> model;
  };

  ExpertRegistry() = default;
  // Throws RegistryCoverageError if ranges overlap or leave gaps.
  explicit ExpertRegistry(std::vector<Entry> entries);
  // Registry with a single model covering everything.
  static ExpertRegistry single(std::shared_ptr<const Predictor> model);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t index_for(const PhotonImage& img) const;

 private:
  std::vector<Entry> entries_;
};

const Predictor& select_expert(const ExpertRegistry& registry, const PhotonImage& img);

struct Accumulation {
  PhotonImage image;
  // Start image followed by the image after every step, when recorded.
  std::vector<PhotonImage> trajectory;
  int steps = 0;
};

// Repeats gap_step until the image holds at least cfg.target_photons.
Accumulation accumulate(const Predictor& model, const PhotonImage& start,
                        const SamplerConfig& cfg, Rng& rng);
Accumulation accumulate(const ExpertRegistry& registry, const PhotonImage& start,
                        const SamplerConfig& cfg, Rng& rng);

// step,total_photons,pseudo_psnr rows for a recorded trajectory.
void write_trajectory_csv(const std::string& path, const std::vector<PhotonImage>& trajectory);

}  // namespace gap
