#pragma once

#include "gap/core.hpp"
#include "gap/rng.hpp"

namespace gap {

// Binomial split of one photon image: input + target == source pixelwise.
struct SplitPair {
  PhotonImage input;
  PhotonImage target;
  double p = 0.0;
};

// Closed interval of pseudo-PSNR values in dB.
struct PsnrRange {
  double lo = 0.0;
  double hi = 0.0;

  PsnrRange() = default;
  PsnrRange(double lo_db, double hi_db);
};

// Largest split probability handed out, so that at least 1% of the photons
// land in the target on average.
inline constexpr double kMaxSplitProbability = 0.99;

std::uint64_t sample_poisson(double mean, Rng& rng);
std::uint64_t sample_binomial(std::uint64_t trials, double p, Rng& rng);

// Independent Poisson draw per pixel. Throws InvalidSignalError for a negative
// or non-finite mean.
PhotonImage sample_shot_noise(const RealGrid& signal, Rng& rng);

// input_i ~ Binomial(x_i, p), target = img - input.
SplitPair binomial_split(const PhotonImage& img, double p, Rng& rng);

// 10 log10(gamma) for an intensity gamma in photons per pixel.
double pseudo_psnr(double intensity);
double intensity_for_pseudo_psnr(double db);

// Draws a pseudo-PSNR uniformly from range and returns the split probability
// that gives the input that intensity, clipped to kMaxSplitProbability.
double sample_split_probability(const PhotonImage& img, const PsnrRange& range, Rng& rng);

}  // namespace gap
