#include "gap/noise.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gap {

PsnrRange::PsnrRange(double lo_db, double hi_db) : lo(lo_db), hi(hi_db) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
    throw RangeError("pseudo-PSNR range requires lo <= hi");
  }
}

std::uint64_t sample_poisson(double mean, Rng& rng) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw InvalidSignalError("Poisson mean must be finite and non-negative, got " +
                             std::to_string(mean));
  }
  if (mean == 0.0) return 0;
  // libstdc++ uses inversion for small means and rejection for large ones.
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(rng);
}

std::uint64_t sample_binomial(std::uint64_t trials, double p, Rng& rng) {
  if (trials == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  std::binomial_distribution<std::uint64_t> dist(trials, p);
  return dist(rng);
}

PhotonImage sample_shot_noise(const RealGrid& signal, Rng& rng) {
  for (double s : signal) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw InvalidSignalError("shot-noise signal must be finite and non-negative");
    }
  }
  PhotonImage img(signal.shape());
  for (std::size_t i = 0; i < signal.size(); ++i) img[i] = sample_poisson(signal[i], rng);
  return img;
}

SplitPair binomial_split(const PhotonImage& img, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidProbabilityError("split probability must lie in [0, 1], got " +
                                  std::to_string(p));
  }
  SplitPair pair{PhotonImage(img.shape()), PhotonImage(img.shape()), p};
  for (std::size_t i = 0; i < img.size(); ++i) {
    const std::uint64_t kept = sample_binomial(img[i], p, rng);
    pair.input[i] = kept;
    pair.target[i] = img[i] - kept;
  }
  return pair;
}

double pseudo_psnr(double intensity) {
  if (!(intensity > 0.0)) {
    throw InvalidIntensityError("pseudo-PSNR needs a positive intensity, got " +
                                std::to_string(intensity));
  }
  return 10.0 * std::log10(intensity);
}

double intensity_for_pseudo_psnr(double db) { return std::pow(10.0, db / 10.0); }

double sample_split_probability(const PhotonImage& img, const PsnrRange& range, Rng& rng) {
  const std::uint64_t total = total_photons(img);
  if (total == 0) throw ZeroPhotonError("cannot pick a split probability for an empty image");
  std::uniform_real_distribution<double> uniform(range.lo, range.hi);
  const double db = range.lo == range.hi ? range.lo : uniform(rng);
  const double gamma = intensity_for_pseudo_psnr(db);
  const double p = gamma * static_cast<double>(img.size()) / static_cast<double>(total);
  return std::clamp(p, 0.0, kMaxSplitProbability);
}

}  // namespace gap
