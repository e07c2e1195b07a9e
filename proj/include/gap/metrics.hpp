#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "gap/core.hpp"

namespace gap {

// gamma * n * s.
RealGrid scale_ground_truth(const NormalizedDistribution& s, double gamma, std::size_t n);

// 10 log10(max(gt)^2 / MSE). Returns +infinity when est == gt.
double psnr(const RealGrid& est, const RealGrid& gt);

// PSNR of a whole set: mean squared peak over the pooled MSE. Unlike the mean
// of per-image values it stays finite when a single image is matched exactly.
double pooled_psnr(std::span<const RealGrid> est, std::span<const RealGrid> gt);

// pseudo_psnr of the mean photon count per pixel.
double image_pseudo_psnr(const PhotonImage& img);

// Text form of a dB value; infinities become "+inf" / "-inf".
std::string format_db(double db);

struct SampleStatistics {
  // Per-image mean photon counts.
  std::vector<double> sample_means, reference_means;
  // Radially averaged power spectra (mean over images), one value per
  // integer frequency radius.
  std::vector<double> sample_spectrum, reference_spectrum;
  double mean_intensity_w1 = 0.0;  // Wasserstein-1 between the mean lists
  double spectrum_l1 = 0.0;        // sum |a - b| / sum b over radii
  double mean_image_l1 = 0.0;      // mean |avg sample - avg reference| per pixel
};

// All aggregates are order-invariant: permuting either list gives bit-identical
// statistics. Lists must be nonempty and share one image shape.
SampleStatistics sample_statistics(std::span<const PhotonImage> samples,
                                   std::span<const PhotonImage> reference);

struct EvalReport {
  std::vector<std::string> names;
  std::vector<double> psnr;
  std::vector<double> input_pseudo_psnr;
  std::map<std::string, std::string> metadata;

  void add(std::string name, double psnr_db, double input_db);
  // Arithmetic mean of psnr (+inf if any entry is +inf).
  double mean_psnr() const;
  void write_csv(const std::string& path) const;
  void write_json(const std::string& path) const;
};

}  // namespace gap
