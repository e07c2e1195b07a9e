#include "gap/core.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace gap {

NormalizedDistribution::NormalizedDistribution(RealGrid probs)
    : probs_(std::move(probs)) {
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidSignalError("probability map has a negative or non-finite entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw InvalidSignalError("probability map sums to " + std::to_string(total) +
                             ", expected 1");
  }
}

std::uint64_t total_photons(const PhotonImage& img) {
  return std::accumulate(img.begin(), img.end(), std::uint64_t{0});
}

NormalizedDistribution normalize(const PhotonImage& img) {
  const std::uint64_t total = total_photons(img);
  if (total == 0) {
    throw ZeroPhotonError("cannot normalize an image without photons");
  }
  RealGrid probs(img.shape());
  const double denom = static_cast<double>(total);
  for (std::size_t i = 0; i < img.size(); ++i) {
    probs[i] = static_cast<double>(img[i]) / denom;
  }
  return NormalizedDistribution(std::move(probs));
}

NormalizedDistribution normalize(const RealGrid& signal) {
  double total = 0.0;
  for (double s : signal) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw InvalidSignalError("signal has a negative or non-finite entry");
    }
    total += s;
  }
  if (!(total > 0.0)) {
    throw InvalidSignalError("signal has zero total intensity");
  }
  RealGrid probs(signal.shape());
  for (std::size_t i = 0; i < signal.size(); ++i) probs[i] = signal[i] / total;
  return NormalizedDistribution(std::move(probs));
}

PhotonImage from_photon_sequence(const PhotonSequence& seq) {
  PhotonImage img(seq.shape);
  for (std::size_t pos : seq.positions) {
    if (pos >= img.size()) {
      throw IndexError("photon position " + std::to_string(pos) +
                       " outside image of " + std::to_string(img.size()) + " pixels");
    }
    ++img[pos];
  }
  return img;
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": shape " + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + " does not match " +
                     std::to_string(b.rows) + "x" + std::to_string(b.cols));
  }
}

PhotonImage add(const PhotonImage& a, const PhotonImage& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  PhotonImage out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

PhotonImage subtract(const PhotonImage& a, const PhotonImage& b) {
  require_same_shape(a.shape(), b.shape(), "subtract");
  PhotonImage out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i] > a[i]) throw RangeError("subtraction would produce negative counts");
    out[i] = a[i] - b[i];
  }
  return out;
}

RealGrid to_real(const PhotonImage& img) {
  RealGrid out(img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = static_cast<double>(img[i]);
  return out;
}

double sum(const RealGrid& g) { return std::accumulate(g.begin(), g.end(), 0.0); }

double mean(const RealGrid& g) {
  return g.empty() ? 0.0 : sum(g) / static_cast<double>(g.size());
}

}  // namespace gap
