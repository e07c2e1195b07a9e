#include "gap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fftw3.h>
#include <json.hpp>

#include "gap/error.hpp"
#include "gap/noise.hpp"

namespace gap {
namespace {

double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// W1 between two empirical distributions: integral of |F_a - F_b|.
double wasserstein1(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> all(a);
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  double w = 0.0;
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k + 1 < all.size(); ++k) {
    while (ia < a.size() && a[ia] <= all[k]) ++ia;
    while (ib < b.size() && b[ib] <= all[k]) ++ib;
    const double fa = static_cast<double>(ia) / a.size(), fb = static_cast<double>(ib) / b.size();
    w += std::abs(fa - fb) * (all[k + 1] - all[k]);
  }
  return w;
}

class Spectrum {
 public:
  explicit Spectrum(Shape shape)
      : shape_(shape),
        in_(fftw_alloc_complex(shape.size())),
        out_(fftw_alloc_complex(shape.size())),
        plan_(fftw_plan_dft_2d(static_cast<int>(shape.rows), static_cast<int>(shape.cols), in_, out_,
                               FFTW_FORWARD, FFTW_ESTIMATE)) {}
  ~Spectrum() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  Spectrum(const Spectrum&) = delete;
  Spectrum& operator=(const Spectrum&) = delete;

  std::size_t radii() const {
    const double r = std::hypot(shape_.rows / 2.0, shape_.cols / 2.0);
    return static_cast<std::size_t>(r) + 1;
  }

  // Power per integer radius (mean over the frequencies in each ring).
  std::vector<double> radial_power(const PhotonImage& img) {
    for (std::size_t i = 0; i < img.size(); ++i) {
      in_[i][0] = static_cast<double>(img[i]);
      in_[i][1] = 0.0;
    }
    fftw_execute(plan_);
    std::vector<double> power(radii(), 0.0);
    std::vector<double> count(radii(), 0.0);
    for (std::size_t r = 0; r < shape_.rows; ++r) {
      const double fr = r <= shape_.rows / 2 ? double(r) : double(r) - shape_.rows;
      for (std::size_t c = 0; c < shape_.cols; ++c) {
        const double fc = c <= shape_.cols / 2 ? double(c) : double(c) - shape_.cols;
        const auto bin = static_cast<std::size_t>(std::lround(std::hypot(fr, fc)));
        const auto& z = out_[r * shape_.cols + c];
        power[bin] += z[0] * z[0] + z[1] * z[1];
        count[bin] += 1.0;
      }
    }
    for (std::size_t b = 0; b < power.size(); ++b) {
      if (count[b] > 0) power[b] /= count[b];
    }
    return power;
  }

 private:
  Shape shape_;
  fftw_complex* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

std::vector<double> mean_spectrum(std::span<const PhotonImage> images, Spectrum& fft) {
  std::vector<std::vector<double>> per_bin(fft.radii());
  for (const auto& img : images) {
    const auto p = fft.radial_power(img);
    for (std::size_t b = 0; b < p.size(); ++b) per_bin[b].push_back(p[b]);
  }
  std::vector<double> out(per_bin.size());
  for (std::size_t b = 0; b < out.size(); ++b) out[b] = sorted_sum(per_bin[b]) / images.size();
  return out;
}

// Finite values stay numbers; infinities use the "+inf" / "-inf" sentinels.
nlohmann::json json_db(double db) {
  if (std::isfinite(db)) return db;
  return format_db(db);
}

}  // namespace

RealGrid scale_ground_truth(const NormalizedDistribution& s, double gamma, std::size_t n) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidIntensityError("gamma must be positive");
  RealGrid out = s.grid();
  const double scale = gamma * static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

double psnr(const RealGrid& est, const RealGrid& gt) {
  require_same_shape(est.shape(), gt.shape(), "psnr");
  double max = -std::numeric_limits<double>::infinity();
  for (double v : gt) max = std::max(max, v);
  if (!(max > 0.0)) throw InvalidGroundTruthError("ground truth needs a positive maximum");
  double se = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double d = est[i] - gt[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(gt.size());
  return 10.0 * std::log10(max * max / mse);
}

double pooled_psnr(std::span<const RealGrid> est, std::span<const RealGrid> gt) {
  if (est.size() != gt.size()) throw ShapeError("pooled_psnr needs one estimate per ground truth");
  if (gt.empty()) throw EmptyDatasetError("pooled_psnr of an empty set");
  double peak = 0.0, se = 0.0, pixels = 0.0;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    require_same_shape(est[k].shape(), gt[k].shape(), "pooled_psnr");
    double max = -std::numeric_limits<double>::infinity();
    for (double v : gt[k]) max = std::max(max, v);
    if (!(max > 0.0)) throw InvalidGroundTruthError("ground truth needs a positive maximum");
    peak += max * max;
    for (std::size_t i = 0; i < gt[k].size(); ++i) {
      const double d = est[k][i] - gt[k][i];
      se += d * d;
    }
    pixels += static_cast<double>(gt[k].size());
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10((peak / static_cast<double>(gt.size())) / (se / pixels));
}

double image_pseudo_psnr(const PhotonImage& img) {
  const auto total = total_photons(img);
  if (total == 0) throw ZeroPhotonError("pseudo-PSNR of an empty image");
  return pseudo_psnr(static_cast<double>(total) / static_cast<double>(img.size()));
}

std::string format_db(double db) {
  if (std::isinf(db)) return db > 0 ? "+inf" : "-inf";
  std::ostringstream s;
  s.precision(10);
  s << db;
  return s.str();
}

SampleStatistics sample_statistics(std::span<const PhotonImage> samples,
                                   std::span<const PhotonImage> reference) {
  if (samples.empty() || reference.empty()) throw EmptyDatasetError("sample statistics need nonempty lists");
  const Shape shape = samples.front().shape();
  for (const auto& img : samples) require_same_shape(img.shape(), shape, "sample_statistics");
  for (const auto& img : reference) require_same_shape(img.shape(), shape, "sample_statistics");
  const double n = static_cast<double>(shape.size());

  SampleStatistics st;
  for (const auto& img : samples) st.sample_means.push_back(total_photons(img) / n);
  for (const auto& img : reference) st.reference_means.push_back(total_photons(img) / n);
  st.mean_intensity_w1 = wasserstein1(st.sample_means, st.reference_means);

  Spectrum fft(shape);
  st.sample_spectrum = mean_spectrum(samples, fft);
  st.reference_spectrum = mean_spectrum(reference, fft);
  double diff = 0.0, norm = 0.0;
  for (std::size_t b = 0; b < st.sample_spectrum.size(); ++b) {
    diff += std::abs(st.sample_spectrum[b] - st.reference_spectrum[b]);
    norm += st.reference_spectrum[b];
  }
  st.spectrum_l1 = norm > 0.0 ? diff / norm : diff;

  // Integer pixel sums are exact, so the mean images do not depend on order.
  std::vector<std::uint64_t> sa(shape.size(), 0), sb(shape.size(), 0);
  for (const auto& img : samples) {
    for (std::size_t i = 0; i < img.size(); ++i) sa[i] += img[i];
  }
  for (const auto& img : reference) {
    for (std::size_t i = 0; i < img.size(); ++i) sb[i] += img[i];
  }
  double l1 = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    l1 += std::abs(static_cast<double>(sa[i]) / samples.size() - static_cast<double>(sb[i]) / reference.size());
  }
  st.mean_image_l1 = l1 / n;
  return st;
}

void EvalReport::add(std::string name, double psnr_db, double input_db) {
  names.push_back(std::move(name));
  psnr.push_back(psnr_db);
  input_pseudo_psnr.push_back(input_db);
}

double EvalReport::mean_psnr() const {
  if (psnr.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double v : psnr) s += v;
  return s / static_cast<double>(psnr.size());
}

void EvalReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "image,psnr_db,input_pseudo_psnr_db\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i] << ',' << format_db(psnr[i]) << ',' << format_db(input_pseudo_psnr[i]) << '\n';
  }
  out << "mean," << format_db(mean_psnr()) << ",\n";
}

void EvalReport::write_json(const std::string& path) const {
  nlohmann::json j;
  j["metadata"] = metadata;
  j["mean_psnr_db"] = json_db(mean_psnr());
  j["images"] = nlohmann::json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    j["images"].push_back({{"name", names[i]},
                           {"psnr_db", json_db(psnr[i])},
                           {"input_pseudo_psnr_db", json_db(input_pseudo_psnr[i])}});
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace gap
