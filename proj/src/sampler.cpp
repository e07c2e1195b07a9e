#include "gap/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "gap/error.hpp"
#include "gap/noise.hpp"

namespace gap {

void SamplerConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("sampler field 'beta' must be positive");
  if (target_photons < 1) throw ConfigError("sampler field 'target_photons' must be at least 1");
}

RealGrid mmse_denoise(const Predictor& model, const PhotonImage& img) {
  const std::uint64_t total = total_photons(img);
  if (total == 0) throw ZeroPhotonError("cannot denoise an image without photons");
  RealGrid out = model.predict(img).grid();
  for (double& v : out) v *= static_cast<double>(total);
  return out;
}

double step_size(std::uint64_t total, const SamplerConfig& cfg) {
  double alpha = std::max(cfg.beta * static_cast<double>(total), 1.0);
  if (cfg.truncate_final_step && total < cfg.target_photons) {
    alpha = std::min(alpha, static_cast<double>(cfg.target_photons - total));
  }
  return alpha;
}

PhotonImage gap_step(const Predictor& model, const PhotonImage& img, const SamplerConfig& cfg,
                     Rng& rng) {
  const auto s = model.predict(img);
  PhotonImage out = img;
  if (cfg.single_photon) {
    std::discrete_distribution<std::size_t> pixel(s.values().begin(), s.values().end());
    ++out[pixel(rng)];
    return out;
  }
  const std::uint64_t total = total_photons(img);
  double alpha = step_size(total, cfg);
  if (cfg.literal_lambda) alpha *= static_cast<double>(img.size());
  if (cfg.truncate_final_step && total < cfg.target_photons) {
    // Independent per-pixel Poisson draws are a Poisson total split
    // multinomially over s; capping the total stops exactly on the target.
    std::uint64_t left = std::min(sample_poisson(alpha, rng), cfg.target_photons - total);
    std::size_t last = out.size() - 1;
    while (last > 0 && s[last] <= 0.0) --last;
    double mass = 1.0;
    for (std::size_t i = 0; i <= last && left > 0; ++i) {
      const double q = mass > 0.0 ? std::clamp(s[i] / mass, 0.0, 1.0) : 1.0;
      const std::uint64_t k = i == last ? left : sample_binomial(left, q, rng);
      out[i] += k;
      left -= k;
      mass -= s[i];
    }
    return out;
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sample_poisson(s[i] * alpha, rng);
  return out;
}

ExpertRegistry::ExpertRegistry(std::vector<Entry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw RegistryCoverageError("expert registry is empty");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (!e.model) throw RegistryCoverageError("expert registry entry without a model");
    if (!(e.lo < e.hi)) throw RegistryCoverageError("expert range must satisfy lo < hi");
    if (i > 0 && entries_[i - 1].hi != e.lo) {
      throw RegistryCoverageError("expert ranges must be sorted and contiguous");
    }
  }
}

ExpertRegistry ExpertRegistry::single(std::shared_ptr<const Predictor> model) {
  return ExpertRegistry({Entry{-std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity(), std::move(model)}});
}

std::size_t ExpertRegistry::index_for(const PhotonImage& img) const {
  if (entries_.empty()) throw RegistryCoverageError("expert registry is empty");
  const std::uint64_t total = total_photons(img);
  if (total == 0) return 0;
  const double db = pseudo_psnr(static_cast<double>(total) / static_cast<double>(img.size()));
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].lo <= db && db < entries_[i].hi) return i;
  }
  throw RegistryCoverageError("no expert covers pseudo-PSNR " + std::to_string(db) + " dB");
}

const Predictor& select_expert(const ExpertRegistry& registry, const PhotonImage& img) {
  return *registry.entries()[registry.index_for(img)].model;
}

namespace {

template <class Pick>
Accumulation run(Pick&& pick, const PhotonImage& start, const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  Accumulation acc{start, {}, 0};
  if (cfg.record_trajectory) acc.trajectory.push_back(start);
  while (total_photons(acc.image) < cfg.target_photons) {
    acc.image = gap_step(pick(acc.image), acc.image, cfg, rng);
    ++acc.steps;
    if (cfg.record_trajectory) acc.trajectory.push_back(acc.image);
  }
  return acc;
}

}  // namespace

Accumulation accumulate(const Predictor& model, const PhotonImage& start,
                        const SamplerConfig& cfg, Rng& rng) {
  return run([&](const PhotonImage&) -> const Predictor& { return model; }, start, cfg, rng);
}

Accumulation accumulate(const ExpertRegistry& registry, const PhotonImage& start,
                        const SamplerConfig& cfg, Rng& rng) {
  return run([&](const PhotonImage& img) -> const Predictor& { return select_expert(registry, img); },
             start, cfg, rng);
}

void write_trajectory_csv(const std::string& path, const std::vector<PhotonImage>& trajectory) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out.precision(10);
  out << "step,total_photons,pseudo_psnr\n";
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const auto total = total_photons(trajectory[t]);
    out << t << ',' << total << ',';
    if (total == 0) {
      out << "-inf";
    } else {
      out << pseudo_psnr(static_cast<double>(total) / static_cast<double>(trajectory[t].size()));
    }
    out << '\n';
  }
}

}  // namespace gap
