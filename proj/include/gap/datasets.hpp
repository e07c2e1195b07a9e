#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gap/core.hpp"
#include "gap/oracle.hpp"
#include "gap/rng.hpp"

namespace gap {

struct Localization {
  std::int64_t frame = 0;
  double x_nm = 0.0;
  double y_nm = 0.0;
};

// Half-open rectangle [x_min, x_max) x [y_min, y_max) in nanometres.
struct Extent {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
  void validate() const;  // RangeError unless finite with min < max
};

struct LocalizationTable {
  std::vector<Localization> records;
  std::optional<Extent> extent;
};

// CSV with a header naming at least frame,x_nm,y_nm; other columns are
// ignored. Throws FormatError on malformed rows.
LocalizationTable read_localizations_csv(std::istream& in);
LocalizationTable read_localizations_csv(const std::string& path);

// Smallest origin-aligned extent holding every record.
Extent covering_extent(const LocalizationTable& table, double bin_nm);

// 2D histogram with columns along x and rows along y. Records outside the
// extent are skipped; a record on a bin's upper edge lands in the next bin.
PhotonImage bin_localizations(const LocalizationTable& table, double bin_nm, const Extent& extent);

// Keeps each photon with probability p (the input half of a binomial split).
PhotonImage thin(const PhotonImage& img, double p, Rng& rng);

// Sums consecutive groups of k frames; trailing frames that do not fill a
// group are dropped with a warning on std::clog.
std::vector<PhotonImage> sum_frames(std::span<const PhotonImage> stack, std::size_t k);

struct DatasetSplit {
  std::vector<PhotonImage> train;
  std::vector<PhotonImage> test;
};

struct IndexSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Index i goes to test when i % n == offset. Requires n >= 2 and offset < n.
IndexSplit split_indices(std::size_t count, std::size_t n, std::size_t offset);
DatasetSplit split_every_nth(std::span<const PhotonImage> images, std::size_t n, std::size_t offset);

// Non-overlapping size x size tiles whose photon total exceeds min_photons.
std::vector<PhotonImage> extract_regions(const PhotonImage& img, std::size_t size,
                                         std::uint64_t min_photons = 0);

enum class WorldKind { delta, two_template, blob_field };

WorldKind parse_world_kind(const std::string& name);
std::string to_string(WorldKind kind);

// A finite prior over smooth positive signals.
//   delta:        one random blob signal (unit total)
//   two_template: mirrored linear ramps from 2 to 1 along the columns; on a
//                 1x2 grid these are exactly (2, 1) and (1, 2)
//   blob_field:   `templates` random blob signals (unit total), equal weights
struct SyntheticWorld {
  WorldKind kind;
  SignalPrior prior;
};

SyntheticWorld make_synthetic_world(WorldKind kind, Shape shape, Rng& rng, std::size_t templates = 8);

struct WorldSample {
  std::size_t template_index = 0;
  RealGrid mean;  // Poisson mean the image was drawn from
  PhotonImage image;
};

// Draws a template from the prior, scales it to `psnr_db` mean photons per
// pixel and samples shot noise.
WorldSample sample_world(const SyntheticWorld& world, double psnr_db, Rng& rng);
std::vector<PhotonImage> sample_world_images(const SyntheticWorld& world, std::size_t count,
                                             double psnr_db, Rng& rng);

}  // namespace gap
