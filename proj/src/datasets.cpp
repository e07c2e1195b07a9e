#include "gap/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gap/error.hpp"
#include "gap/noise.hpp"

namespace gap {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r\"");
    const auto e = field.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
T parse_number(const std::string& s, std::size_t line_no) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("localization table line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

// Sum of Gaussian bumps on a faint floor, normalized to unit total.
RealGrid random_blobs(Shape shape, Rng& rng) {
  std::uniform_int_distribution<int> count(2, 4);
  std::uniform_real_distribution<double> row(0.2 * shape.rows, 0.8 * shape.rows);
  std::uniform_real_distribution<double> col(0.2 * shape.cols, 0.8 * shape.cols);
  const double scale = static_cast<double>(std::min(shape.rows, shape.cols));
  std::uniform_real_distribution<double> width(0.08 * scale, 0.2 * scale);
  std::uniform_real_distribution<double> height(0.5, 1.0);
  RealGrid s(shape, 0.05);
  const int k = count(rng);
  for (int b = 0; b < k; ++b) {
    const double r0 = row(rng), c0 = col(rng), w = std::max(width(rng), 0.5), h = height(rng);
    for (std::size_t r = 0; r < shape.rows; ++r) {
      for (std::size_t c = 0; c < shape.cols; ++c) {
        const double d2 = (r - r0) * (r - r0) + (c - c0) * (c - c0);
        s(r, c) += h * std::exp(-0.5 * d2 / (w * w));
      }
    }
  }
  const double t = sum(s);
  for (double& v : s) v /= t;
  return s;
}

}  // namespace

void Extent::validate() const {
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !std::isfinite(y_min) ||
      !std::isfinite(y_max) || !(x_min < x_max) || !(y_min < y_max)) {
    throw RangeError("extent must be finite with min < max on both axes");
  }
}

LocalizationTable read_localizations_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    header = split_csv_line(line);
  }
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError("localization table lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t fi = column("frame"), xi = column("x_nm"), yi = column("y_nm");
  const std::size_t needed = std::max({fi, xi, yi}) + 1;

  LocalizationTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (f.size() < needed) throw FormatError("localization table line " + std::to_string(line_no) + ": too few fields");
    Localization rec;
    rec.frame = parse_number<std::int64_t>(f[fi], line_no);
    rec.x_nm = parse_number<double>(f[xi], line_no);
    rec.y_nm = parse_number<double>(f[yi], line_no);
    if (rec.frame < 0 || !std::isfinite(rec.x_nm) || !std::isfinite(rec.y_nm)) {
      throw FormatError("localization table line " + std::to_string(line_no) + ": invalid record");
    }
    table.records.push_back(rec);
  }
  return table;
}

LocalizationTable read_localizations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_localizations_csv(in);
}

Extent covering_extent(const LocalizationTable& table, double bin_nm) {
  if (!(bin_nm > 0.0)) throw RangeError("bin size must be positive");
  Extent e{0.0, bin_nm, 0.0, bin_nm};
  for (const auto& r : table.records) {
    e.x_max = std::max(e.x_max, (std::floor(r.x_nm / bin_nm) + 1.0) * bin_nm);
    e.y_max = std::max(e.y_max, (std::floor(r.y_nm / bin_nm) + 1.0) * bin_nm);
    e.x_min = std::min(e.x_min, std::floor(r.x_nm / bin_nm) * bin_nm);
    e.y_min = std::min(e.y_min, std::floor(r.y_nm / bin_nm) * bin_nm);
  }
  return e;
}

PhotonImage bin_localizations(const LocalizationTable& table, double bin_nm, const Extent& extent) {
  if (!(bin_nm > 0.0) || !std::isfinite(bin_nm)) throw RangeError("bin size must be positive");
  extent.validate();
  const auto cols = static_cast<std::size_t>(std::ceil((extent.x_max - extent.x_min) / bin_nm));
  const auto rows = static_cast<std::size_t>(std::ceil((extent.y_max - extent.y_min) / bin_nm));
  PhotonImage img(rows, cols);
  for (const auto& r : table.records) {
    if (r.x_nm < extent.x_min || r.x_nm >= extent.x_max || r.y_nm < extent.y_min ||
        r.y_nm >= extent.y_max) {
      continue;
    }
    const auto c = static_cast<std::size_t>(std::floor((r.x_nm - extent.x_min) / bin_nm));
    const auto q = static_cast<std::size_t>(std::floor((r.y_nm - extent.y_min) / bin_nm));
    if (c < cols && q < rows) ++img(q, c);
  }
  return img;
}

PhotonImage thin(const PhotonImage& img, double p, Rng& rng) {
  return binomial_split(img, p, rng).input;
}

std::vector<PhotonImage> sum_frames(std::span<const PhotonImage> stack, std::size_t k) {
  if (k < 1) throw RangeError("frame group size must be at least 1");
  for (const auto& f : stack) require_same_shape(f.shape(), stack.front().shape(), "sum_frames");
  const std::size_t groups = stack.size() / k;
  if (stack.size() % k != 0) {
    std::clog << "warning: dropping " << stack.size() % k << " trailing frame(s) that do not fill a group of "
              << k << '\n';
  }
  std::vector<PhotonImage> out;
  out.reserve(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    PhotonImage acc = stack[g * k];
    for (std::size_t j = 1; j < k; ++j) acc = add(acc, stack[g * k + j]);
    out.push_back(std::move(acc));
  }
  return out;
}

IndexSplit split_indices(std::size_t count, std::size_t n, std::size_t offset) {
  if (n < 2) throw RangeError("split period must be at least 2");
  if (offset >= n) throw RangeError("split offset must be smaller than the period");
  IndexSplit out;
  for (std::size_t i = 0; i < count; ++i) (i % n == offset ? out.test : out.train).push_back(i);
  return out;
}

DatasetSplit split_every_nth(std::span<const PhotonImage> images, std::size_t n, std::size_t offset) {
  const auto idx = split_indices(images.size(), n, offset);
  DatasetSplit out;
  for (auto i : idx.train) out.train.push_back(images[i]);
  for (auto i : idx.test) out.test.push_back(images[i]);
  return out;
}

std::vector<PhotonImage> extract_regions(const PhotonImage& img, std::size_t size,
                                         std::uint64_t min_photons) {
  if (size == 0) throw RangeError("region size must be positive");
  std::vector<PhotonImage> out;
  for (std::size_t r0 = 0; r0 + size <= img.shape().rows; r0 += size) {
    for (std::size_t c0 = 0; c0 + size <= img.shape().cols; c0 += size) {
      PhotonImage tile(size, size);
      for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t c = 0; c < size; ++c) tile(r, c) = img(r0 + r, c0 + c);
      }
      if (total_photons(tile) > min_photons) out.push_back(std::move(tile));
    }
  }
  return out;
}

WorldKind parse_world_kind(const std::string& name) {
  if (name == "delta") return WorldKind::delta;
  if (name == "two-template") return WorldKind::two_template;
  if (name == "blob-field") return WorldKind::blob_field;
  throw ConfigError("unknown world kind '" + name + "' (delta, two-template, blob-field)");
}

std::string to_string(WorldKind kind) {
  switch (kind) {
    case WorldKind::delta: return "delta";
    case WorldKind::two_template: return "two-template";
    case WorldKind::blob_field: return "blob-field";
  }
  return "?";
}

SyntheticWorld make_synthetic_world(WorldKind kind, Shape shape, Rng& rng, std::size_t templates) {
  if (shape.size() == 0) throw ShapeError("world shape must be non-empty");
  switch (kind) {
    case WorldKind::delta:
      return {kind, SignalPrior::delta(random_blobs(shape, rng))};
    case WorldKind::two_template: {
      RealGrid a(shape), b(shape);
      const double span = shape.cols > 1 ? static_cast<double>(shape.cols - 1) : 1.0;
      for (std::size_t r = 0; r < shape.rows; ++r) {
        for (std::size_t c = 0; c < shape.cols; ++c) {
          a(r, c) = 2.0 - static_cast<double>(c) / span;
          b(r, c) = 1.0 + static_cast<double>(c) / span;
        }
      }
      return {kind, SignalPrior::uniform({a, b})};
    }
    case WorldKind::blob_field: {
      if (templates == 0) throw RangeError("blob field needs at least one template");
      std::vector<RealGrid> signals;
      for (std::size_t k = 0; k < templates; ++k) signals.push_back(random_blobs(shape, rng));
      return {kind, SignalPrior::uniform(std::move(signals))};
    }
  }
  throw ConfigError("unknown world kind");
}

WorldSample sample_world(const SyntheticWorld& world, double psnr_db, Rng& rng) {
  const auto& w = world.prior.weights();
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  WorldSample out;
  out.template_index = pick(rng);
  out.mean = world.prior.signals()[out.template_index];
  const double scale = intensity_for_pseudo_psnr(psnr_db) * static_cast<double>(out.mean.size()) / sum(out.mean);
  for (double& v : out.mean) v *= scale;
  out.image = sample_shot_noise(out.mean, rng);
  return out;
}

std::vector<PhotonImage> sample_world_images(const SyntheticWorld& world, std::size_t count,
                                             double psnr_db, Rng& rng) {
  std::vector<PhotonImage> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_world(world, psnr_db, rng).image);
  return out;
}

}  // namespace gap
