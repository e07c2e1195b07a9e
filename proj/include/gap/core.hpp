#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gap/error.hpp"

namespace gap {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

// Dense row-major 2D grid. Flat index i maps to (i / cols, i % cols) in every
// module.
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  explicit Grid(Shape shape, T fill = T{})
      : shape_(shape), values_(shape.size(), fill) {}
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : Grid(Shape{rows, cols}, fill) {}
  Grid(Shape shape, std::vector<T> values)
      : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
      throw ShapeError("grid value count does not match its shape");
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rows() const noexcept { return shape_.rows; }
  std::size_t cols() const noexcept { return shape_.cols; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return values_[r * shape_.cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return values_[r * shape_.cols + c];
  }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  const std::vector<T>& vector() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  bool operator==(const Grid&) const = default;

 private:
  Shape shape_;
  std::vector<T> values_;
};

// Photon counts per pixel. 64-bit so that summed frame stacks cannot overflow.
using PhotonImage = Grid<std::uint64_t>;
using RealGrid = Grid<double>;

// Probability map over pixels: entries >= 0, summing to one within 1e-9.
class NormalizedDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  // Validates the invariant; throws InvalidSignalError on violation.
  explicit NormalizedDistribution(RealGrid probs);

  const Shape& shape() const noexcept { return probs_.shape(); }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return probs_(r, c); }
  std::span<const double> values() const noexcept { return probs_.values(); }
  const RealGrid& grid() const noexcept { return probs_; }

 private:
  RealGrid probs_;
};

// Ordered photon arrival positions (flat row-major pixel indices).
struct PhotonSequence {
  Shape shape;
  std::vector<std::size_t> positions;
};

std::uint64_t total_photons(const PhotonImage& img);

// x_i / sum_j x_j. Throws ZeroPhotonError for an empty image.
NormalizedDistribution normalize(const PhotonImage& img);

// Normalizes a non-negative real grid with positive total.
NormalizedDistribution normalize(const RealGrid& signal);

// Counts photons per pixel. Throws IndexError for positions outside the shape.
PhotonImage from_photon_sequence(const PhotonSequence& seq);

// Pixelwise helpers used across modules.
PhotonImage add(const PhotonImage& a, const PhotonImage& b);
PhotonImage subtract(const PhotonImage& a, const PhotonImage& b);
RealGrid to_real(const PhotonImage& img);
double mean(const RealGrid& g);
double sum(const RealGrid& g);

void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace gap
