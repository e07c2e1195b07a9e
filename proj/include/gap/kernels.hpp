#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gap {

// Channel-major activation volume [channels][rows][cols].
struct Tensor {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int h, int w, double fill = 0.0)
      : channels(c), rows(h), cols(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(rows) * cols; }
  double* plane(int c) noexcept { return data.data() + c * plane_size(); }
  const double* plane(int c) const noexcept { return data.data() + c * plane_size(); }
  bool same_shape(const Tensor& o) const noexcept {
    return channels == o.channels && rows == o.rows && cols == o.cols;
  }
};

enum class Padding { zero, reflect };

// Maps a possibly out-of-range coordinate to its source under the padding
// mode; -1 means the tap reads a zero.
int padded_source(int i, int n, Padding pad) noexcept;

// Weight layouts:
//   conv:            [out][in][k][k], odd k, "same" output size, stride 1
//   transposed conv: [in][out][2][2], stride 2 (doubles rows and cols)
// Backward functions accumulate into dweight/dbias and overwrite *dx when it
// is non-null.
namespace kernels {

// OpenMP-parallel implementations used by the model.
Tensor conv2d_forward(const Tensor& x, std::span<const double> weight,
                      std::span<const double> bias, int out_channels, int ksize,
                      Padding pad);
void conv2d_backward(const Tensor& x, std::span<const double> weight, const Tensor& dy,
                     int ksize, Padding pad, Tensor* dx, std::span<double> dweight,
                     std::span<double> dbias);

Tensor conv_transpose2x2_forward(const Tensor& x, std::span<const double> weight,
                                 std::span<const double> bias, int out_channels);
void conv_transpose2x2_backward(const Tensor& x, std::span<const double> weight,
                                const Tensor& dy, Tensor* dx, std::span<double> dweight,
                                std::span<double> dbias);

// argmax receives, per output element, the flat in-plane index of the winner.
Tensor maxpool2x2_forward(const Tensor& x, std::vector<std::uint32_t>& argmax);
Tensor maxpool2x2_backward(const Tensor& dy, const std::vector<std::uint32_t>& argmax,
                           int in_rows, int in_cols);

void relu_inplace(Tensor& x);
// Zeroes dy wherever the forward output y was not positive.
void relu_backward_inplace(const Tensor& y, Tensor& dy);

void set_num_threads(int n);
int max_threads();

// Plain nested-loop versions kept as the reference for tests and benchmarks.
namespace serial {

Tensor conv2d_forward(const Tensor& x, std::span<const double> weight,
                      std::span<const double> bias, int out_channels, int ksize,
                      Padding pad);
void conv2d_backward(const Tensor& x, std::span<const double> weight, const Tensor& dy,
                     int ksize, Padding pad, Tensor* dx, std::span<double> dweight,
                     std::span<double> dbias);
Tensor conv_transpose2x2_forward(const Tensor& x, std::span<const double> weight,
                                 std::span<const double> bias, int out_channels);
void conv_transpose2x2_backward(const Tensor& x, std::span<const double> weight,
                                const Tensor& dy, Tensor* dx, std::span<double> dweight,
                                std::span<double> dbias);
Tensor maxpool2x2_forward(const Tensor& x, std::vector<std::uint32_t>& argmax);

}  // namespace serial
}  // namespace kernels
}  // namespace gap
