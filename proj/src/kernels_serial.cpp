// Straightforward loop nests, one output (or gradient) element at a time.
// Slow on purpose: these are the reference the parallel kernels are checked
// against.
#include "gap/error.hpp"
#include "gap/kernels.hpp"

namespace gap::kernels::serial {

Tensor conv2d_forward(const Tensor& x, std::span<const double> weight,
                      std::span<const double> bias, int out_channels, int ksize,
                      Padding pad) {
  if (weight.size() != static_cast<std::size_t>(out_channels) * x.channels * ksize * ksize) {
    throw ShapeError("convolution parameter size mismatch");
  }
  const int p = ksize / 2;
  Tensor y(out_channels, x.rows, x.cols);
  for (int o = 0; o < out_channels; ++o) {
    for (int r = 0; r < x.rows; ++r) {
      for (int q = 0; q < x.cols; ++q) {
        double acc = bias[o];
        for (int c = 0; c < x.channels; ++c) {
          for (int ky = 0; ky < ksize; ++ky) {
            const int sr = padded_source(r + ky - p, x.rows, pad);
            if (sr < 0) continue;
            for (int kx = 0; kx < ksize; ++kx) {
              const int sc = padded_source(q + kx - p, x.cols, pad);
              if (sc < 0) continue;
              acc += weight[((o * x.channels + c) * ksize + ky) * ksize + kx] *
                     x.plane(c)[sr * x.cols + sc];
            }
          }
        }
        y.plane(o)[r * x.cols + q] = acc;
      }
    }
  }
  return y;
}

void conv2d_backward(const Tensor& x, std::span<const double> weight, const Tensor& dy,
                     int ksize, Padding pad, Tensor* dx, std::span<double> dweight,
                     std::span<double> dbias) {
  const int p = ksize / 2;
  if (dx != nullptr) *dx = Tensor(x.channels, x.rows, x.cols);
  for (int o = 0; o < dy.channels; ++o) {
    for (int r = 0; r < x.rows; ++r) {
      for (int q = 0; q < x.cols; ++q) {
        const double g = dy.plane(o)[r * x.cols + q];
        dbias[o] += g;
        for (int c = 0; c < x.channels; ++c) {
          for (int ky = 0; ky < ksize; ++ky) {
            const int sr = padded_source(r + ky - p, x.rows, pad);
            if (sr < 0) continue;
            for (int kx = 0; kx < ksize; ++kx) {
              const int sc = padded_source(q + kx - p, x.cols, pad);
              if (sc < 0) continue;
              const std::size_t wi = ((o * x.channels + c) * ksize + ky) * ksize + kx;
              dweight[wi] += g * x.plane(c)[sr * x.cols + sc];
              if (dx != nullptr) dx->plane(c)[sr * x.cols + sc] += g * weight[wi];
            }
          }
        }
      }
    }
  }
}

Tensor conv_transpose2x2_forward(const Tensor& x, std::span<const double> weight,
                                 std::span<const double> bias, int out_channels) {
  Tensor y(out_channels, 2 * x.rows, 2 * x.cols);
  for (int o = 0; o < out_channels; ++o) {
    for (int r = 0; r < y.rows; ++r) {
      for (int q = 0; q < y.cols; ++q) {
        double acc = bias[o];
        for (int c = 0; c < x.channels; ++c) {
          acc += weight[((c * out_channels + o) * 2 + r % 2) * 2 + q % 2] *
                 x.plane(c)[(r / 2) * x.cols + q / 2];
        }
        y.plane(o)[r * y.cols + q] = acc;
      }
    }
  }
  return y;
}

void conv_transpose2x2_backward(const Tensor& x, std::span<const double> weight,
                                const Tensor& dy, Tensor* dx, std::span<double> dweight,
                                std::span<double> dbias) {
  if (dx != nullptr) *dx = Tensor(x.channels, x.rows, x.cols);
  const int out_channels = dy.channels;
  for (int o = 0; o < out_channels; ++o) {
    for (int r = 0; r < dy.rows; ++r) {
      for (int q = 0; q < dy.cols; ++q) {
        const double g = dy.plane(o)[r * dy.cols + q];
        dbias[o] += g;
        for (int c = 0; c < x.channels; ++c) {
          const std::size_t wi = ((c * out_channels + o) * 2 + r % 2) * 2 + q % 2;
          const std::size_t xi = (r / 2) * x.cols + q / 2;
          dweight[wi] += g * x.plane(c)[xi];
          if (dx != nullptr) dx->plane(c)[xi] += g * weight[wi];
        }
      }
    }
  }
}

Tensor maxpool2x2_forward(const Tensor& x, std::vector<std::uint32_t>& argmax) {
  Tensor y(x.channels, x.rows / 2, x.cols / 2);
  argmax.assign(y.data.size(), 0);
  for (int c = 0; c < x.channels; ++c) {
    for (int r = 0; r < y.rows; ++r) {
      for (int q = 0; q < y.cols; ++q) {
        std::uint32_t best = 0;
        double best_v = 0.0;
        bool first = true;
        for (int dyi = 0; dyi < 2; ++dyi) {
          for (int dxi = 0; dxi < 2; ++dxi) {
            const auto idx = static_cast<std::uint32_t>((2 * r + dyi) * x.cols + 2 * q + dxi);
            const double v = x.plane(c)[idx];
            if (first || v > best_v) {
              best = idx;
              best_v = v;
              first = false;
            }
          }
        }
        y.plane(c)[r * y.cols + q] = best_v;
        argmax[c * y.plane_size() + r * y.cols + q] = best;
      }
    }
  }
  return y;
}

}  // namespace gap::kernels::serial
