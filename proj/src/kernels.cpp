#include "gap/kernels.hpp"

#include <algorithm>
#include <cassert>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <Eigen/Core>

#include "gap/error.hpp"

namespace gap {

int padded_source(int i, int n, Padding pad) noexcept {
  if (i >= 0 && i < n) return i;
  if (pad == Padding::zero) return -1;
  if (n == 1) return 0;
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return std::clamp(i, 0, n - 1);
}

namespace kernels {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Products only ever see Eigen-owned storage. Eigen's vectorized reductions
// peel according to the runtime address, so operating on arbitrary vector
// memory would make results depend on heap alignment.
RowMatrix load(const double* p, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const RowMatrix>(p, rows, cols);
}

void store(const RowMatrix& m, double* p) { std::copy(m.data(), m.data() + m.size(), p); }

void add_into(const RowMatrix& m, double* p) {
  const double* src = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] += src[i];
}

double plane_sum(const double* p, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += p[i];
  return s;
}

// Column matrix [(c, ky, kx)][pixel] of the padded input taps.
RowMatrix im2col(const Tensor& x, int k, Padding pad) {
  const int h = x.rows, w = x.cols, p = k / 2;
  RowMatrix col(static_cast<Eigen::Index>(x.channels) * k * k, static_cast<Eigen::Index>(h) * w);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < x.channels; ++c) {
    const double* xc = x.plane(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = col.row((c * k + ky) * k + kx).data();
        for (int r = 0; r < h; ++r) {
          const int sr = padded_source(r + ky - p, h, pad);
          double* d = dst + static_cast<std::size_t>(r) * w;
          if (sr < 0) {
            std::fill(d, d + w, 0.0);
            continue;
          }
          const double* srow = xc + static_cast<std::size_t>(sr) * w;
          for (int q = 0; q < w; ++q) {
            const int sc = padded_source(q + kx - p, w, pad);
            d[q] = sc < 0 ? 0.0 : srow[sc];
          }
        }
      }
    }
  }
  return col;
}

// Adjoint of im2col: scatters tap gradients back onto their source pixels.
void col2im(const RowMatrix& col, int k, Padding pad, Tensor& dx) {
  const int h = dx.rows, w = dx.cols, p = k / 2;
  std::fill(dx.data.begin(), dx.data.end(), 0.0);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < dx.channels; ++c) {
    double* dc = dx.plane(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = col.row((c * k + ky) * k + kx).data();
        for (int r = 0; r < h; ++r) {
          const int sr = padded_source(r + ky - p, h, pad);
          if (sr < 0) continue;
          double* drow = dc + static_cast<std::size_t>(sr) * w;
          const double* s = src + static_cast<std::size_t>(r) * w;
          for (int q = 0; q < w; ++q) {
            const int sc = padded_source(q + kx - p, w, pad);
            if (sc >= 0) drow[sc] += s[q];
          }
        }
      }
    }
  }
}

void check_conv_args(const Tensor& x, std::span<const double> weight,
                     std::span<const double> bias, int out_channels, int ksize) {
  if (ksize < 1 || ksize % 2 == 0) throw ShapeError("convolution kernel size must be odd");
  const std::size_t expected =
      static_cast<std::size_t>(out_channels) * x.channels * ksize * ksize;
  if (weight.size() != expected || bias.size() != static_cast<std::size_t>(out_channels)) {
    throw ShapeError("convolution parameter size mismatch");
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, std::span<const double> weight,
                      std::span<const double> bias, int out_channels, int ksize,
                      Padding pad) {
  check_conv_args(x, weight, bias, out_channels, ksize);
  const RowMatrix col = im2col(x, ksize, pad);
  const RowMatrix wm = load(weight.data(), out_channels, col.rows());
  RowMatrix ym(out_channels, col.cols());
  ym.noalias() = wm * col;
  for (int o = 0; o < out_channels; ++o) ym.row(o).array() += bias[o];
  Tensor y(out_channels, x.rows, x.cols);
  store(ym, y.data.data());
  return y;
}

void conv2d_backward(const Tensor& x, std::span<const double> weight, const Tensor& dy,
                     int ksize, Padding pad, Tensor* dx, std::span<double> dweight,
                     std::span<double> dbias) {
  const int out_ch = dy.channels;
  check_conv_args(x, weight, std::span<const double>(dbias.data(), dbias.size()), out_ch, ksize);
  if (dweight.size() != weight.size()) throw ShapeError("conv gradient buffer size mismatch");
  const RowMatrix col = im2col(x, ksize, pad);
  for (int o = 0; o < out_ch; ++o) dbias[o] += plane_sum(dy.plane(o), dy.plane_size());
  const RowMatrix gm = load(dy.data.data(), out_ch, col.cols());
  RowMatrix dwm(out_ch, col.rows());
  dwm.noalias() = gm * col.transpose();
  add_into(dwm, dweight.data());
  if (dx == nullptr) return;
  const RowMatrix wm = load(weight.data(), out_ch, col.rows());
  RowMatrix dcol(col.rows(), col.cols());
  dcol.noalias() = wm.transpose() * gm;
  *dx = Tensor(x.channels, x.rows, x.cols);
  col2im(dcol, ksize, pad, *dx);
}

// The transposed convolution is a GEMM onto a [(o, dy, dx)][pixel] matrix
// followed by an interleaving scatter into the doubled grid.
Tensor conv_transpose2x2_forward(const Tensor& x, std::span<const double> weight,
                                 std::span<const double> bias, int out_channels) {
  const int in_ch = x.channels, h = x.rows, w = x.cols;
  if (weight.size() != static_cast<std::size_t>(in_ch) * out_channels * 4 ||
      bias.size() != static_cast<std::size_t>(out_channels)) {
    throw ShapeError("transposed convolution parameter size mismatch");
  }
  const Eigen::Index pix = static_cast<Eigen::Index>(h) * w;
  const RowMatrix wm = load(weight.data(), in_ch, out_channels * 4);
  const RowMatrix xm = load(x.data.data(), in_ch, pix);
  RowMatrix z(out_channels * 4, pix);
  z.noalias() = wm.transpose() * xm;
  Tensor y(out_channels, 2 * h, 2 * w);
  const int w2 = 2 * w;
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out_channels; ++o) {
    double* yo = y.plane(o);
    for (int t = 0; t < 4; ++t) {
      const double* zr = z.row(o * 4 + t).data();
      const int dyi = t / 2, dxi = t % 2;
      for (int r = 0; r < h; ++r) {
        double* dst = yo + static_cast<std::size_t>(2 * r + dyi) * w2 + dxi;
        const double* src = zr + static_cast<std::size_t>(r) * w;
        for (int q = 0; q < w; ++q) dst[2 * q] = src[q] + bias[o];
      }
    }
  }
  return y;
}

void conv_transpose2x2_backward(const Tensor& x, std::span<const double> weight,
                                const Tensor& dy, Tensor* dx, std::span<double> dweight,
                                std::span<double> dbias) {
  const int in_ch = x.channels, out_ch = dy.channels, h = x.rows, w = x.cols;
  const int w2 = 2 * w;
  if (dweight.size() != weight.size() || dbias.size() != static_cast<std::size_t>(out_ch)) {
    throw ShapeError("transposed convolution gradient buffer size mismatch");
  }
  const Eigen::Index pix = static_cast<Eigen::Index>(h) * w;
  RowMatrix dz(out_ch * 4, pix);
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out_ch; ++o) {
    const double* go = dy.plane(o);
    for (int t = 0; t < 4; ++t) {
      double* zr = dz.row(o * 4 + t).data();
      const int dyi = t / 2, dxi = t % 2;
      for (int r = 0; r < h; ++r) {
        const double* g = go + static_cast<std::size_t>(2 * r + dyi) * w2 + dxi;
        double* d = zr + static_cast<std::size_t>(r) * w;
        for (int q = 0; q < w; ++q) d[q] = g[2 * q];
      }
    }
  }
  for (int o = 0; o < out_ch; ++o) dbias[o] += plane_sum(dy.plane(o), dy.plane_size());
  const RowMatrix xm = load(x.data.data(), in_ch, pix);
  RowMatrix dwm(in_ch, out_ch * 4);
  dwm.noalias() = xm * dz.transpose();
  add_into(dwm, dweight.data());
  if (dx == nullptr) return;
  const RowMatrix wm = load(weight.data(), in_ch, out_ch * 4);
  RowMatrix dxm(in_ch, pix);
  dxm.noalias() = wm * dz;
  *dx = Tensor(in_ch, h, w);
  store(dxm, dx->data.data());
}

Tensor maxpool2x2_forward(const Tensor& x, std::vector<std::uint32_t>& argmax) {
  if (x.rows % 2 != 0 || x.cols % 2 != 0) throw ShapeError("max-pooling needs even dimensions");
  Tensor y(x.channels, x.rows / 2, x.cols / 2);
  argmax.assign(y.data.size(), 0);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < x.channels; ++c) {
    const double* xc = x.plane(c);
    double* yc = y.plane(c);
    std::uint32_t* ac = argmax.data() + c * y.plane_size();
    for (int r = 0; r < y.rows; ++r) {
      for (int q = 0; q < y.cols; ++q) {
        std::uint32_t best = static_cast<std::uint32_t>((2 * r) * x.cols + 2 * q);
        for (int dyi = 0; dyi < 2; ++dyi) {
          for (int dxi = 0; dxi < 2; ++dxi) {
            const auto idx = static_cast<std::uint32_t>((2 * r + dyi) * x.cols + 2 * q + dxi);
            if (xc[idx] > xc[best]) best = idx;
          }
        }
        yc[r * y.cols + q] = xc[best];
        ac[r * y.cols + q] = best;
      }
    }
  }
  return y;
}

Tensor maxpool2x2_backward(const Tensor& dy, const std::vector<std::uint32_t>& argmax,
                           int in_rows, int in_cols) {
  Tensor dx(dy.channels, in_rows, in_cols);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < dy.channels; ++c) {
    const double* g = dy.plane(c);
    const std::uint32_t* ac = argmax.data() + c * dy.plane_size();
    double* d = dx.plane(c);
    for (std::size_t i = 0; i < dy.plane_size(); ++i) d[ac[i]] += g[i];
  }
  return dx;
}

void relu_inplace(Tensor& x) {
  for (double& v : x.data) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(const Tensor& y, Tensor& dy) {
  assert(y.same_shape(dy));
  for (std::size_t i = 0; i < dy.data.size(); ++i) {
    if (!(y.data[i] > 0.0)) dy.data[i] = 0.0;
  }
}

void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace kernels
}  // namespace gap
