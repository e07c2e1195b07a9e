#include "gap/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gap/rng.hpp"

namespace gap {

void ArchitectureConfig::validate() const {
  if (levels < 1) throw ConfigError("architecture levels must be >= 1");
  if (levels > 12) throw ConfigError("architecture levels must be <= 12");
  if (base_channels < 1) throw ConfigError("architecture base_channels must be >= 1");
  if (encoding_frequencies < 1) throw ConfigError("encoding_frequencies must be >= 1");
}

Tensor frequency_encode(const PhotonImage& img, int n_freq) {
  if (n_freq < 1) throw RangeError("frequency encoding needs at least one channel");
  Tensor out(n_freq, static_cast<int>(img.rows()), static_cast<int>(img.cols()));
  for (int k = 0; k < n_freq; ++k) {
    const double scale = std::pow(10.0, -k);
    double* plane = out.plane(k);
    for (std::size_t i = 0; i < img.size(); ++i) {
      plane[i] = std::sin(static_cast<double>(img[i]) * scale);
    }
  }
  return out;
}

PredictorModel::PredictorModel(const ArchitectureConfig& arch, std::uint64_t init_seed)
    : arch_(arch) {
  build_layout();
  Rng rng(init_seed);
  auto fill_normal = [&](std::size_t offset, std::size_t count, double stddev) {
    std::normal_distribution<double> normal(0.0, stddev);
    for (std::size_t i = 0; i < count; ++i) params_[offset + i] = normal(rng);
  };
  auto init_conv = [&](const Conv& c, double gain) {
    fill_normal(c.w, c.weight_count(), gain * std::sqrt(2.0 / (c.in * c.k * c.k)));
  };
  for (const auto& b : down_) {
    init_conv(b.c1, 1.0);
    init_conv(b.c2, 1.0);
    init_conv(b.c3, 1.0);
  }
  for (const auto& t : upconv_) fill_normal(t.w, t.weight_count(), std::sqrt(1.0 / t.in));
  for (const auto& b : up_) {
    init_conv(b.c1, 1.0);
    init_conv(b.c2, 1.0);
    init_conv(b.c3, 1.0);
  }
  // Small head so a fresh model starts close to a uniform map.
  init_conv(head_, 1e-2);
}

PredictorModel::PredictorModel(const ArchitectureConfig& arch, std::vector<double> parameters)
    : arch_(arch) {
  build_layout();
  if (parameters.size() != params_.size()) {
    throw ShapeError("parameter vector has " + std::to_string(parameters.size()) +
                     " entries, architecture needs " + std::to_string(params_.size()));
  }
  params_ = std::move(parameters);
}

void PredictorModel::build_layout() {
  arch_.validate();
  std::size_t offset = 0;
  auto make_conv = [&](int in, int out, int k) {
    Conv c{in, out, k, offset, 0};
    offset += c.weight_count();
    c.b = offset;
    offset += static_cast<std::size_t>(out);
    return c;
  };
  auto make_block = [&](int in, int out) {
    Block b;
    b.c1 = make_conv(in, out, 3);
    b.c2 = make_conv(out, out, 3);
    b.c3 = make_conv(out, out, 3);
    return b;
  };
  const int levels = arch_.levels;
  down_.clear();
  upconv_.assign(static_cast<std::size_t>(levels - 1), TConv{});
  up_.assign(static_cast<std::size_t>(levels - 1), Block{});
  for (int l = 0; l < levels; ++l) {
    const int in = l == 0 ? arch_.encoding_frequencies : arch_.channels_at(l - 1);
    down_.push_back(make_block(in, arch_.channels_at(l)));
  }
  for (int l = levels - 2; l >= 0; --l) {
    TConv t{arch_.channels_at(l + 1), arch_.channels_at(l), offset, 0};
    offset += t.weight_count();
    t.b = offset;
    offset += static_cast<std::size_t>(t.out);
    upconv_[static_cast<std::size_t>(l)] = t;
    up_[static_cast<std::size_t>(l)] = make_block(2 * arch_.channels_at(l), arch_.channels_at(l));
  }
  head_ = make_conv(arch_.channels_at(0), 1, 1);
  params_.assign(offset, 0.0);
}

void PredictorModel::check_shape(const Shape& shape) const {
  const std::size_t m = arch_.size_multiple();
  if (shape.rows == 0 || shape.cols == 0 || shape.rows % m != 0 || shape.cols % m != 0) {
    throw ShapeError("image " + std::to_string(shape.rows) + "x" + std::to_string(shape.cols) +
                     " is not a multiple of " + std::to_string(m) + " in both dimensions");
  }
}

Tensor PredictorModel::conv(const Conv& c, const Tensor& x) const {
  const std::span<const double> p(params_);
  return kernels::conv2d_forward(x, p.subspan(c.w, c.weight_count()),
                                 p.subspan(c.b, static_cast<std::size_t>(c.out)), c.out, c.k,
                                 arch_.padding);
}

void PredictorModel::conv_back(const Conv& c, const Tensor& x, const Tensor& dy, Tensor* dx,
                               std::span<double> grad) const {
  const std::span<const double> p(params_);
  kernels::conv2d_backward(x, p.subspan(c.w, c.weight_count()), dy, c.k, arch_.padding, dx,
                           grad.subspan(c.w, c.weight_count()),
                           grad.subspan(c.b, static_cast<std::size_t>(c.out)));
}

// y = relu(h1 + conv3(relu(conv2(h1)))), h1 = conv1(x)
Tensor PredictorModel::block_forward(const Block& b, const Tensor& x, BlockCache* cache) const {
  Tensor h1 = conv(b.c1, x);
  Tensor h2 = conv(b.c2, h1);
  kernels::relu_inplace(h2);
  Tensor out = conv(b.c3, h2);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += h1.data[i];
  kernels::relu_inplace(out);
  if (cache != nullptr) {
    cache->input = x;
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
    cache->out = out;
  }
  return out;
}

Tensor PredictorModel::block_backward(const Block& b, const BlockCache& cache, Tensor dy,
                                      std::span<double> grad) const {
  kernels::relu_backward_inplace(cache.out, dy);
  Tensor dh2;
  conv_back(b.c3, cache.h2, dy, &dh2, grad);
  kernels::relu_backward_inplace(cache.h2, dh2);
  Tensor dh1;
  conv_back(b.c2, cache.h1, dh2, &dh1, grad);
  for (std::size_t i = 0; i < dh1.data.size(); ++i) dh1.data[i] += dy.data[i];
  Tensor dx;
  conv_back(b.c1, cache.input, dh1, &dx, grad);
  return dx;
}

namespace {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  Tensor out(a.channels + b.channels, a.rows, a.cols);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

}  // namespace

Tensor PredictorModel::forward(const PhotonImage& img, Cache* cache) const {
  check_shape(img.shape());
  const auto levels = static_cast<std::size_t>(arch_.levels);
  if (cache != nullptr) {
    cache->down.assign(levels, {});
    cache->argmax.assign(levels - 1, {});
    cache->up_input.assign(levels - 1, {});
    cache->up.assign(levels - 1, {});
  }
  std::vector<Tensor> skips(levels - 1);
  std::vector<std::uint32_t> scratch_argmax;
  Tensor x = frequency_encode(img, arch_.encoding_frequencies);
  for (std::size_t l = 0; l < levels; ++l) {
    x = block_forward(down_[l], x, cache ? &cache->down[l] : nullptr);
    if (l + 1 < levels) {
      skips[l] = x;
      x = kernels::maxpool2x2_forward(x, cache ? cache->argmax[l] : scratch_argmax);
    }
  }
  const std::span<const double> p(params_);
  for (std::size_t l = levels - 1; l-- > 0;) {
    const TConv& t = upconv_[l];
    Tensor u = kernels::conv_transpose2x2_forward(
        x, p.subspan(t.w, t.weight_count()), p.subspan(t.b, static_cast<std::size_t>(t.out)),
        t.out);
    if (cache != nullptr) cache->up_input[l] = std::move(x);
    x = block_forward(up_[l], concat_channels(u, skips[l]), cache ? &cache->up[l] : nullptr);
  }
  Tensor z = conv(head_, x);
  if (cache != nullptr) cache->head_input = std::move(x);
  return z;
}

RealGrid PredictorModel::logits(const PhotonImage& img) const {
  Tensor z = forward(img, nullptr);
  return RealGrid(img.shape(), std::move(z.data));
}

namespace {

std::vector<double> softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> f(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    f[i] = std::exp(z[i] - m);
    total += f[i];
  }
  for (double& v : f) v /= total;
  return f;
}

}  // namespace

NormalizedDistribution PredictorModel::predict(const PhotonImage& img) const {
  const Tensor z = forward(img, nullptr);
  return NormalizedDistribution(RealGrid(img.shape(), softmax(z.data)));
}

double PredictorModel::accumulate_gradient(const PhotonImage& input, const PhotonImage& target,
                                           std::span<double> grad) const {
  require_same_shape(input.shape(), target.shape(), "training pair");
  const std::uint64_t t_total = total_photons(target);
  if (t_total == 0) throw ZeroPhotonError("loss needs at least one target photon");
  if (grad.size() != params_.size()) throw ShapeError("gradient buffer size mismatch");

  Cache cache;
  const Tensor z = forward(input, &cache);
  const std::vector<double> f = softmax(z.data);
  const double n = static_cast<double>(input.size());
  const double t = static_cast<double>(t_total);

  double loss = 0.0;
  double counted = 0.0;
  Tensor dz(1, z.rows, z.cols);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double ti = static_cast<double>(target[i]);
    if (f[i] >= kLossProbabilityFloor) {
      counted += ti;
      dz.data[i] = -ti;
      if (ti > 0.0) loss -= ti * std::log(f[i]);
    } else if (ti > 0.0) {
      loss -= ti * std::log(kLossProbabilityFloor);
    }
  }
  for (std::size_t i = 0; i < f.size(); ++i) dz.data[i] = (dz.data[i] + f[i] * counted) / (n * t);
  loss /= n * t;

  const auto levels = static_cast<std::size_t>(arch_.levels);
  const std::span<const double> p(params_);
  Tensor dx;
  conv_back(head_, cache.head_input, dz, &dx, grad);

  std::vector<Tensor> dskip(levels - 1);
  for (std::size_t l = 0; l + 1 < levels; ++l) {
    Tensor dcat = block_backward(up_[l], cache.up[l], std::move(dx), grad);
    const int ch = arch_.channels_at(static_cast<int>(l));
    const auto half = dcat.plane_size() * static_cast<std::size_t>(ch);
    Tensor du(ch, dcat.rows, dcat.cols);
    std::copy(dcat.data.begin(), dcat.data.begin() + static_cast<std::ptrdiff_t>(half), du.data.begin());
    dskip[l] = Tensor(ch, dcat.rows, dcat.cols);
    std::copy(dcat.data.begin() + static_cast<std::ptrdiff_t>(half), dcat.data.end(),
              dskip[l].data.begin());
    const TConv& tc = upconv_[l];
    kernels::conv_transpose2x2_backward(cache.up_input[l], p.subspan(tc.w, tc.weight_count()),
                                        du, &dx, grad.subspan(tc.w, tc.weight_count()),
                                        grad.subspan(tc.b, static_cast<std::size_t>(tc.out)));
  }
  for (std::size_t l = levels; l-- > 0;) {
    if (l + 1 < levels) {
      const Tensor& out = cache.down[l].out;
      dx = kernels::maxpool2x2_backward(dx, cache.argmax[l], out.rows, out.cols);
      for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dskip[l].data[i];
    }
    dx = block_backward(down_[l], cache.down[l], std::move(dx), grad);
  }
  return loss;
}

NormalizedDistribution predict(const PredictorModel& model, const PhotonImage& img) {
  return model.predict(img);
}

double gap_loss(const NormalizedDistribution& prediction, const PhotonImage& target) {
  require_same_shape(prediction.shape(), target.shape(), "gap_loss");
  const std::uint64_t t_total = total_photons(target);
  if (t_total == 0) throw ZeroPhotonError("loss needs at least one target photon");
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 0) continue;
    acc += static_cast<double>(target[i]) * std::log(std::max(prediction[i], kLossProbabilityFloor));
  }
  return -acc / (static_cast<double>(target.size()) * static_cast<double>(t_total));
}

std::vector<double> loss_gradient(const PredictorModel& model, const PhotonImage& input,
                                  const PhotonImage& target) {
  std::vector<double> grad(model.parameter_count(), 0.0);
  model.accumulate_gradient(input, target, grad);
  return grad;
}

BatchGradient batch_loss_gradient(const PredictorModel& model, std::span<const SplitPair> batch) {
  const std::size_t count = batch.size();
  const std::size_t np = model.parameter_count();
  std::vector<std::vector<double>> grads(count);
  std::vector<double> losses(count, 0.0);
  // Exceptions cannot cross the parallel region; failures are replayed below.
  std::vector<int> failed(count, 0);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t k = 0; k < count; ++k) {
    grads[k].assign(np, 0.0);
    try {
      losses[k] = model.accumulate_gradient(batch[k].input, batch[k].target, grads[k]);
    } catch (const std::exception&) {
      failed[k] = 1;
    }
  }
  for (std::size_t k = 0; k < count; ++k) {
    if (failed[k]) {
      // Re-run serially to surface the original exception type.
      std::vector<double> scratch(np, 0.0);
      model.accumulate_gradient(batch[k].input, batch[k].target, scratch);
    }
  }
  BatchGradient out{0.0, std::vector<double>(np, 0.0)};
  for (std::size_t k = 0; k < count; ++k) {
    out.loss_sum += losses[k];
    for (std::size_t i = 0; i < np; ++i) out.grad_sum[i] += grads[k][i];
  }
  return out;
}

}  // namespace gap
