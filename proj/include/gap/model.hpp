#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gap/core.hpp"
#include "gap/kernels.hpp"
#include "gap/noise.hpp"
#include "gap/predictor.hpp"

namespace gap {

struct ArchitectureConfig {
  int levels = 6;
  int base_channels = 28;
  int encoding_frequencies = 10;
  // Zero padding lets the network see the image border, which it needs to
  // place mass correctly on an almost empty canvas.
  Padding padding = Padding::zero;

  // Reduced network used for CPU-scale runs and tests.
  static ArchitectureConfig desk() { return {4, 16, 10, Padding::zero}; }

  void validate() const;
  int channels_at(int level) const { return base_channels << level; }
  // Height and width must be multiples of this.
  std::size_t size_multiple() const { return std::size_t{1} << (levels - 1); }
  bool operator==(const ArchitectureConfig&) const = default;
};

// Channel k holds sin(x / 10^k), k = 0 .. n_freq-1.
Tensor frequency_encode(const PhotonImage& img, int n_freq);

// Floor applied to predicted probabilities inside the loss logarithm.
inline constexpr double kLossProbabilityFloor = 1e-12;

// Residual U-Net with a softmax over all pixels: PhotonImage -> probability map.
// Parameters live in one flat vector; predict() is const and thread-safe.
class PredictorModel final : public Predictor {
 public:
  PredictorModel(const ArchitectureConfig& arch, std::uint64_t init_seed);
  PredictorModel(const ArchitectureConfig& arch, std::vector<double> parameters);

  const ArchitectureConfig& architecture() const noexcept { return arch_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  // Throws ShapeError unless both sides are positive multiples of
  // architecture().size_multiple().
  void check_shape(const Shape& shape) const;

  NormalizedDistribution predict(const PhotonImage& img) const override;
  RealGrid logits(const PhotonImage& img) const;

  // Adds d gap_loss(predict(input), target) / d theta into grad and returns
  // the loss.
  double accumulate_gradient(const PhotonImage& input, const PhotonImage& target,
                             std::span<double> grad) const;

 private:
  struct Conv {
    int in = 0, out = 0, k = 3;
    std::size_t w = 0, b = 0;
    std::size_t weight_count() const { return static_cast<std::size_t>(in) * out * k * k; }
  };
  struct TConv {
    int in = 0, out = 0;
    std::size_t w = 0, b = 0;
    std::size_t weight_count() const { return static_cast<std::size_t>(in) * out * 4; }
  };
  struct Block {
    Conv c1, c2, c3;
  };
  struct BlockCache {
    Tensor input, h1, h2, out;
  };
  struct Cache {
    std::vector<BlockCache> down;
    std::vector<std::vector<std::uint32_t>> argmax;
    std::vector<Tensor> up_input;  // decoder input at each upsampling stage
    std::vector<BlockCache> up;
    Tensor head_input;
  };

  void build_layout();
  Tensor conv(const Conv& c, const Tensor& x) const;
  void conv_back(const Conv& c, const Tensor& x, const Tensor& dy, Tensor* dx,
                 std::span<double> grad) const;
  Tensor block_forward(const Block& b, const Tensor& x, BlockCache* cache) const;
  Tensor block_backward(const Block& b, const BlockCache& cache, Tensor dy,
                        std::span<double> grad) const;
  Tensor forward(const PhotonImage& img, Cache* cache) const;

  ArchitectureConfig arch_;
  std::vector<Block> down_;
  std::vector<TConv> upconv_;  // upconv_[l] maps level l+1 to level l
  std::vector<Block> up_;      // up_[l] consumes concat(upsampled, skip) at level l
  Conv head_;
  std::vector<double> params_;
};

NormalizedDistribution predict(const PredictorModel& model, const PhotonImage& img);

// -(1 / (n |target|)) sum_i ln f_i * target_i. Throws ZeroPhotonError for an
// empty target.
double gap_loss(const NormalizedDistribution& prediction, const PhotonImage& target);

std::vector<double> loss_gradient(const PredictorModel& model, const PhotonImage& input,
                                  const PhotonImage& target);

struct BatchGradient {
  double loss_sum = 0.0;
  std::vector<double> grad_sum;
};

// Summed (not averaged) loss and gradient over the batch. Examples are
// processed in parallel; the reduction order is fixed, so the result does not
// depend on the thread count.
BatchGradient batch_loss_gradient(const PredictorModel& model,
                                  std::span<const SplitPair> batch);

}  // namespace gap
