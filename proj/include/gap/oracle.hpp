#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gap/core.hpp"
#include "gap/predictor.hpp"

namespace gap {

// Finite prior over clean signals (Poisson means, in photons).
class SignalPrior {
 public:
  static constexpr double kWeightTolerance = 1e-12;

  // Validates shapes, non-negativity and that weights sum to one.
  SignalPrior(std::vector<RealGrid> signals, std::vector<double> weights);

  static SignalPrior uniform(std::vector<RealGrid> signals);
  static SignalPrior delta(RealGrid signal);

  const Shape& shape() const noexcept { return signals_.front().shape(); }
  std::size_t support_size() const noexcept { return signals_.size(); }
  const std::vector<RealGrid>& signals() const noexcept { return signals_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  std::vector<RealGrid> signals_;
  std::vector<double> weights_;
};

struct PosteriorWeights {
  std::vector<double> weights;
};

// sum_i [x_i ln s_i - s_i - ln x_i!]; -inf when a photon hits a zero-mean pixel.
double log_likelihood(const RealGrid& signal, const PhotonImage& img);

PosteriorWeights posterior(const SignalPrior& prior, const PhotonImage& img);

RealGrid mmse_estimate(const SignalPrior& prior, const PhotonImage& img);

// Posterior-weighted average of the normalized prior signals.
NormalizedDistribution next_photon_distribution(const SignalPrior& prior,
                                                const PhotonImage& img);

// Sum of log next-photon probabilities along the sequence; -inf if a photon
// lands on a zero-probability pixel.
double sequence_log_prob(const SignalPrior& prior, const PhotonSequence& seq);

class OraclePredictor final : public Predictor {
 public:
  explicit OraclePredictor(SignalPrior prior) : prior_(std::move(prior)) {}
  NormalizedDistribution predict(const PhotonImage& img) const override {
    return next_photon_distribution(prior_, img);
  }
  const SignalPrior& prior() const noexcept { return prior_; }

 private:
  SignalPrior prior_;
};

// Plain-text prior fixture:
//   H W K
//   then K blocks of: one weight line followed by H rows of W values.
// Blank lines and lines starting with '#' are ignored.
SignalPrior read_prior(std::istream& in);
SignalPrior read_prior_file(const std::string& path);
void write_prior(std::ostream& out, const SignalPrior& prior);

}  // namespace gap
