#include "gap/oracle.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace gap {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> signal_totals(const SignalPrior& prior) {
  std::vector<double> totals;
  totals.reserve(prior.support_size());
  for (const auto& s : prior.signals()) totals.push_back(sum(s));
  return totals;
}

}  // namespace

SignalPrior::SignalPrior(std::vector<RealGrid> signals, std::vector<double> weights)
    : signals_(std::move(signals)), weights_(std::move(weights)) {
  if (signals_.empty()) throw InvalidSignalError("prior needs at least one signal");
  if (signals_.size() != weights_.size()) {
    throw InvalidSignalError("prior has a different number of signals and weights");
  }
  for (const auto& s : signals_) {
    require_same_shape(s.shape(), signals_.front().shape(), "prior signal");
    for (double v : s) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw InvalidSignalError("prior signal has a negative or non-finite entry");
      }
    }
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw InvalidSignalError("prior weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightTolerance) {
    throw InvalidSignalError("prior weights must sum to 1");
  }
}

SignalPrior SignalPrior::uniform(std::vector<RealGrid> signals) {
  const std::size_t k = signals.size();
  return SignalPrior(std::move(signals), std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

SignalPrior SignalPrior::delta(RealGrid signal) {
  return SignalPrior({std::move(signal)}, {1.0});
}

double log_likelihood(const RealGrid& signal, const PhotonImage& img) {
  require_same_shape(signal.shape(), img.shape(), "log_likelihood");
  double ll = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double s = signal[i];
    const auto x = img[i];
    if (x == 0) {
      ll -= s;
      continue;
    }
    if (s == 0.0) return kNegInf;
    const double xd = static_cast<double>(x);
    ll += xd * std::log(s) - s - std::lgamma(xd + 1.0);
  }
  return ll;
}

PosteriorWeights posterior(const SignalPrior& prior, const PhotonImage& img) {
  const std::size_t k = prior.support_size();
  std::vector<double> log_w(k, kNegInf);
  double best = kNegInf;
  for (std::size_t j = 0; j < k; ++j) {
    const double w = prior.weights()[j];
    if (w == 0.0) continue;
    log_w[j] = std::log(w) + log_likelihood(prior.signals()[j], img);
    best = std::max(best, log_w[j]);
  }
  if (!std::isfinite(best)) {
    throw DegeneratePosteriorError("observation is impossible under every prior signal");
  }
  PosteriorWeights post{std::vector<double>(k, 0.0)};
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (log_w[j] == kNegInf) continue;
    post.weights[j] = std::exp(log_w[j] - best);
    total += post.weights[j];
  }
  for (double& w : post.weights) w /= total;
  return post;
}

RealGrid mmse_estimate(const SignalPrior& prior, const PhotonImage& img) {
  const auto post = posterior(prior, img);
  RealGrid est(prior.shape(), 0.0);
  for (std::size_t j = 0; j < prior.support_size(); ++j) {
    const double w = post.weights[j];
    if (w == 0.0) continue;
    const auto& s = prior.signals()[j];
    for (std::size_t i = 0; i < est.size(); ++i) est[i] += w * s[i];
  }
  return est;
}

NormalizedDistribution next_photon_distribution(const SignalPrior& prior,
                                                const PhotonImage& img) {
  const auto totals = signal_totals(prior);
  for (double t : totals) {
    if (!(t > 0.0)) throw InvalidSignalError("prior signal with zero total intensity");
  }
  const auto post = posterior(prior, img);
  RealGrid probs(prior.shape(), 0.0);
  for (std::size_t j = 0; j < prior.support_size(); ++j) {
    const double w = post.weights[j];
    if (w == 0.0) continue;
    const auto& s = prior.signals()[j];
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] += w * (s[i] / totals[j]);
  }
  return NormalizedDistribution(std::move(probs));
}

double sequence_log_prob(const SignalPrior& prior, const PhotonSequence& seq) {
  require_same_shape(seq.shape, prior.shape(), "sequence_log_prob");
  PhotonImage canvas(seq.shape);
  double log_prob = 0.0;
  for (std::size_t pos : seq.positions) {
    if (pos >= canvas.size()) throw IndexError("photon position outside image");
    const double p = next_photon_distribution(prior, canvas)[pos];
    if (p == 0.0) return kNegInf;
    log_prob += std::log(p);
    ++canvas[pos];
  }
  return log_prob;
}

SignalPrior read_prior(std::istream& in) {
  std::stringstream clean;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    clean << line << '\n';
  }
  std::size_t rows = 0, cols = 0, k = 0;
  if (!(clean >> rows >> cols >> k) || rows == 0 || cols == 0 || k == 0) {
    throw FormatError("prior fixture: expected header line 'H W K'");
  }
  std::vector<RealGrid> signals;
  std::vector<double> weights;
  for (std::size_t j = 0; j < k; ++j) {
    double w = 0.0;
    if (!(clean >> w)) throw FormatError("prior fixture: missing weight for block " + std::to_string(j));
    RealGrid s(rows, cols);
    for (double& v : s) {
      if (!(clean >> v)) throw FormatError("prior fixture: truncated grid in block " + std::to_string(j));
    }
    weights.push_back(w);
    signals.push_back(std::move(s));
  }
  return SignalPrior(std::move(signals), std::move(weights));
}

SignalPrior read_prior_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open prior fixture " + path);
  return read_prior(in);
}

void write_prior(std::ostream& out, const SignalPrior& prior) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << prior.shape().rows << ' ' << prior.shape().cols << ' ' << prior.support_size() << '\n';
  for (std::size_t j = 0; j < prior.support_size(); ++j) {
    out << prior.weights()[j] << '\n';
    const auto& s = prior.signals()[j];
    for (std::size_t r = 0; r < s.rows(); ++r) {
      for (std::size_t c = 0; c < s.cols(); ++c) out << (c ? " " : "") << s(r, c);
      out << '\n';
    }
  }
}

}  // namespace gap
