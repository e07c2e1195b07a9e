#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>

#include "gap/oracle.hpp"
#include "gap/sampler.hpp"
#include "test_support.hpp"

namespace gap {
namespace {

// Predicts a fixed map regardless of the input.
class FixedPredictor final : public Predictor {
 public:
  explicit FixedPredictor(NormalizedDistribution d) : d_(std::move(d)) {}
  NormalizedDistribution predict(const PhotonImage&) const override { return d_; }

 private:
  NormalizedDistribution d_;
};

FixedPredictor uniform_predictor(Shape shape) {
  return FixedPredictor(NormalizedDistribution(RealGrid(shape, 1.0 / shape.size())));
}

SamplerConfig growth(std::uint64_t target) {
  SamplerConfig cfg;
  cfg.target_photons = target;
  return cfg;
}

TEST(SamplerConfig, Validation) {
  SamplerConfig cfg;
  cfg.beta = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SamplerConfig{};
  cfg.target_photons = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(MmseDenoise, ScalesPredictionByPhotonCount) {
  Rng rng(101);
  const auto model = uniform_predictor({4, 4});
  const auto img = add(testing::random_image({4, 4}, 7, rng), PhotonImage(4, 4, 1));
  const auto out = mmse_denoise(model, img);
  EXPECT_NEAR(sum(out), static_cast<double>(total_photons(img)), 1e-9);
  EXPECT_EQ(mmse_denoise(model, img), out);
  EXPECT_THROW(mmse_denoise(model, PhotonImage(4, 4)), ZeroPhotonError);
}

TEST(MmseDenoise, OracleMatchesMmseEstimateScaling) {
  const auto prior = SignalPrior::uniform({RealGrid({1, 2}, {2.0, 1.0}), RealGrid({1, 2}, {1.0, 2.0})});
  const OraclePredictor oracle(prior);
  const auto out = mmse_denoise(oracle, PhotonImage({1, 2}, {1, 0}));
  EXPECT_NEAR(out[0], 5.0 / 9.0, 1e-12);
  EXPECT_NEAR(out[1], 4.0 / 9.0, 1e-12);
}

TEST(StepSize, MaxClauseAndTruncation) {
  auto cfg = growth(1'000'000);
  EXPECT_EQ(step_size(0, cfg), 1.0);
  EXPECT_EQ(step_size(5, cfg), 1.0);
  EXPECT_DOUBLE_EQ(step_size(1000, cfg), 100.0);
  cfg.target_photons = 1050;
  EXPECT_EQ(step_size(1000, cfg), 50.0);
  cfg.truncate_final_step = false;
  EXPECT_DOUBLE_EQ(step_size(1000, cfg), 100.0);
}

TEST(GapStep, EmptyCanvasAddsOnePhotonOnAverage) {
  const auto model = uniform_predictor({4, 4});
  Rng rng(102);
  const int trials = 20000;
  double total = 0.0;
  for (int t = 0; t < trials; ++t) total += static_cast<double>(total_photons(gap_step(model, PhotonImage(4, 4), growth(10), rng)));
  EXPECT_NEAR(total / trials, 1.0, 5.0 * std::sqrt(1.0 / trials));
}

TEST(GapStep, ExpectedIncrementIsTenPercent) {
  const auto model = uniform_predictor({8, 8});
  const PhotonImage img(8, 8, 1000 / 64);
  PhotonImage start = img;
  start[0] += 1000 - total_photons(img);
  ASSERT_EQ(total_photons(start), 1000u);
  Rng rng(103);
  const int trials = 10000;
  double added = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto next = gap_step(model, start, growth(1'000'000), rng);
    added += static_cast<double>(total_photons(next) - total_photons(start));
  }
  // Poisson(100) increments: 5 sigma of the mean is 5 * 10 / 100 = 0.5.
  EXPECT_NEAR(added / trials, 100.0, 5.0 * std::sqrt(100.0 / trials));
}

TEST(GapStep, MonotoneAndDeterministic) {
  Rng src(104);
  const auto model = FixedPredictor(normalize(testing::random_signal({5, 5}, 0.1, 1.0, src)));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto img = testing::random_image({5, 5}, 30, src);
    Rng a(seed), b(seed);
    const auto next = gap_step(model, img, growth(1'000'000), a);
    EXPECT_EQ(gap_step(model, img, growth(1'000'000), b), next);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_GE(next[i], img[i]);
  }
}

TEST(GapStep, LiteralLambdaScalesByPixelCount) {
  const auto model = uniform_predictor({4, 4});
  auto cfg = growth(1'000'000);
  cfg.literal_lambda = true;
  Rng rng(105);
  const int trials = 5000;
  double total = 0.0;
  for (int t = 0; t < trials; ++t) total += static_cast<double>(total_photons(gap_step(model, PhotonImage(4, 4), cfg, rng)));
  EXPECT_NEAR(total / trials, 16.0, 5.0 * std::sqrt(16.0 / trials));
}

TEST(GapStep, SinglePhotonMode) {
  const auto model = uniform_predictor({3, 3});
  auto cfg = growth(100);
  cfg.single_photon = true;
  Rng rng(106);
  const auto out = gap_step(model, PhotonImage(3, 3, 4), cfg, rng);
  EXPECT_EQ(total_photons(out), 37u);
}

TEST(Accumulate, SinglePhotonTargetFromEmpty) {
  const auto model = uniform_predictor({4, 4});
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    auto cfg = growth(1);
    cfg.record_trajectory = true;
    const auto acc = accumulate(model, PhotonImage(4, 4), cfg, rng);
    EXPECT_EQ(total_photons(acc.image), 1u);
    for (int t = 0; t + 1 < static_cast<int>(acc.trajectory.size()) - 1; ++t) {
      EXPECT_EQ(total_photons(acc.trajectory[t + 1]), 0u);
    }
  }
}

TEST(Accumulate, ReachesTargetMonotonically) {
  Rng src(107);
  const auto model = FixedPredictor(normalize(testing::random_signal({6, 6}, 0.1, 1.0, src)));
  auto cfg = growth(5000);
  cfg.record_trajectory = true;
  Rng rng(108);
  const auto acc = accumulate(model, PhotonImage(6, 6), cfg, rng);
  EXPECT_GE(total_photons(acc.image), 5000u);
  ASSERT_EQ(acc.trajectory.size(), static_cast<std::size_t>(acc.steps) + 1);
  EXPECT_EQ(acc.trajectory.back(), acc.image);
  for (std::size_t t = 1; t < acc.trajectory.size(); ++t) {
    for (std::size_t i = 0; i < acc.image.size(); ++i) EXPECT_GE(acc.trajectory[t][i], acc.trajectory[t - 1][i]);
  }
}

// Geometric growth: from N0 = 100 with beta = 0.1 each step multiplies the
// count by 1.1 on average, so reaching 10^4 takes about ln(100)/ln(1.1) = 48.3
// steps.
TEST(Accumulate, StepCountFollowsGeometricGrowth) {
  const auto model = uniform_predictor({16, 16});
  PhotonImage start(16, 16);
  for (std::size_t i = 0; i < 100; ++i) start[i] = 1;
  auto cfg = growth(10'000);
  cfg.truncate_final_step = false;
  std::vector<int> steps;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Rng rng(seed);
    steps.push_back(accumulate(model, start, cfg, rng).steps);
  }
  double mean = 0.0;
  for (int s : steps) mean += s;
  mean /= steps.size();
  EXPECT_GE(mean, 48.0);
  EXPECT_LE(mean, 50.0);
  for (int s : steps) {
    EXPECT_GE(s, 46);
    EXPECT_LE(s, 51);
  }
}

TEST(Accumulate, DiversityFromTheSameStart) {
  Rng src(109);
  const auto model = FixedPredictor(normalize(testing::random_signal({8, 8}, 0.1, 1.0, src)));
  const auto start = testing::random_image({8, 8}, 2, src);
  Rng a(1), b(2);
  const auto x = accumulate(model, start, growth(2000), a).image;
  const auto y = accumulate(model, start, growth(2000), b).image;
  EXPECT_NE(x, y);
  EXPECT_GE(total_photons(x), 2000u);
  EXPECT_GE(total_photons(y), 2000u);
  Rng c(1);
  EXPECT_EQ(accumulate(model, start, growth(2000), c).image, x);
}

TEST(Accumulate, TruncationEndsExactlyOnTarget) {
  Rng src(114);
  const auto model = FixedPredictor(normalize(testing::random_signal({8, 8}, 0.0, 1.0, src)));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    EXPECT_EQ(total_photons(accumulate(model, PhotonImage(8, 8), growth(10'000), rng).image), 10'000u);
  }
}

TEST(Accumulate, FinalStepFollowsPrediction) {
  const auto model = FixedPredictor(NormalizedDistribution(RealGrid({1, 3}, {0.5, 0.0, 0.5})));
  Rng rng(115);
  const int trials = 20000;
  double first = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto img = accumulate(model, PhotonImage(1, 3), growth(1), rng).image;
    EXPECT_EQ(img[1], 0u);
    first += static_cast<double>(img[0]);
  }
  EXPECT_NEAR(first / trials, 0.5, 5.0 * std::sqrt(0.25 / trials));
}

// With the exact oracle for a delta prior, every step adds Poisson photons in
// proportion to s*, so the expected final image is E[total] * normalize(s*).
TEST(Accumulate, OracleDeltaPriorMeansMatchSignal) {
  Rng src(110);
  const auto signal = testing::random_signal({3, 3}, 0.2, 1.0, src);
  const OraclePredictor oracle(SignalPrior::delta(signal));
  const auto s = normalize(signal);
  const int runs = 10000;
  std::vector<double> mean(9, 0.0), sq(9, 0.0);
  double total = 0.0;
  for (int r = 0; r < runs; ++r) {
    Rng rng = derive_stream(111, r);
    const auto img = accumulate(oracle, PhotonImage(3, 3), growth(200), rng).image;
    total += static_cast<double>(total_photons(img));
    for (std::size_t i = 0; i < 9; ++i) {
      mean[i] += static_cast<double>(img[i]);
      sq[i] += static_cast<double>(img[i]) * static_cast<double>(img[i]);
    }
  }
  total /= runs;
  for (std::size_t i = 0; i < 9; ++i) {
    const double m = mean[i] / runs;
    const double var = sq[i] / runs - m * m;
    EXPECT_NEAR(m, total * s[i], 5.0 * std::sqrt(var / runs)) << i;
    EXPECT_NEAR(m, 200.0 * s[i], 5.0 * std::sqrt(var / runs) + 200.0 * s[i] * 0.01) << i;
  }
}

TEST(ExpertRegistry, SingleEntryCoversEverything) {
  auto model = std::make_shared<FixedPredictor>(uniform_predictor({4, 4}));
  const auto reg = ExpertRegistry::single(model);
  Rng rng(112);
  for (int t = 0; t < 50; ++t) {
    EXPECT_EQ(&select_expert(reg, testing::random_image({4, 4}, 1000, rng)), model.get());
  }
  EXPECT_EQ(&select_expert(reg, PhotonImage(4, 4)), model.get());
}

TEST(ExpertRegistry, HalfOpenRangesAndEmptyImage) {
  auto low = std::make_shared<FixedPredictor>(uniform_predictor({2, 2}));
  auto high = std::make_shared<FixedPredictor>(uniform_predictor({2, 2}));
  const double inf = std::numeric_limits<double>::infinity();
  const ExpertRegistry reg({{-inf, 0.0, low}, {0.0, inf, high}});
  // 4 photons on 4 pixels is exactly 0 dB: the upper edge of the low range.
  EXPECT_EQ(&select_expert(reg, PhotonImage(2, 2, 1)), high.get());
  EXPECT_EQ(&select_expert(reg, PhotonImage({2, 2}, {1, 0, 0, 0})), low.get());
  EXPECT_EQ(&select_expert(reg, PhotonImage(2, 2)), low.get());
}

TEST(ExpertRegistry, CoverageErrors) {
  auto m = std::make_shared<FixedPredictor>(uniform_predictor({2, 2}));
  EXPECT_THROW(ExpertRegistry({{-10.0, 0.0, m}, {1.0, 5.0, m}}), RegistryCoverageError);
  EXPECT_THROW(ExpertRegistry({{0.0, 5.0, m}, {-10.0, 0.0, m}}), RegistryCoverageError);
  EXPECT_THROW(ExpertRegistry(std::vector<ExpertRegistry::Entry>{}), RegistryCoverageError);
  const ExpertRegistry bounded({{-10.0, 0.0, m}});
  EXPECT_THROW(select_expert(bounded, PhotonImage(2, 2, 5)), RegistryCoverageError);
}

TEST(Accumulate, RegistryDispatchesAsPhotonsGrow) {
  // Each expert predicts a different pixel, so the photon layout shows which
  // expert produced each step.
  auto left = std::make_shared<FixedPredictor>(NormalizedDistribution(RealGrid({1, 2}, {1.0, 0.0})));
  auto right = std::make_shared<FixedPredictor>(NormalizedDistribution(RealGrid({1, 2}, {0.0, 1.0})));
  const double inf = std::numeric_limits<double>::infinity();
  // 20 photons on 2 pixels is 10 dB.
  const ExpertRegistry reg({{-inf, 10.0, left}, {10.0, inf, right}});
  auto cfg = growth(1000);
  cfg.record_trajectory = true;
  Rng rng(113);
  const auto acc = accumulate(reg, PhotonImage(1, 2), cfg, rng);
  for (std::size_t t = 1; t < acc.trajectory.size(); ++t) {
    const auto before = total_photons(acc.trajectory[t - 1]);
    const bool right_added = acc.trajectory[t][1] > acc.trajectory[t - 1][1];
    const bool left_added = acc.trajectory[t][0] > acc.trajectory[t - 1][0];
    if (before < 20) {
      EXPECT_FALSE(right_added);
    } else {
      EXPECT_FALSE(left_added);
    }
  }
}

TEST(Trajectory, CsvRows) {
  const std::vector<PhotonImage> traj{PhotonImage(2, 2), PhotonImage(2, 2, 1), PhotonImage(2, 2, 10)};
  const std::string path = ::testing::TempDir() + "traj.csv";
  write_trajectory_csv(path, traj);
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "step,total_photons,pseudo_psnr");
  EXPECT_EQ(lines[1], "0,0,-inf");
  EXPECT_EQ(lines[2], "1,4,0");
  EXPECT_EQ(lines[3], "2,40,10");
}

}  // namespace
}  // namespace gap
