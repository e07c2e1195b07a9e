#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "gap/datasets.hpp"
#include "gap/metrics.hpp"
#include "gap/noise.hpp"
#include "gap/oracle.hpp"
#include "gap/sampler.hpp"
#include "test_support.hpp"

namespace gap {
namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(ScaleGroundTruth, Examples) {
  const NormalizedDistribution u(RealGrid({4, 4}, 1.0 / 16.0));
  EXPECT_EQ(scale_ground_truth(u, 4.0, 16), RealGrid({4, 4}, 4.0));
  Rng rng(501);
  const auto s = normalize(testing::random_signal({5, 5}, 0.0, 1.0, rng));
  EXPECT_NEAR(sum(scale_ground_truth(s, 2.5, 25)), 62.5, 1e-9);
  EXPECT_EQ(scale_ground_truth(s, 1.0, 1), s.grid());
  EXPECT_THROW(scale_ground_truth(s, 0.0, 25), InvalidIntensityError);
}

TEST(Psnr, Examples) {
  const RealGrid gt({3, 3}, 4.0);
  EXPECT_EQ(psnr(gt, gt), std::numeric_limits<double>::infinity());
  EXPECT_NEAR(psnr(RealGrid({3, 3}, 2.0), gt), 10.0 * std::log10(4.0), 1e-12);
  EXPECT_NEAR(psnr(RealGrid({3, 3}, 2.0), gt), 6.0206, 1e-4);
  EXPECT_THROW(psnr(gt, RealGrid({3, 3}, 0.0)), InvalidGroundTruthError);
  EXPECT_THROW(psnr(RealGrid(Shape{3, 2}), gt), ShapeError);
}

TEST(Psnr, ScaleInvariant) {
  Rng rng(502);
  for (int t = 0; t < 50; ++t) {
    const auto gt = testing::random_signal({6, 6}, 0.1, 5.0, rng);
    const auto est = testing::random_signal({6, 6}, 0.1, 5.0, rng);
    const double c = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
    RealGrid gc = gt, ec = est;
    for (double& v : gc) v *= c;
    for (double& v : ec) v *= c;
    EXPECT_NEAR(psnr(ec, gc), psnr(est, gt), 1e-9);
  }
}

TEST(Psnr, ShotNoiseMatchesPseudoPsnr) {
  const RealGrid flat({250, 400}, 4.0);
  Rng rng(503);
  const auto noisy = to_real(sample_shot_noise(flat, rng));
  EXPECT_NEAR(psnr(noisy, flat), pseudo_psnr(4.0), 0.5);
  EXPECT_NEAR(pseudo_psnr(4.0), 6.0206, 1e-4);
}

TEST(PooledPsnr, MatchesSingleImageAndPoolsErrors) {
  const RealGrid gt({2, 2}, 4.0);
  const std::vector<RealGrid> one_gt{gt}, one_est{RealGrid({2, 2}, 2.0)};
  EXPECT_DOUBLE_EQ(pooled_psnr(one_est, one_gt), psnr(one_est[0], gt));
  // One exact and one off-by-2 estimate: pooled MSE 2, peak 16.
  const std::vector<RealGrid> gts{gt, gt}, ests{gt, RealGrid({2, 2}, 2.0)};
  EXPECT_NEAR(pooled_psnr(ests, gts), 10.0 * std::log10(16.0 / 2.0), 1e-12);
  EXPECT_EQ(pooled_psnr(gts, gts), std::numeric_limits<double>::infinity());
  EXPECT_THROW(pooled_psnr(one_est, gts), ShapeError);
  EXPECT_THROW(pooled_psnr({}, {}), EmptyDatasetError);
}

TEST(ImagePseudoPsnr, Examples) {
  EXPECT_NEAR(image_pseudo_psnr(PhotonImage(5, 5, 1)), 0.0, 1e-12);
  EXPECT_NEAR(image_pseudo_psnr(PhotonImage(16, 16, 1)), 0.0, 1e-12);
  PhotonImage sparse(100, 100);
  for (std::size_t i = 0; i < 10; ++i) sparse[i * 997] = 1;
  EXPECT_NEAR(image_pseudo_psnr(sparse), -30.0, 1e-12);
  EXPECT_THROW(image_pseudo_psnr(PhotonImage(3, 3)), ZeroPhotonError);
}

TEST(ImagePseudoPsnr, ThinningShiftsByLogP) {
  Rng rng(504);
  const auto img = sample_shot_noise(RealGrid({64, 64}, 20.0), rng);
  for (double p : {0.5, 0.1, 0.01}) {
    const auto thinned = thin(img, p, rng);
    const double n = static_cast<double>(total_photons(img));
    // 5 sigma of the Binomial count, expressed in dB.
    const double tol = 10.0 * std::log10(1.0 + 5.0 * std::sqrt((1.0 - p) / (n * p)));
    EXPECT_NEAR(image_pseudo_psnr(thinned), image_pseudo_psnr(img) + 10.0 * std::log10(p), tol) << p;
  }
}

TEST(FormatDb, Sentinels) {
  EXPECT_EQ(format_db(std::numeric_limits<double>::infinity()), "+inf");
  EXPECT_EQ(format_db(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_db(6.5), "6.5");
}

TEST(SampleStatistics, IdenticalListsGiveZero) {
  Rng rng(505);
  std::vector<PhotonImage> imgs;
  for (int i = 0; i < 12; ++i) imgs.push_back(testing::random_image({16, 16}, 10, rng));
  const auto st = sample_statistics(imgs, imgs);
  EXPECT_EQ(st.mean_intensity_w1, 0.0);
  EXPECT_EQ(st.spectrum_l1, 0.0);
  EXPECT_EQ(st.mean_image_l1, 0.0);
  EXPECT_EQ(st.sample_spectrum.size(), st.reference_spectrum.size());
  EXPECT_GE(st.sample_spectrum.size(), 8u);
}

TEST(SampleStatistics, ShuffleInvariant) {
  Rng rng(506);
  std::vector<PhotonImage> imgs;
  for (int i = 0; i < 15; ++i) imgs.push_back(testing::random_image({8, 12}, 30, rng));
  auto shuffled = imgs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto st = sample_statistics(imgs, shuffled);
  EXPECT_EQ(st.mean_intensity_w1, 0.0);
  EXPECT_EQ(st.spectrum_l1, 0.0);
  EXPECT_EQ(st.mean_image_l1, 0.0);
  const auto a = sample_statistics(imgs, imgs);
  const auto b = sample_statistics(shuffled, shuffled);
  EXPECT_EQ(a.sample_spectrum, b.sample_spectrum);
}

TEST(SampleStatistics, Errors) {
  std::vector<PhotonImage> one{PhotonImage(4, 4, 1)};
  std::vector<PhotonImage> other{PhotonImage(4, 5, 1)};
  EXPECT_THROW(sample_statistics({}, one), EmptyDatasetError);
  EXPECT_THROW(sample_statistics(one, other), ShapeError);
}

// Generated images from the exact delta-prior oracle against fresh shot noise
// with the same totals: every pixel of both averages estimates the same mean.
TEST(SampleStatistics, OracleSamplesMatchShotNoise) {
  Rng rng(507);
  const auto world = make_synthetic_world(WorldKind::delta, {12, 12}, rng);
  const OraclePredictor oracle(world.prior);
  const auto& s = world.prior.signals()[0];
  SamplerConfig cfg;
  cfg.target_photons = 2000;
  const int count = 100;
  std::vector<PhotonImage> generated, reference;
  for (int i = 0; i < count; ++i) {
    generated.push_back(accumulate(oracle, PhotonImage(12, 12), cfg, rng).image);
    const double total = static_cast<double>(total_photons(generated.back()));
    RealGrid mean = s;
    for (double& v : mean) v *= total;
    reference.push_back(sample_shot_noise(mean, rng));
  }
  const auto st = sample_statistics(generated, reference);
  // Each pixel difference of the two averages is roughly normal with variance
  // 2 * 2000 * s_i / count. The mean of 144 such |diff| values concentrates
  // well inside 1.5 times its expectation.
  double bound = 0.0;
  for (double v : s) bound += std::sqrt(2.0 * 2000.0 * v / count) * std::sqrt(2.0 / M_PI);
  bound /= static_cast<double>(s.size());
  EXPECT_LT(st.mean_image_l1, 1.5 * bound);
  EXPECT_LT(st.spectrum_l1, 0.05);
}

TEST(EvalReport, MeanAndFiles) {
  EvalReport r;
  r.add("a", 10.0, -5.0);
  r.add("b", 20.0, -4.0);
  r.metadata["seed"] = "7";
  EXPECT_DOUBLE_EQ(r.mean_psnr(), 15.0);
  const auto csv = ::testing::TempDir() + "report.csv";
  r.write_csv(csv);
  const auto text = slurp(csv);
  EXPECT_NE(text.find("a,10"), std::string::npos);
  EXPECT_NE(text.find("mean,15"), std::string::npos);
  const auto json_path = ::testing::TempDir() + "report.json";
  r.write_json(json_path);
  const auto j = nlohmann::json::parse(slurp(json_path));
  EXPECT_EQ(j.at("metadata").at("seed"), "7");
  EXPECT_DOUBLE_EQ(j.at("mean_psnr_db").get<double>(), 15.0);
}

TEST(EvalReport, InfiniteSentinel) {
  EvalReport r;
  r.add("exact", std::numeric_limits<double>::infinity(), 0.0);
  r.add("b", 20.0, 0.0);
  EXPECT_EQ(r.mean_psnr(), std::numeric_limits<double>::infinity());
  const auto path = ::testing::TempDir() + "inf.json";
  r.write_json(path);
  const auto j = nlohmann::json::parse(slurp(path));
  EXPECT_EQ(j.at("mean_psnr_db"), "+inf");
}

}  // namespace
}  // namespace gap
