#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gap/datasets.hpp"
#include "gap/noise.hpp"
#include "test_support.hpp"

namespace gap {
namespace {

LocalizationTable table_of(std::vector<Localization> records) {
  return LocalizationTable{std::move(records), std::nullopt};
}

TEST(Bin, SingleRecordLandsInFirstPixel) {
  const auto img = bin_localizations(table_of({{0, 10.0, 10.0}}), 20.0, Extent{0, 40, 0, 40});
  EXPECT_EQ(img.shape(), (Shape{2, 2}));
  EXPECT_EQ(img, PhotonImage({2, 2}, {1, 0, 0, 0}));
}

TEST(Bin, UpperEdgeGoesToNextBin) {
  const auto img = bin_localizations(table_of({{0, 20.0, 0.0}}), 20.0, Extent{0, 60, 0, 20});
  EXPECT_EQ(img, PhotonImage({1, 3}, {0, 1, 0}));
}

TEST(Bin, ColumnsFollowXRowsFollowY) {
  const auto img = bin_localizations(table_of({{0, 5.0, 25.0}}), 10.0, Extent{0, 20, 0, 30});
  EXPECT_EQ(img.shape(), (Shape{3, 2}));
  EXPECT_EQ(img(2, 0), 1u);
}

TEST(Bin, ConservesInExtentRecords) {
  Rng rng(201);
  std::uniform_real_distribution<double> coord(-50.0, 250.0);
  std::vector<Localization> recs;
  std::uint64_t inside = 0;
  for (int i = 0; i < 5000; ++i) {
    const double x = coord(rng), y = coord(rng);
    if (x >= 0 && x < 200 && y >= 0 && y < 200) ++inside;
    recs.push_back({i, x, y});
  }
  const auto img = bin_localizations(table_of(recs), 28.0, Extent{0, 200, 0, 200});
  EXPECT_EQ(total_photons(img), inside);
}

TEST(Bin, EmptyTableAndErrors) {
  EXPECT_EQ(total_photons(bin_localizations(table_of({}), 20.0, Extent{0, 40, 0, 40})), 0u);
  EXPECT_THROW(bin_localizations(table_of({}), 20.0, Extent{0, 0, 0, 40}), RangeError);
  EXPECT_THROW(bin_localizations(table_of({}), 0.0, Extent{0, 40, 0, 40}), RangeError);
}

TEST(CoveringExtent, HoldsEveryRecord) {
  const auto t = table_of({{0, 3.0, 5.0}, {1, 41.0, 19.9}});
  const Extent e = covering_extent(t, 20.0);
  const auto img = bin_localizations(t, 20.0, e);
  EXPECT_EQ(total_photons(img), 2u);
  EXPECT_EQ(e.x_min, 0.0);
  EXPECT_EQ(e.y_min, 0.0);
}

TEST(LocalizationCsv, ParsesNamedColumns) {
  std::istringstream in("id,y_nm,frame,x_nm\n1,2.5,0,7.5\n2,30,4,1\n");
  const auto t = read_localizations_csv(in);
  ASSERT_EQ(t.records.size(), 2u);
  EXPECT_EQ(t.records[0].frame, 0);
  EXPECT_EQ(t.records[0].x_nm, 7.5);
  EXPECT_EQ(t.records[0].y_nm, 2.5);
  EXPECT_EQ(t.records[1].frame, 4);
}

TEST(LocalizationCsv, RejectsMalformedInput) {
  std::istringstream missing("frame,x_nm\n0,1\n");
  EXPECT_THROW(read_localizations_csv(missing), FormatError);
  std::istringstream bad("frame,x_nm,y_nm\n0,abc,1\n");
  EXPECT_THROW(read_localizations_csv(bad), FormatError);
  std::istringstream negative("frame,x_nm,y_nm\n-1,1,1\n");
  EXPECT_THROW(read_localizations_csv(negative), FormatError);
  std::istringstream short_row("frame,x_nm,y_nm\n0,1\n");
  EXPECT_THROW(read_localizations_csv(short_row), FormatError);
}

TEST(Thin, TotalFollowsBinomial) {
  PhotonImage img(100, 100, 100);
  ASSERT_EQ(total_photons(img), 1'000'000u);
  Rng rng(202);
  const auto out = thin(img, 0.05, rng);
  const double sd = std::sqrt(1e6 * 0.05 * 0.95);
  EXPECT_NEAR(static_cast<double>(total_photons(out)), 5e4, 5.0 * sd);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(out[i], img[i]);
}

TEST(Thin, Endpoints) {
  Rng rng(203);
  const auto img = testing::random_image({6, 6}, 20, rng);
  EXPECT_EQ(thin(img, 1.0, rng), img);
  EXPECT_EQ(total_photons(thin(img, 0.0, rng)), 0u);
}

TEST(SumFrames, IdentityTotalAndConservation) {
  Rng rng(204);
  std::vector<PhotonImage> stack;
  for (int i = 0; i < 10; ++i) stack.push_back(testing::random_image({3, 4}, 9, rng));
  const auto same = sum_frames(stack, 1);
  EXPECT_EQ(same, stack);

  const auto all = sum_frames(stack, 10);
  ASSERT_EQ(all.size(), 1u);
  PhotonImage expect(3, 4);
  for (const auto& f : stack) expect = add(expect, f);
  EXPECT_EQ(all[0], expect);

  const auto groups = sum_frames(stack, 4);
  ASSERT_EQ(groups.size(), 2u);
  std::uint64_t consumed = 0, produced = 0;
  for (int i = 0; i < 8; ++i) consumed += total_photons(stack[i]);
  for (const auto& g : groups) produced += total_photons(g);
  EXPECT_EQ(produced, consumed);
}

TEST(SumFrames, Errors) {
  std::vector<PhotonImage> stack{PhotonImage(2, 2), PhotonImage(2, 3)};
  EXPECT_THROW(sum_frames(stack, 2), ShapeError);
  EXPECT_THROW(sum_frames(stack, 0), RangeError);
}

TEST(Split, PublishedCounts) {
  const auto a = split_indices(120, 4, 0);
  EXPECT_EQ(a.train.size(), 90u);
  EXPECT_EQ(a.test.size(), 30u);
  const auto b = split_indices(33, 4, 0);
  EXPECT_EQ(b.train.size(), 24u);
  EXPECT_EQ(b.test.size(), 9u);
  const auto c = split_indices(133, 4, 3);
  EXPECT_EQ(c.test.size(), 33u);
  EXPECT_EQ(c.train.size(), 100u);
  EXPECT_EQ(split_indices(133, 4, 0).test.size(), 34u);
}

TEST(Split, EveryOtherImage) {
  std::vector<PhotonImage> imgs;
  for (std::uint64_t v = 1; v <= 4; ++v) imgs.push_back(PhotonImage(1, 1, v));
  const auto s = split_every_nth(imgs, 2, 0);
  EXPECT_EQ(s.test, (std::vector<PhotonImage>{imgs[0], imgs[2]}));
  EXPECT_EQ(s.train, (std::vector<PhotonImage>{imgs[1], imgs[3]}));
}

TEST(Split, PartitionProperty) {
  for (std::size_t count : {0u, 1u, 7u, 50u}) {
    for (std::size_t n = 2; n < 6; ++n) {
      for (std::size_t off = 0; off < n; ++off) {
        const auto s = split_indices(count, n, off);
        std::vector<std::size_t> all = s.train;
        all.insert(all.end(), s.test.begin(), s.test.end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expect(count);
        std::iota(expect.begin(), expect.end(), 0);
        EXPECT_EQ(all, expect);
      }
    }
  }
  EXPECT_THROW(split_indices(10, 1, 0), RangeError);
  EXPECT_THROW(split_indices(10, 4, 4), RangeError);
}

TEST(ExtractRegions, TilesAboveThreshold) {
  PhotonImage img(4, 6);
  img(0, 0) = 5;
  img(3, 5) = 1;
  EXPECT_EQ(extract_regions(img, 2).size(), 2u);
  EXPECT_EQ(extract_regions(img, 2, 1).size(), 1u);
  EXPECT_EQ(extract_regions(img, 3).size(), 1u);  // row 3 is not a full tile
}

TEST(World, KindNames) {
  for (auto k : {WorldKind::delta, WorldKind::two_template, WorldKind::blob_field}) {
    EXPECT_EQ(parse_world_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_world_kind("gaussian"), ConfigError);
}

TEST(World, DeltaHasOneSignal) {
  Rng rng(205);
  const auto w = make_synthetic_world(WorldKind::delta, {16, 16}, rng);
  EXPECT_EQ(w.prior.signals().size(), 1u);
  EXPECT_NEAR(sum(w.prior.signals()[0]), 1.0, 1e-12);
}

TEST(World, TwoTemplateReproducesOracleFixture) {
  Rng rng(206);
  const auto w = make_synthetic_world(WorldKind::two_template, {1, 2}, rng);
  ASSERT_EQ(w.prior.signals().size(), 2u);
  EXPECT_EQ(w.prior.signals()[0], RealGrid({1, 2}, {2.0, 1.0}));
  EXPECT_EQ(w.prior.signals()[1], RealGrid({1, 2}, {1.0, 2.0}));
  const auto post = posterior(w.prior, PhotonImage({1, 2}, {1, 0}));
  EXPECT_NEAR(post.weights[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(post.weights[1], 1.0 / 3.0, 1e-12);
}

TEST(World, BlobFieldTemplateCount) {
  Rng rng(207);
  const auto w = make_synthetic_world(WorldKind::blob_field, {12, 12}, rng, 5);
  EXPECT_EQ(w.prior.signals().size(), 5u);
}

TEST(World, SampledPseudoPsnrNearRequest) {
  Rng rng(208);
  const auto w = make_synthetic_world(WorldKind::blob_field, {20, 20}, rng);
  for (double db : {0.0, 10.0, 20.0}) {
    for (int t = 0; t < 20; ++t) {
      const auto smp = sample_world(w, db, rng);
      EXPECT_NEAR(sum(smp.mean), 400.0 * intensity_for_pseudo_psnr(db), 1e-9 * sum(smp.mean));
      if (total_photons(smp.image) == 0) continue;
      const double got = 10.0 * std::log10(static_cast<double>(total_photons(smp.image)) / 400.0);
      EXPECT_NEAR(got, db, 1.0) << db;
    }
  }
}

}  // namespace
}  // namespace gap
