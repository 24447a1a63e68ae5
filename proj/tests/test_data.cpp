#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "test_util.hpp"
#include "uagan/data.hpp"
#include "uagan/error.hpp"

using uagan::Dataset;
using uagan::GaussianMixtureSpec;
using uagan::PartitionMode;
using uagan::PartitionPlan;

namespace {

std::multiset<std::vector<double>> row_set(const Dataset& d) {
  std::multiset<std::vector<double>> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<double> r(d.rows.row(i).begin(), d.rows.row(i).end());
    r.push_back(d.labels[i]);
    out.insert(std::move(r));
  }
  return out;
}

void expect_bijection(const Dataset& full, const uagan::SitedDataset& sited) {
  std::multiset<std::vector<double>> all;
  std::uint64_t total = 0;
  for (const auto& s : sited.sites) {
    auto rs = row_set(s);
    all.insert(rs.begin(), rs.end());
    total += s.size();
  }
  EXPECT_EQ(total, full.size());
  EXPECT_EQ(all, row_set(full));
  for (std::size_t j = 0; j < sited.num_sites(); ++j) {
    EXPECT_EQ(sited.counts[j], sited.sites[j].size());
    EXPECT_EQ(sited.weights.pi()[j],
              static_cast<double>(sited.counts[j]) / static_cast<double>(total));
  }
}

}  // namespace

TEST(Mixture, SingleCenterMean) {
  GaussianMixtureSpec spec{{{0.0, 0.0}}, 0.25, 10000};
  Dataset d = uagan::gen_gaussian_mixture(spec, 3);
  double s0 = 0, s1 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) s0 += d.rows.at(i, 0), s1 += d.rows.at(i, 1);
  EXPECT_NEAR(s0 / d.size(), 0.0, 0.02);
  EXPECT_NEAR(s1 / d.size(), 0.0, 0.02);
}

TEST(Mixture, ToyLabelsBalanced) {
  Dataset d = uagan::gen_gaussian_mixture(GaussianMixtureSpec::toy(), 1);
  ASSERT_EQ(d.size(), 10000u);
  auto counts = uagan::class_counts(d, 4);
  for (auto c : counts) EXPECT_EQ(c, 2500u);
}

TEST(Mixture, PerModeMeanNearCenter) {
  auto spec = GaussianMixtureSpec::toy();
  Dataset d = uagan::gen_gaussian_mixture(spec, 2);
  const double sigma = std::sqrt(spec.variance);
  for (std::size_t m = 0; m < 4; ++m) {
    double s0 = 0, s1 = 0, n = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] != static_cast<int>(m)) continue;
      s0 += d.rows.at(i, 0), s1 += d.rows.at(i, 1), ++n;
    }
    EXPECT_LE(std::abs(s0 / n - spec.centers[m][0]), 3 * sigma / std::sqrt(n));
    EXPECT_LE(std::abs(s1 / n - spec.centers[m][1]), 3 * sigma / std::sqrt(n));
  }
}

TEST(Mixture, Deterministic) {
  auto a = uagan::gen_gaussian_mixture(GaussianMixtureSpec::toy(), 9);
  auto b = uagan::gen_gaussian_mixture(GaussianMixtureSpec::toy(), 9);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.labels, b.labels);
  auto c = uagan::gen_gaussian_mixture(GaussianMixtureSpec::toy(), 10);
  EXPECT_NE(a.rows, c.rows);
}

TEST(Mixture, InvalidSpec) {
  EXPECT_THROW(uagan::gen_gaussian_mixture({{}, 0.5, 10}, 1), uagan::ConfigError);
  EXPECT_THROW(uagan::gen_gaussian_mixture({{{0, 0}}, 0.0, 10}, 1), uagan::ConfigError);
}

TEST(Partition, ByModeSitesHoldOneLabel) {
  Dataset d = uagan::gen_gaussian_mixture(GaussianMixtureSpec::toy(), 1);
  auto sited = uagan::partition(d, {PartitionMode::kByMode, {}, 0}, 4);
  for (std::size_t j = 0; j < 4; ++j) {
    for (int y : sited.sites[j].labels) EXPECT_EQ(y, static_cast<int>(j));
    EXPECT_DOUBLE_EQ(sited.weights.pi()[j], 0.25);
  }
  expect_bijection(d, sited);
}

TEST(Partition, IidHistogramsTrackGlobal) {
  GaussianMixtureSpec spec = GaussianMixtureSpec::toy();
  Dataset d = uagan::gen_gaussian_mixture(spec, 4);
  auto sited = uagan::partition(d, {PartitionMode::kIid, {}, 5}, 10);
  for (const auto& s : sited.sites) {
    auto c = uagan::class_counts(s, 4);
    for (auto v : c) {
      EXPECT_NEAR(static_cast<double>(v) / s.size(), 0.25, 0.05);
    }
  }
  expect_bijection(d, sited);
}

TEST(Partition, SingleSiteHoldsEverything) {
  Dataset d = uagan::gen_gaussian_mixture(GaussianMixtureSpec::toy(), 1);
  auto sited = uagan::partition(d, {PartitionMode::kIid, {}, 0}, 1);
  ASSERT_EQ(sited.num_sites(), 1u);
  EXPECT_EQ(sited.weights.pi(), std::vector<double>{1.0});
  expect_bijection(d, sited);
}

TEST(Partition, FractionsAreBijective) {
  Dataset d = uagan::gen_gaussian_mixture(GaussianMixtureSpec::toy(), 1);
  auto sited = uagan::partition(d, {PartitionMode::kFractions, {0.5, 0.3, 0.2}, 3}, 3);
  EXPECT_EQ(sited.counts, (std::vector<std::uint64_t>{5000, 3000, 2000}));
  expect_bijection(d, sited);
  EXPECT_EQ(row_set(sited.merged()), row_set(d));
}

TEST(Partition, OmegaSumsToOne) {
  Dataset d = uagan::gen_gaussian_mixture(GaussianMixtureSpec::toy(), 1);
  auto sited = uagan::partition(d, {PartitionMode::kFractions, {0.7, 0.3}, 8}, 2);
  for (std::size_t j = 0; j < 2; ++j) {
    double s = 0;
    for (std::size_t y = 0; y < 4; ++y) s += sited.weights.omega(j, y);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Partition, InvalidPlans) {
  Dataset d = uagan::gen_gaussian_mixture(GaussianMixtureSpec::toy(), 1);
  EXPECT_THROW(uagan::partition(d, {PartitionMode::kByMode, {}, 0}, 3), uagan::ConfigError);
  EXPECT_THROW(uagan::partition(d, {PartitionMode::kIid, {}, 0}, 0), uagan::ConfigError);
  EXPECT_THROW(uagan::partition(d, {PartitionMode::kFractions, {0.5, 0.4}, 0}, 2),
               uagan::ConfigError);
  EXPECT_THROW(uagan::partition(d, {PartitionMode::kFractions, {1.0}, 0}, 2),
               uagan::ConfigError);
  EXPECT_THROW(uagan::parse_partition_mode("round-robin"), uagan::ConfigError);
}

TEST(Csv, RoundTrip) {
  auto dir = testutil::scratch_dir("data_csv");
  Dataset d = uagan::gen_gaussian_mixture({{{1.5, -2.0}, {0.0, 3.0}}, 0.3, 50}, 6);
  uagan::write_dataset_csv(dir / "d.csv", d);
  const std::string text = testutil::read_file(dir / "d.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "x0,x1,label");
  Dataset back = uagan::read_dataset_csv(dir / "d.csv");
  EXPECT_EQ(back.rows, d.rows);
  EXPECT_EQ(back.labels, d.labels);
}

TEST(Csv, Malformed) {
  auto dir = testutil::scratch_dir("data_csv_bad");
  testutil::write_file(dir / "a.csv", "x0,x1,label\n1,2,0\n3,oops,1\n");
  EXPECT_THROW(uagan::read_dataset_csv(dir / "a.csv"), uagan::FormatError);
  testutil::write_file(dir / "b.csv", "x0,x1,label\n1,2\n");
  EXPECT_THROW(uagan::read_dataset_csv(dir / "b.csv"), uagan::FormatError);
  EXPECT_THROW(uagan::read_dataset_csv(dir / "missing.csv"), uagan::FormatError);
}

TEST(Idx, FixtureImagesExact) {
  auto img = uagan::read_idx_images(testutil::fixture("idx/images.idx"));
  ASSERT_EQ(img.count, 3u);
  ASSERT_EQ(img.rows, 2u);
  ASSERT_EQ(img.cols, 3u);
  const int raw[3][6] = {{0, 255, 128, 1, 2, 3},
                         {10, 20, 30, 40, 50, 60},
                         {255, 255, 0, 0, 127, 128}};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_EQ(img.pixels.at(i, j), raw[i][j] / 127.5 - 1.0);
    }
  }
  EXPECT_EQ(img.pixels.at(0, 0), -1.0);
  EXPECT_EQ(img.pixels.at(0, 1), 1.0);
}

TEST(Idx, FixtureDataset) {
  auto d = uagan::read_idx_dataset(testutil::fixture("idx/images.idx"),
                                   testutil::fixture("idx/labels.idx"));
  EXPECT_EQ(d.labels, (std::vector<int>{7, 0, 9}));
  EXPECT_EQ(d.dim(), 6u);
}

TEST(Idx, CountMismatch) {
  EXPECT_THROW(uagan::read_idx_dataset(testutil::fixture("idx/images.idx"),
                                       testutil::fixture("idx/labels_short.idx")),
               uagan::FormatError);
}

TEST(Idx, BadFiles) {
  auto dir = testutil::scratch_dir("idx_bad");
  testutil::write_file(dir / "empty.idx", "");
  EXPECT_THROW(uagan::read_idx_images(dir / "empty.idx"), uagan::FormatError);
  EXPECT_THROW(uagan::read_idx_labels(dir / "empty.idx"), uagan::FormatError);
  // Label magic handed to the image reader and vice versa.
  EXPECT_THROW(uagan::read_idx_images(testutil::fixture("idx/labels.idx")), uagan::FormatError);
  EXPECT_THROW(uagan::read_idx_labels(testutil::fixture("idx/images.idx")), uagan::FormatError);
  std::string bytes = testutil::read_file(testutil::fixture("idx/images.idx"));
  testutil::write_file(dir / "trunc.idx", bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(uagan::read_idx_images(dir / "trunc.idx"), uagan::FormatError);
}
