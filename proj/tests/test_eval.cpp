#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "test_util.hpp"
#include "uagan/data.hpp"
#include "uagan/error.hpp"
#include "uagan/eval.hpp"

using uagan::Tensor;

namespace {

const Tensor kCenters = Tensor::matrix({{10, 10}, {10, -10}, {-10, 10}, {-10, -10}});

}  // namespace

TEST(ModeCoverage, CentersRepeated) {
  Tensor s({400, 2});
  for (std::size_t i = 0; i < 400; ++i) {
    s.at(i, 0) = kCenters.at(i % 4, 0);
    s.at(i, 1) = kCenters.at(i % 4, 1);
  }
  auto r = uagan::mode_coverage(s, kCenters, 1.0, 0.2);
  EXPECT_EQ(r.covered, 4u);
  EXPECT_EQ(r.high_quality, 1.0);
  EXPECT_EQ(r.counts, (std::vector<std::size_t>{100, 100, 100, 100}));
  EXPECT_EQ(r.total, 400u);
}

TEST(ModeCoverage, CollapseAtOrigin) {
  Tensor s({100, 2});
  auto r = uagan::mode_coverage(s, kCenters, 3.0, 0.1);
  EXPECT_EQ(r.covered, 0u);
  EXPECT_EQ(r.high_quality, 0.0);
}

TEST(ModeCoverage, TrueMixtureCovered) {
  auto spec = uagan::GaussianMixtureSpec::toy();
  spec.samples_per_mode = 1024;
  auto d = uagan::gen_gaussian_mixture(spec, 11);
  auto r = uagan::mode_coverage(d.rows, kCenters, 3 * std::sqrt(0.5), 0.1);
  EXPECT_EQ(r.covered, 4u);
  EXPECT_GT(r.high_quality, 0.98);
  for (double m : r.mean_distance) EXPECT_LT(m, 1.5);
}

TEST(ModeCoverage, MonotoneInRadius) {
  auto rng = uagan::make_rng(3);
  Tensor s = testutil::random_tensor({500, 2}, rng, -14, 14);
  std::size_t prev = 0;
  for (double r = 0.5; r < 15; r += 0.5) {
    auto rep = uagan::mode_coverage(s, kCenters, r, 0.05);
    EXPECT_GE(rep.covered, prev);
    prev = rep.covered;
    std::size_t sum = 0;
    for (auto c : rep.counts) sum += c;
    EXPECT_LE(sum, rep.total);
    EXPECT_GE(rep.high_quality, 0.0);
    EXPECT_LE(rep.high_quality, 1.0);
  }
}

TEST(ModeCoverage, InvalidArguments) {
  EXPECT_THROW(uagan::mode_coverage(Tensor({0, 2}), kCenters, 1, 0.1), uagan::DomainError);
  EXPECT_THROW(uagan::mode_coverage(Tensor({3, 2}), kCenters, 0, 0.1), uagan::DomainError);
  EXPECT_THROW(uagan::mode_coverage(Tensor({3, 2}), kCenters, 1, 1.0), uagan::DomainError);
  EXPECT_THROW(uagan::mode_coverage(Tensor({3, 2}), kCenters, 1, 0.0), uagan::DomainError);
}

TEST(Mmd, IdenticalSetsGiveZero) {
  auto rng = uagan::make_rng(4);
  Tensor a = testutil::random_tensor({200, 2}, rng);
  EXPECT_LT(std::abs(uagan::mmd_rbf(a, a, 1.0)), 1e-12);
}

TEST(Mmd, FarClustersAreDistinct) {
  auto rng = uagan::make_rng(5);
  Tensor a = testutil::random_tensor({100, 2}, rng, -0.5, 0.5);
  Tensor b = testutil::random_tensor({100, 2}, rng, 19.5, 20.5);
  EXPECT_GT(uagan::mmd_rbf(a, b, 1.0), 0.5);
}

TEST(Mmd, Symmetric) {
  auto rng = uagan::make_rng(6);
  Tensor a = testutil::random_tensor({80, 2}, rng);
  Tensor b = testutil::random_tensor({80, 2}, rng, -1, 3);
  Tensor c = testutil::random_tensor({50, 2}, rng, -1, 3);
  EXPECT_NEAR(uagan::mmd_rbf(a, b, 0.7), uagan::mmd_rbf(b, a, 0.7), 1e-12);
  EXPECT_NEAR(uagan::mmd_rbf(a, c, 0.7), uagan::mmd_rbf(c, a, 0.7), 1e-12);
}

TEST(Mmd, PermutationInvariant) {
  auto rng = uagan::make_rng(7);
  Tensor a = testutil::random_tensor({60, 2}, rng);
  Tensor b = testutil::random_tensor({60, 2}, rng, -1, 2);
  Tensor c = testutil::random_tensor({45, 2}, rng, -1, 2);
  std::vector<std::size_t> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto permute = [&](const Tensor& t) {
    Tensor out(t.shape());
    for (std::size_t i = 0; i < 60; ++i) {
      out.at(i, 0) = t.at(perm[i], 0);
      out.at(i, 1) = t.at(perm[i], 1);
    }
    return out;
  };
  // Equal sizes: the pairing is kept when both sets are permuted together.
  EXPECT_NEAR(uagan::mmd_rbf(a, b, 1.0), uagan::mmd_rbf(permute(a), permute(b), 1.0), 1e-12);
  // Unequal sizes: any permutation of either set.
  EXPECT_NEAR(uagan::mmd_rbf(a, c, 1.0), uagan::mmd_rbf(permute(a), c, 1.0), 1e-12);
}

TEST(Mmd, InvalidArguments) {
  Tensor a = Tensor::matrix({{0, 0}, {1, 1}});
  EXPECT_THROW(uagan::mmd_rbf(a, a, 0.0), uagan::DomainError);
  EXPECT_THROW(uagan::mmd_rbf(Tensor({0, 2}), a, 1.0), uagan::DomainError);
}

TEST(EvalCsv, Layout) {
  auto dir = testutil::scratch_dir("eval_csv");
  uagan::write_eval_csv(dir / "eval.csv", {{"covered_modes", 4}, {"high_quality_fraction", 0.5}});
  EXPECT_EQ(testutil::read_file(dir / "eval.csv"),
            "metric,value\ncovered_modes,4\nhigh_quality_fraction,0.5\n");
}
