#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"
#include "uagan/error.hpp"
#include "uagan/theory.hpp"

using namespace uagan::theory;
using uagan::make_rng;

namespace {

constexpr double kLn2 = std::numbers::ln2;

const ReportRow& find_row(const std::vector<ReportRow>& rows, const std::string& name,
                          double param) {
  for (const auto& r : rows) {
    if (r.theorem == name && r.delta_or_gamma == param) return r;
  }
  throw std::runtime_error("no row " + name);
}

}  // namespace

TEST(OptimalDiscriminator, EqualDensities) {
  Dist p{0.2, 0.3, 0.5};
  for (double d : optimal_discriminator(p, p)) EXPECT_EQ(d, 0.5);
}

TEST(OptimalDiscriminator, DisjointSupports) {
  EXPECT_EQ(optimal_discriminator({1, 0}, {0, 1}), (std::vector<double>{1, 0}));
  EXPECT_THROW(optimal_discriminator({1, 0}, {1, 0}), uagan::DomainError);
}

// Pointwise maximiser of p log D + q log(1 - D) against a 1e-3 grid.
TEST(OptimalDiscriminator, BeatsGridSearch) {
  auto rng = make_rng(4);
  for (int t = 0; t < 10; ++t) {
    Dist p = random_distribution(8, rng), q = random_distribution(8, rng);
    auto d = optimal_discriminator(p, q);
    for (std::size_t x = 0; x < 8; ++x) {
      auto f = [&](double v) { return p[x] * std::log(v) + q[x] * std::log(1 - v); };
      double best = 0, best_v = -INFINITY;
      for (int i = 1; i < 1000; ++i) {
        const double v = i * 1e-3;
        if (f(v) > best_v) best_v = f(v), best = v;
      }
      EXPECT_GE(f(d[x]), best_v);
      EXPECT_NEAR(d[x], best, 1e-3);
    }
  }
}

TEST(PerturbedLoss, UnperturbedAtOptimum) {
  Dist p{0.1, 0.6, 0.3};
  EXPECT_NEAR(perturbed_js_loss(p, p, p), -2 * kLn2, 1e-15);
}

TEST(PerturbedLoss, MinimisedAtP) {
  auto rng = make_rng(5);
  Dist p = random_distribution(12, rng);
  const double at_p = perturbed_js_loss(p, p, p);
  for (int t = 0; t < 100; ++t) {
    Dist q = random_distribution(12, rng);
    EXPECT_LE(at_p, perturbed_js_loss(p, q, p));
  }
}

TEST(PerturbedLoss, TwoPointDirectValue) {
  Dist p{0.5, 0.5}, q{0.9, 0.1};
  const double want = 0.5 * std::log(0.5 / 1.4) + 0.9 * std::log(0.9 / 1.4) +
                      0.5 * std::log(0.5 / 0.6) + 0.1 * std::log(0.1 / 0.6);
  const double got = perturbed_js_loss(p, q, p);
  EXPECT_NEAR(got, want, 1e-15);
  EXPECT_GT(got, -2 * kLn2);
}

TEST(PerturbedLoss, NonPositiveArguments) {
  EXPECT_THROW(perturbed_js_loss({0.5, 0.5}, {0.5, 0.5}, {0.5, 0.0}), uagan::DomainError);
  EXPECT_THROW(perturbed_js_loss({0.5, 0.5}, {1.0, 0.0}, {0.5, 0.5}), uagan::DomainError);
}

TEST(TotalVariation, Examples) {
  EXPECT_EQ(total_variation({0.3, 0.7}, {0.3, 0.7}), 0.0);
  EXPECT_EQ(total_variation({1, 0}, {0, 1}), 1.0);
}

TEST(Solver, UnperturbedReturnsP) {
  auto rng = make_rng(6);
  for (int t = 0; t < 100; ++t) {
    Dist p = random_distribution(2 + uagan::uniform_index(rng, 31), rng);
    auto s = minimize_perturbed_js(p, std::vector<double>(p.size(), 1.0));
    for (std::size_t x = 0; x < p.size(); ++x) EXPECT_NEAR(s.q[x], p[x], 1e-10);
  }
}

TEST(Solver, ConstantPerturbationKeepsRatioConstant) {
  auto rng = make_rng(7);
  for (double c : {0.875, 0.95, 1.05, 1.125}) {
    Dist p = random_distribution(16, rng);
    auto s = minimize_perturbed_js(p, std::vector<double>(p.size(), c));
    double mean = 0, sq = 0;
    for (std::size_t x = 0; x < p.size(); ++x) mean += s.q[x] / p[x];
    mean /= p.size();
    for (std::size_t x = 0; x < p.size(); ++x) sq += std::pow(s.q[x] / p[x] - mean, 2);
    EXPECT_LT(sq / p.size(), 1e-10);
  }
}

TEST(Solver, TwoPointMatchesDenseGrid) {
  Dist p{0.5, 0.5};
  std::vector<double> xi{1.1, 0.9}, h{0.55, 0.45};
  auto s = minimize_perturbed_js(p, xi);
  double best_q = 0, best = INFINITY;
  for (long i = 1; i < 1000000; ++i) {
    const double q0 = i * 1e-6;
    const double v = perturbed_js_loss(p, {q0, 1 - q0}, h);
    if (v < best) best = v, best_q = q0;
  }
  EXPECT_NEAR(s.q[0], best_q, 1e-5);
  EXPECT_NEAR(s.q[1], 1 - best_q, 1e-5);
}

TEST(Solver, SolutionIsStationaryAndLocallyOptimal) {
  auto rng = make_rng(8);
  for (int t = 0; t < 20; ++t) {
    Dist p = random_distribution(2 + uagan::uniform_index(rng, 31), rng);
    auto xi = random_perturbation(p.size(), 0.125, rng);
    std::vector<double> h(p.size());
    for (std::size_t x = 0; x < p.size(); ++x) h[x] = p[x] * xi[x];
    auto s = minimize_perturbed_js(p, xi);
    double total = 0;
    for (double v : s.q) total += v;
    EXPECT_LT(std::abs(total - 1), 1e-12);
    EXPECT_LT(stationarity_residual(p, s.q, h, s.lambda), 1e-9);
    EXPECT_EQ(count_better_neighbours(p, s.q, h, rng), 0u);
  }
}

TEST(Solver, InvalidInputs) {
  EXPECT_THROW(minimize_perturbed_js({0.5, 0.6}, {1, 1}), uagan::DomainError);
  EXPECT_THROW(minimize_perturbed_js({0.5, 0.5}, {1, 0}), uagan::DomainError);
  EXPECT_THROW(minimize_perturbed_js({0.5, 0.5}, {1}), uagan::Error);
}

TEST(RandomInstances, FloorAndPerturbationRange) {
  auto rng = make_rng(9);
  for (int t = 0; t < 50; ++t) {
    Dist p = random_distribution(32, rng);
    EXPECT_NO_THROW(validate_distribution(p));
    for (double v : p) EXPECT_GE(v, 1e-3 / (1 + 32e-3));
    for (double xi : random_perturbation(32, 0.0625, rng)) {
      EXPECT_LE(std::abs(xi - 1), 0.0625);
    }
  }
}

TEST(UpperBound, ZeroDeltaGivesZeroDeviation) {
  auto rows = verify_upper_bound({50, 32, {0.0}, 1});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_LT(rows[0].max_dev, 1e-10);
  EXPECT_EQ(rows[0].violations, 0u);
}

TEST(UpperBound, SixteenDeltaHoldsAtOneEighth) {
  auto rows = verify_upper_bound({200, 32, {0.125}, 2});
  EXPECT_EQ(find_row(rows, "upper_bound", 0.125).violations, 0u);
  EXPECT_EQ(find_row(rows, "upper_bound", 0.125).bound, 2.0);
}

TEST(UpperBound, DeviationGrowsAtMostLinearly) {
  auto rows = verify_upper_bound({50, 32, kDeltaGrid, 3});
  const auto& slope = find_row(rows, "upper_bound_slope", 0.0);
  EXPECT_LE(slope.max_dev, 1.1) << "log-log slope of max deviation against delta";
}

TEST(UpperBound, RejectsDeltaAboveOneEighth) {
  EXPECT_THROW(verify_upper_bound({1, 4, {0.2}, 1}), uagan::ConfigError);
}

TEST(AggregatedBound, PerturbationStaysWithinDelta) {
  auto rows = verify_corollary({30, 32, 8, kDeltaGrid, 4});
  for (double d : kDeltaGrid) {
    EXPECT_EQ(find_row(rows, "aggregated_xi", d).violations, 0u) << d;
    EXPECT_EQ(find_row(rows, "aggregated_ratio", d).violations, 0u) << d;
    EXPECT_EQ(find_row(rows, "aggregated_tv", d).violations, 0u) << d;
    EXPECT_LE(find_row(rows, "aggregated_tv", d).max_dev, 8 * d);
  }
}

TEST(LowerBound, ZeroGammaIsTrivial) {
  auto rows = verify_lower_bound({{0.0}, {Construction::kConstant}, 4});
  const auto& r = find_row(rows, "lower_bound_constant", 0.0);
  EXPECT_EQ(r.bound, 0.0);
  EXPECT_EQ(r.violations, 0u);
}

TEST(LowerBound, ConstantConstructionReachesGammaOver64) {
  auto rows = verify_lower_bound({{0.125}, {Construction::kConstant}, 4});
  const auto& r = find_row(rows, "lower_bound_constant", 0.125);
  EXPECT_GE(r.max_dev, 0.125 / 64);
}

TEST(LowerBound, AllConstructionsReachGammaOver64) {
  auto rows = verify_lower_bound({});
  for (const auto& r : rows) {
    if (r.theorem.ends_with("_monotone")) continue;
    EXPECT_EQ(r.violations, 0u) << r.theorem << " gamma " << r.delta_or_gamma << " dev "
                                << r.max_dev;
  }
}

TEST(LowerBound, ConstantDeviationMonotoneInGamma) {
  auto rows = verify_lower_bound({kDeltaGrid, {Construction::kConstant}, 4});
  EXPECT_EQ(find_row(rows, "lower_bound_constant_monotone", 0.0).violations, 0u);
}

TEST(Report, CsvLayout) {
  auto dir = testutil::scratch_dir("theory_report");
  write_report_csv(dir / "r.csv", {{"upper_bound", 0.125, 200, 0, 0.5, 2.0}});
  EXPECT_EQ(testutil::read_file(dir / "r.csv"),
            "theorem,delta_or_gamma,trials,violations,max_dev,bound\n"
            "upper_bound,0.125,200,0,0.5,2\n");
}
