#pragma once

// Numerical checks of the perturbed Jensen-Shannon analysis on finite
// supports. The oracle solves the stationarity system
//   (h - p)/(q + h) + log(q/(q + h)) = -lambda,   sum q = 1,   h = p * xi
// by bisection on lambda around a per-point bisection on q; it does not use
// the autodiff engine.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uagan/random.hpp"

namespace uagan::theory {

using Dist = std::vector<double>;

// Throws DomainError unless masses are >= 0 and sum to 1 within 1e-12.
void validate_distribution(const Dist& p);

// Pointwise p / (p + q); DomainError where p + q == 0.
std::vector<double> optimal_discriminator(const Dist& p, const Dist& q);

// sum p log(h/(h+q)) + q log(q/(h+q)), skipping points where p = q = 0.
double perturbed_js_loss(const Dist& p, const Dist& q, const std::vector<double>& h);

double total_variation(const Dist& p, const Dist& q);

struct Solution {
  Dist q;
  double lambda = 0.0;
  double residual = 0.0;  // |sum q - 1|
  std::size_t outer_iterations = 0;
};

// Minimiser of the perturbed loss with h = p * xi. p must have full support
// and xi must be positive. SolverError when |sum q - 1| < 1e-12 is not
// reached.
Solution minimize_perturbed_js(const Dist& p, const std::vector<double>& xi);

// Largest |stationarity(x) + lambda| over the support.
double stationarity_residual(const Dist& p, const Dist& q, const std::vector<double>& h,
                             double lambda);

// Number of random feasible perturbations q' = q + radius * d (sum d = 0,
// |d| <= 1) whose loss is below loss(q).
std::size_t count_better_neighbours(const Dist& p, const Dist& q, const std::vector<double>& h,
                                    Rng& rng, std::size_t probes = 1000, double radius = 1e-4);

// max_x |q(x)/p(x) - 1|
double max_ratio_deviation(const Dist& p, const Dist& q);

// Dirichlet(1, ..., 1) masses raised to `floor` and renormalised.
Dist random_distribution(std::size_t support, Rng& rng, double floor = 1e-3);

// xi(x) uniform in [1 - delta, 1 + delta].
std::vector<double> random_perturbation(std::size_t support, double delta, Rng& rng);

// One line of report.csv.
struct ReportRow {
  std::string theorem;
  double delta_or_gamma = 0.0;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double max_dev = 0.0;
  double bound = 0.0;
};

inline const std::vector<double> kDeltaGrid{1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8};

// Unperturbed solve returns p: |q - p| <= 1e-10 per point, stationarity
// residual < 1e-9 and local optimality probe clean.
ReportRow verify_correctness(std::size_t trials, std::size_t s_max, std::uint64_t seed);

struct UpperBoundOptions {
  std::size_t trials = 200;
  std::size_t s_max = 32;
  std::vector<double> deltas = kDeltaGrid;
  std::uint64_t seed = 1;
};

// One row per delta checking max |q*/p - 1| <= 16 delta, then a slope row:
// the least-squares slope of log(max_dev) on log(delta), bound 1.1.
// Trial i draws the same p and the same xi shape for every delta.
std::vector<ReportRow> verify_upper_bound(const UpperBoundOptions& opts);

struct CorollaryOptions {
  std::size_t trials = 100;
  std::size_t s_max = 32;
  std::size_t k_max = 8;
  std::vector<double> deltas = kDeltaGrid;
  std::uint64_t seed = 1;
};

// Per delta: effective perturbation of the aggregated odds within delta,
// the 16 delta ratio bound, and TV(p, q*) <= 8 delta.
std::vector<ReportRow> verify_corollary(const CorollaryOptions& opts);

enum class Construction { kConstant, kAlternating };
std::string construction_name(Construction c);

struct LowerBoundOptions {
  std::vector<double> gammas = kDeltaGrid;
  std::vector<Construction> constructions{Construction::kConstant, Construction::kAlternating};
  std::size_t support = 4;  // p uniform on this many points
};

// Per construction and gamma: violation when max |q*/p - 1| < gamma/64.
// Also one "monotone" row per construction: violations counts gamma steps
// where the deviation drops by more than 1e-12.
std::vector<ReportRow> verify_lower_bound(const LowerBoundOptions& opts);

// theorem,delta_or_gamma,trials,violations,max_dev,bound
void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);
std::string format_report_row(const ReportRow& r);

}  // namespace uagan::theory
