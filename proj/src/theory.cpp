#include "uagan/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "uagan/aggregation.hpp"
#include "uagan/error.hpp"

namespace uagan::theory {
namespace {

constexpr double kSumTolerance = 1e-12;
constexpr double kQLo = 1e-300;
constexpr double kQHi = 1e6;
constexpr int kInnerIterations = 200;
constexpr int kOuterIterations = 400;
// Bound checks allow the solver's own accuracy, so delta = 0 is not a
// violation at roundoff level.
constexpr double kSolveSlack = 1e-10;

double stationarity(double p, double q, double h) {
  return (h - p) / (q + h) + std::log(q) - std::log(q + h);
}

// Root of stationarity(q) = -lambda; the left side increases in q from -inf
// towards 0, so bisection on log q brackets it.
double solve_point(double p, double h, double lambda) {
  double lo = std::log(kQLo);
  double hi = std::log(kQHi);
  for (int i = 0; i < kInnerIterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (stationarity(p, std::exp(mid), h) < -lambda) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

double mass_at(const Dist& p, const std::vector<double>& h, double lambda, Dist& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    q[i] = solve_point(p[i], h[i], lambda);
    s += q[i];
  }
  return s;
}

void check_same_support(const Dist& p, const Dist& q, const char* what) {
  if (p.size() != q.size()) {
    throw ShapeError(std::string(what) + ": support sizes " + std::to_string(p.size()) +
                     " and " + std::to_string(q.size()));
  }
}

std::vector<double> times(const Dist& p, const std::vector<double>& xi) {
  std::vector<double> h(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) h[i] = p[i] * xi[i];
  return h;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::string dump(const char* name, const std::vector<double>& v) {
  std::string s = std::string(name) + "=[";
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.17g", i ? " " : "", v[i]);
    s += buf;
  }
  return s + "]";
}

// Solver failures carry the instance so a failing trial can be replayed.
Solution solve_trial(const std::string& where, std::size_t trial, const Dist& p,
                     const std::vector<double>& xi) {
  try {
    return minimize_perturbed_js(p, xi);
  } catch (const SolverError& e) {
    throw SolverError(where + " trial " + std::to_string(trial) + ": " + e.what() + " " +
                          dump("p", p) + " " + dump("xi", xi),
                      e.residual());
  }
}

std::size_t random_support(std::size_t s_max, Rng& rng) {
  if (s_max < 2) throw ConfigError("support size must allow at least 2 points");
  return 2 + uniform_index(rng, s_max - 1);
}

}  // namespace

void validate_distribution(const Dist& p) {
  if (p.empty()) throw DomainError("distribution: empty support");
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("distribution: negative or non-finite mass");
    s += v;
  }
  if (std::abs(s - 1.0) > kSumTolerance) {
    throw DomainError("distribution: masses sum to " + std::to_string(s));
  }
}

std::vector<double> optimal_discriminator(const Dist& p, const Dist& q) {
  check_same_support(p, q, "optimal_discriminator");
  std::vector<double> d(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double s = p[i] + q[i];
    if (!(s > 0.0)) {
      throw DomainError("optimal_discriminator: p + q = 0 at point " + std::to_string(i));
    }
    d[i] = p[i] / s;
  }
  return d;
}

double perturbed_js_loss(const Dist& p, const Dist& q, const std::vector<double>& h) {
  check_same_support(p, q, "perturbed_js_loss");
  check_same_support(p, h, "perturbed_js_loss");
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0 && q[i] == 0.0) continue;
    if (!(h[i] > 0.0) || !(q[i] > 0.0)) {
      throw DomainError("perturbed_js_loss: nonpositive h or q at point " + std::to_string(i));
    }
    loss += p[i] * std::log(h[i] / (h[i] + q[i])) + q[i] * std::log(q[i] / (h[i] + q[i]));
  }
  return loss;
}

double total_variation(const Dist& p, const Dist& q) {
  check_same_support(p, q, "total_variation");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

Solution minimize_perturbed_js(const Dist& p, const std::vector<double>& xi) {
  validate_distribution(p);
  check_same_support(p, xi, "minimize_perturbed_js");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) throw DomainError("minimize_perturbed_js: p must have full support");
    if (!(xi[i] > 0.0) || !std::isfinite(xi[i])) {
      throw DomainError("minimize_perturbed_js: xi must be positive");
    }
  }
  const std::vector<double> h = times(p, xi);
  Solution sol;
  sol.q.assign(p.size(), 0.0);

  // Total mass falls as lambda grows; expand a bracket around ln 2, the
  // unperturbed multiplier.
  double lo = std::log(2.0), hi = std::log(2.0);
  while (mass_at(p, h, lo, sol.q) < 1.0) {
    lo *= 0.5;
    if (lo < 1e-300) throw SolverError("minimize_perturbed_js: no lower bracket", 0.0);
  }
  while (mass_at(p, h, hi, sol.q) > 1.0) {
    hi *= 2.0;
    if (hi > 1e300) throw SolverError("minimize_perturbed_js: no upper bracket", 0.0);
  }

  double residual = INFINITY;
  for (std::size_t it = 0; it < kOuterIterations; ++it) {
    sol.outer_iterations = it + 1;
    const double mid = 0.5 * (lo + hi);
    if (it > 0 && (mid <= lo || mid >= hi)) break;
    const double mass = mass_at(p, h, mid, sol.q);
    residual = std::abs(mass - 1.0);
    sol.lambda = mid;
    if (residual < kSumTolerance) break;
    if (mass > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  sol.residual = residual;
  if (!(residual < kSumTolerance)) {
    throw SolverError("minimize_perturbed_js: mass constraint not met", residual);
  }
  return sol;
}

double stationarity_residual(const Dist& p, const Dist& q, const std::vector<double>& h,
                             double lambda) {
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    worst = std::max(worst, std::abs(stationarity(p[i], q[i], h[i]) + lambda));
  }
  return worst;
}

std::size_t count_better_neighbours(const Dist& p, const Dist& q, const std::vector<double>& h,
                                    Rng& rng, std::size_t probes, double radius) {
  const double base = perturbed_js_loss(p, q, h);
  std::size_t better = 0;
  Dist d(q.size()), qq(q.size());
  for (std::size_t n = 0; n < probes; ++n) {
    double mean = 0.0;
    for (double& v : d) {
      v = uniform(rng, -1.0, 1.0);
      mean += v;
    }
    mean /= static_cast<double>(d.size());
    double scale = 0.0;
    for (double& v : d) {
      v -= mean;
      scale = std::max(scale, std::abs(v));
    }
    if (scale == 0.0) continue;
    bool feasible = true;
    for (std::size_t i = 0; i < q.size(); ++i) {
      qq[i] = q[i] + radius * d[i] / scale;
      feasible = feasible && qq[i] > 0.0;
    }
    if (feasible && perturbed_js_loss(p, qq, h) < base) ++better;
  }
  return better;
}

double max_ratio_deviation(const Dist& p, const Dist& q) {
  check_same_support(p, q, "max_ratio_deviation");
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    worst = std::max(worst, std::abs(q[i] / p[i] - 1.0));
  }
  return worst;
}

Dist random_distribution(std::size_t support, Rng& rng, double floor) {
  if (support == 0) throw DomainError("random_distribution: empty support");
  if (floor * static_cast<double>(support) >= 1.0) {
    throw DomainError("random_distribution: floor too large for support");
  }
  std::gamma_distribution<double> g(1.0, 1.0);
  Dist p(support);
  double s = 0.0;
  for (double& v : p) {
    v = g(rng);
    s += v;
  }
  for (double& v : p) v = std::max(v / s, floor);
  const double t = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= t;
  return p;
}

std::vector<double> random_perturbation(std::size_t support, double delta, Rng& rng) {
  std::vector<double> xi(support);
  for (double& v : xi) v = 1.0 + delta * uniform(rng, -1.0, 1.0);
  return xi;
}

ReportRow verify_correctness(std::size_t trials, std::size_t s_max, std::uint64_t seed) {
  ReportRow row{"correctness", 0.0, trials, 0, 0.0, 1e-10};
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = make_rng(seed, t);
    const Dist p = random_distribution(random_support(s_max, rng), rng);
    const std::vector<double> xi(p.size(), 1.0);
    const Solution s = solve_trial("correctness", t, p, xi);
    double dev = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dev = std::max(dev, std::abs(s.q[i] - p[i]));
    row.max_dev = std::max(row.max_dev, dev);
    const bool ok = dev <= 1e-10 && stationarity_residual(p, s.q, p, s.lambda) < 1e-9 &&
                    count_better_neighbours(p, s.q, p, rng) == 0;
    if (!ok) ++row.violations;
  }
  return row;
}

std::vector<ReportRow> verify_upper_bound(const UpperBoundOptions& opts) {
  std::vector<ReportRow> rows;
  std::vector<double> devs;
  for (double delta : opts.deltas) {
    if (!(delta >= 0.0) || delta > 0.125) throw ConfigError("delta must lie in [0, 1/8]");
    ReportRow row{"upper_bound", delta, opts.trials, 0, 0.0, 16.0 * delta};
    for (std::size_t t = 0; t < opts.trials; ++t) {
      Rng rng = make_rng(opts.seed, t);
      const Dist p = random_distribution(random_support(opts.s_max, rng), rng);
      const std::vector<double> xi = random_perturbation(p.size(), delta, rng);
      const Solution s = solve_trial("upper_bound", t, p, xi);
      const double dev = max_ratio_deviation(p, s.q);
      row.max_dev = std::max(row.max_dev, dev);
      if (dev > row.bound + kSolveSlack) ++row.violations;
    }
    devs.push_back(row.max_dev);
    rows.push_back(row);
  }
  if (opts.deltas.size() >= 2 &&
      std::all_of(devs.begin(), devs.end(), [](double d) { return d > 0.0; })) {
    const double slope = log_log_slope(opts.deltas, devs);
    rows.push_back({"upper_bound_slope", 0.0, opts.deltas.size(), slope > 1.1 ? 1u : 0u, slope, 1.1});
  }
  return rows;
}

std::vector<ReportRow> verify_corollary(const CorollaryOptions& opts) {
  if (opts.k_max < 1) throw ConfigError("corollary: k_max must be >= 1");
  std::vector<ReportRow> rows;
  for (double delta : opts.deltas) {
    if (!(delta >= 0.0) || delta > 0.125) throw ConfigError("delta must lie in [0, 1/8]");
    ReportRow xi_row{"aggregated_xi", delta, opts.trials, 0, 0.0, delta};
    ReportRow ratio_row{"aggregated_ratio", delta, opts.trials, 0, 0.0, 16.0 * delta};
    ReportRow tv_row{"aggregated_tv", delta, opts.trials, 0, 0.0, 8.0 * delta};
    for (std::size_t t = 0; t < opts.trials; ++t) {
      Rng rng = make_rng(opts.seed, t);
      const std::size_t support = random_support(opts.s_max, rng);
      const std::size_t k = 1 + uniform_index(rng, opts.k_max);
      const Dist pi = random_distribution(k, rng, k > 1 ? 1e-3 : 0.0);
      std::vector<Dist> pj;
      std::vector<std::vector<double>> xij;
      for (std::size_t j = 0; j < k; ++j) {
        pj.push_back(random_distribution(support, rng));
        xij.push_back(random_perturbation(support, delta, rng));
      }
      // Any generator state works for the odds identity; draw one.
      const Dist q = random_distribution(support, rng);
      Dist p(support, 0.0);
      std::vector<double> xi_ua(support, 0.0);
      bool bad = false;
      double xi_dev = 0.0;
      for (std::size_t x = 0; x < support; ++x) {
        std::vector<double> perturbed(k);
        double num = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          p[x] += pi[j] * pj[j][x];
          num += pi[j] * pj[j][x] * xij[j][x];
          const double d = pj[j][x] / (pj[j][x] + q[x]);
          perturbed[j] = inv_odds(odds(d) * xij[j][x]);
        }
        xi_ua[x] = num / p[x];
        // Perturbation seen through the aggregated discriminator.
        const double measured = odds(aggregate_odds_weighted(perturbed, pi)) * q[x] / p[x];
        if (std::abs(measured - xi_ua[x]) > 1e-12 * xi_ua[x]) bad = true;
        xi_dev = std::max(xi_dev, std::abs(measured - 1.0));
        if (std::abs(xi_ua[x] - 1.0) > delta + 1e-12) bad = true;
      }
      xi_row.max_dev = std::max(xi_row.max_dev, xi_dev);
      if (bad) ++xi_row.violations;

      const double total = std::accumulate(p.begin(), p.end(), 0.0);
      for (double& v : p) v /= total;
      const Solution s = solve_trial("aggregated_ratio", t, p, xi_ua);
      const double dev = max_ratio_deviation(p, s.q);
      ratio_row.max_dev = std::max(ratio_row.max_dev, dev);
      if (dev > ratio_row.bound + kSolveSlack) ++ratio_row.violations;
      const double tv = total_variation(p, s.q);
      tv_row.max_dev = std::max(tv_row.max_dev, tv);
      if (tv > tv_row.bound + kSolveSlack) ++tv_row.violations;
    }
    rows.push_back(xi_row);
    rows.push_back(ratio_row);
    rows.push_back(tv_row);
  }
  return rows;
}

std::string construction_name(Construction c) {
  return c == Construction::kConstant ? "constant" : "alternating";
}

std::vector<ReportRow> verify_lower_bound(const LowerBoundOptions& opts) {
  std::vector<ReportRow> rows;
  const Dist p(opts.support, 1.0 / static_cast<double>(opts.support));
  for (Construction c : opts.constructions) {
    const std::string name = "lower_bound_" + construction_name(c);
    std::vector<double> devs;
    for (double gamma : opts.gammas) {
      if (!(gamma >= 0.0) || gamma > 0.125) throw ConfigError("gamma must lie in [0, 1/8]");
      std::vector<double> xi(p.size());
      for (std::size_t i = 0; i < xi.size(); ++i) {
        xi[i] = c == Construction::kConstant || i % 2 == 0 ? 1.0 + gamma : 1.0 - gamma;
      }
      const Solution s = solve_trial(name, 0, p, xi);
      const double dev = max_ratio_deviation(p, s.q);
      ReportRow row{name, gamma, 1, 0, dev, gamma / 64.0};
      if (dev < row.bound) row.violations = 1;
      rows.push_back(row);
      devs.push_back(dev);
    }
    ReportRow mono{name + "_monotone", 0.0, devs.size() > 0 ? devs.size() - 1 : 0, 0, 0.0, 1e-12};
    for (std::size_t i = 1; i < devs.size(); ++i) {
      const double drop = devs[i - 1] - devs[i];
      mono.max_dev = std::max(mono.max_dev, drop);
      if (drop > 1e-12) ++mono.violations;
    }
    rows.push_back(mono);
  }
  return rows;
}

std::string format_report_row(const ReportRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.17g,%zu,%zu,%.17g,%.17g", r.theorem.c_str(),
                r.delta_or_gamma, r.trials, r.violations, r.max_dev, r.bound);
  return buf;
}

void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write report " + path.string());
  out << "theorem,delta_or_gamma,trials,violations,max_dev,bound\n";
  for (const auto& r : rows) out << format_report_row(r) << '\n';
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace uagan::theory
