#include "uagan/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "uagan/error.hpp"

namespace uagan {
namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Sum of k(x_i, y_j) over all pairs, skipping i == j when `same`.
double kernel_sum(const Tensor& x, const Tensor& y, double gamma, bool same) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < y.rows(); ++j) {
      if (same && i == j) continue;
      s += std::exp(-gamma * sq_dist(x.row(i), y.row(j)));
    }
  }
  return s;
}

}  // namespace

ModeReport mode_coverage(const Tensor& samples, const Tensor& centers, double r, double f) {
  if (samples.rows() == 0 || samples.size() == 0) throw DomainError("mode_coverage: no samples");
  if (!(r > 0.0)) throw DomainError("mode_coverage: radius must be positive");
  if (!(f > 0.0 && f < 1.0)) throw DomainError("mode_coverage: fraction must lie in (0, 1)");
  if (centers.rows() == 0 || centers.cols() != samples.cols()) {
    throw ShapeError("mode_coverage: centers " + shape_str(centers.shape()) +
                     " do not match samples " + shape_str(samples.shape()));
  }
  const std::size_t k = centers.rows();
  ModeReport rep;
  rep.counts.assign(k, 0);
  rep.mean_distance.assign(k, 0.0);
  rep.total = samples.rows();
  std::size_t near = 0;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = sq_dist(samples.row(i), centers.row(c));
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    const double dist = std::sqrt(best_d);
    if (dist <= r) {
      ++rep.counts[best];
      rep.mean_distance[best] += dist;
      ++near;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    rep.mean_distance[c] = rep.counts[c] ? rep.mean_distance[c] / static_cast<double>(rep.counts[c])
                                         : std::numeric_limits<double>::quiet_NaN();
    if (static_cast<double>(rep.counts[c]) >= f * static_cast<double>(rep.total)) ++rep.covered;
  }
  rep.high_quality = static_cast<double>(near) / static_cast<double>(rep.total);
  return rep;
}

double mmd_rbf(const Tensor& a, const Tensor& b, double bandwidth) {
  if (!(bandwidth > 0.0)) throw DomainError("mmd_rbf: bandwidth must be positive");
  if (a.rows() < 2 || b.rows() < 2) throw DomainError("mmd_rbf: need at least two samples per set");
  if (a.cols() != b.cols()) throw ShapeError("mmd_rbf: sample dimensions differ");
  const double gamma = 1.0 / (2.0 * bandwidth * bandwidth);
  const double n = static_cast<double>(a.rows());
  const double m = static_cast<double>(b.rows());
  const double kaa = kernel_sum(a, a, gamma, true) / (n * (n - 1));
  const double kbb = kernel_sum(b, b, gamma, true) / (m * (m - 1));
  // Equal sizes: the paired U-statistic, which drops the i == j cross
  // terms and is exactly zero for identical sets.
  const double kab = a.rows() == b.rows() ? kernel_sum(a, b, gamma, true) / (n * (n - 1))
                                          : kernel_sum(a, b, gamma, false) / (n * m);
  return kaa + kbb - 2.0 * kab;
}

void write_eval_csv(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, double>>& metrics) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "metric,value\n";
  char buf[64];
  for (const auto& [name, v] : metrics) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << name << ',' << buf << '\n';
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace uagan
