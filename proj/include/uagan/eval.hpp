#pragma once

// Sample-quality metrics for low-dimensional synthetic data.

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "uagan/tensor.hpp"

namespace uagan {

struct ModeReport {
  std::vector<std::size_t> counts;  // samples within r of each center
  std::size_t covered = 0;          // modes holding >= f * N samples
  double high_quality = 0.0;        // share of samples within r of some center
  std::vector<double> mean_distance;  // mean distance of each mode's samples (NaN if none)
  std::size_t total = 0;
};

// Each sample is assigned to its nearest center; it counts for that mode
// when the distance is at most r. Throws DomainError for empty samples,
// r <= 0 or f outside (0, 1).
ModeReport mode_coverage(const Tensor& samples, const Tensor& centers, double r, double f);

// Unbiased MMD^2 with k(x, y) = exp(-|x - y|^2 / (2 bandwidth^2)). Each set
// needs at least two rows. Sets of equal size are treated as paired samples
// (cross terms with i == j are left out), so the value depends on the row
// order of one set relative to the other; unequal sets use all cross pairs.
double mmd_rbf(const Tensor& a, const Tensor& b, double bandwidth);

// eval.csv: metric,value
void write_eval_csv(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, double>>& metrics);

}  // namespace uagan
