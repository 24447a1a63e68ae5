#pragma once

// Synthetic datasets, site partitioning and IDX ingestion.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uagan/aggregation.hpp"
#include "uagan/tensor.hpp"

namespace uagan {

// Rows plus one integer label per row.
struct Dataset {
  Tensor rows;  // n x dim
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return rows.cols(); }
  int num_classes() const;  // 1 + max label (0 when empty)
};

struct GaussianMixtureSpec {
  std::vector<std::array<double, 2>> centers;
  double variance = 0.5;  // per-coordinate variance of each isotropic mode
  std::size_t samples_per_mode = 2500;

  void validate() const;
  // Four modes at (+-10, +-10), variance 0.5.
  static GaussianMixtureSpec toy();
};

// Label of each row is the index of the mode it was drawn from; rows are
// ordered mode by mode.
Dataset gen_gaussian_mixture(const GaussianMixtureSpec& spec, std::uint64_t seed);

enum class PartitionMode { kIid, kByMode, kByLabel, kFractions };

PartitionMode parse_partition_mode(const std::string& name);
std::string partition_mode_name(PartitionMode mode);

struct PartitionPlan {
  PartitionMode mode = PartitionMode::kIid;
  std::vector<double> fractions;  // kFractions only; must sum to 1
  std::uint64_t seed = 0;
};

struct SitedDataset {
  std::vector<Dataset> sites;
  std::vector<std::uint64_t> counts;  // n_j
  MixtureWeights weights;             // pi_j = n_j / n, omega_j(y) per label

  std::size_t num_sites() const { return sites.size(); }
  std::uint64_t total() const;
  // Site data stacked back together in site order.
  Dataset merged() const;
};

// kIid: uniform shuffle dealt round-robin to K sites.
// kByMode / kByLabel: rows with label j go to site j (K must equal the
//   number of labels).
// kFractions: shuffle, then contiguous chunks sized by the fractions.
SitedDataset partition(const Dataset& data, const PartitionPlan& plan, std::size_t k);

// Per-class counts for labels 0..num_classes-1.
std::vector<std::uint64_t> class_counts(const Dataset& data, std::size_t num_classes);

// CSV with header x0,x1,...,label.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

// IDX files (big-endian). Images (magic 0x00000803) are scaled from u8 to
// [-1, 1] and flattened row-major; labels use magic 0x00000801.
struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  Tensor pixels;  // count x (rows * cols)
};
IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<int> read_idx_labels(const std::filesystem::path& path);
// Reads both files and checks their counts agree.
Dataset read_idx_dataset(const std::filesystem::path& images,
                         const std::filesystem::path& labels);

}  // namespace uagan
