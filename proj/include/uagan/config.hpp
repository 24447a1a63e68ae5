#pragma once

// Flat "key = value" run configuration. Blank lines and lines starting with
// '#' are ignored; unknown keys are errors.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uagan/adam.hpp"
#include "uagan/aggregation.hpp"
#include "uagan/data.hpp"
#include "uagan/models.hpp"

namespace uagan {

// Raw key/value pairs in file order; duplicate keys are errors.
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin);

struct RunConfig {
  // Data: either a gen-data output directory, IDX files, or the built-in toy
  // mixture generated from data_seed.
  std::filesystem::path data_dir;
  std::filesystem::path idx_images;
  std::filesystem::path idx_labels;
  std::uint64_t data_seed = 0;
  std::size_t num_sites = 4;
  PartitionMode partition = PartitionMode::kByMode;
  std::vector<double> fractions;
  std::uint64_t partition_seed = 0;
  double data_scale = 1.0;  // applied to real rows; samples are mapped back

  Aggregator aggregator = Aggregator::kUniversal;
  bool conditional = false;
  bool normalize_conditional_weights = false;
  bool nonsaturating = false;

  std::vector<std::size_t> generator_hidden{64, 64};
  std::vector<std::size_t> disc_hidden{64, 64};
  Activation generator_output = Activation::kIdentity;
  double leaky_slope = 0.2;
  std::size_t noise_dim = 2;
  double noise_variance = 0.5;

  AdamConfig generator_opt;
  AdamConfig disc_opt;
  std::size_t rounds = 3000;
  std::size_t batch = 256;
  std::size_t disc_steps = 1;

  std::string transport = "inproc";  // inproc | tcp:host:port
  bool tcp_external_sites = false;
  std::size_t threads = 1;           // 1: single-threaded loopback schedule
  std::uint64_t seed = 1;
  std::uint64_t timeout_ms = 30000;
  std::size_t max_retries = 3;
  std::filesystem::path out_dir = "out";

  std::size_t eval_samples = 4096;
  std::optional<double> eval_radius;  // default 3 sigma of the mixture
  double eval_fraction = 0.10;
  double eval_bandwidth = 1.0;
  std::size_t eval_mmd_samples = 1024;

  void validate() const;
};

// Paths in the file are resolved relative to the file's directory.
RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_dir = {},
                           const std::string& origin = "config");
RunConfig load_run_config(const std::filesystem::path& path);

// Gaussian-mixture spec file for gen-data: centers = x,y;x,y;...,
// variance, samples_per_mode, num_sites, partition, fractions.
struct DataSpecFile {
  GaussianMixtureSpec mixture;
  std::size_t num_sites = 4;
  PartitionMode partition = PartitionMode::kByMode;
  std::vector<double> fractions;
};
DataSpecFile parse_data_spec(const std::string& text, const std::string& origin = "spec");
DataSpecFile load_data_spec(const std::filesystem::path& path);

std::vector<std::array<double, 2>> parse_centers(const std::string& text);
std::string format_centers(const std::vector<std::array<double, 2>>& centers);

}  // namespace uagan
