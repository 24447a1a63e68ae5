#pragma once

// End-to-end commands behind the CLI: dataset generation, training with
// evaluation and artifacts, and a standalone site process.

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uagan/config.hpp"
#include "uagan/eval.hpp"
#include "uagan/federation.hpp"

namespace uagan {

// Writes full.csv, site_0..K-1.csv and manifest.txt into `out_dir`.
std::vector<std::filesystem::path> gen_data(const DataSpecFile& spec,
                                            const std::filesystem::path& out_dir,
                                            std::uint64_t seed);

struct RunData {
  Dataset full;                 // unscaled
  std::vector<Dataset> sites;   // unscaled, one per site
  std::size_t num_classes = 0;
  // Mixture geometry when known (toy data or a gen-data manifest).
  std::vector<std::array<double, 2>> centers;
  std::optional<double> variance;
};

// Loads or generates the data the config points at and partitions it. A
// centralized run gets a single site holding the merged data.
RunData load_run_data(const RunConfig& config);

TrainConfig make_train_config(const RunConfig& config, const RunData& data);
// Site j's configuration with rows scaled by data_scale.
SiteConfig make_site_config(const RunConfig& config, const RunData& data, std::size_t site);
TransportSpec make_transport_spec(const RunConfig& config, std::size_t num_sites);

struct TrainOutcome {
  TrainResult result;
  Tensor samples;  // generated points mapped back to data units
  std::optional<ModeReport> modes;
  std::vector<std::pair<std::string, double>> eval;
};

// Trains and writes metrics.csv, generator.ckpt, site_<j>.ckpt, samples.csv
// and eval.csv under config.out_dir.
TrainOutcome run_train(const RunConfig& config, const RoundObserver& observer = {},
                       std::vector<std::shared_ptr<Transcript>>* transcripts = nullptr);

// Connects site `site_id` to the center's tcp address and serves it.
void run_site(const RunConfig& config, std::size_t site_id);

}  // namespace uagan
