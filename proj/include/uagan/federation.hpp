#pragma once

// Center/site training loop. The center owns the generator and never sees
// real data; each site owns one discriminator and its local dataset and only
// ever sends SiteHello and Feedback messages.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uagan/adam.hpp"
#include "uagan/aggregation.hpp"
#include "uagan/data.hpp"
#include "uagan/messages.hpp"
#include "uagan/models.hpp"
#include "uagan/transport.hpp"

namespace uagan {

struct TrainConfig {
  std::size_t rounds = 3000;
  std::size_t batch = 256;       // m
  std::size_t disc_steps = 1;    // discriminator batches per round
  Aggregator aggregator = Aggregator::kUniversal;
  GeneratorLoss loss = GeneratorLoss::kSaturating;
  bool conditional = false;
  std::size_t num_classes = 0;   // conditional runs
  bool normalize_conditional_weights = false;
  MlpSpec generator;             // input = noise dim (+ classes)
  NoiseSpec noise{2, 0.5};
  AdamConfig generator_opt;
  std::uint64_t seed = 1;
  Millis timeout{30000};
  std::size_t max_retries = 3;
};

struct SiteConfig {
  std::uint64_t site_id = 0;
  Dataset data;
  MlpSpec discriminator;         // input = data dim (+ classes), sigmoid output
  AdamConfig opt;
  std::size_t disc_steps = 1;
  bool conditional = false;
  std::size_t num_classes = 0;
  std::uint64_t seed = 1;
  std::filesystem::path checkpoint;  // written on shutdown when non-empty
};

// Site state machine. handle() consumes one frame from the center and
// returns the frames to send back.
class SiteActor {
 public:
  explicit SiteActor(SiteConfig config);

  Bytes hello() const;
  std::vector<Bytes> handle(const Bytes& frame);
  bool finished() const { return finished_; }
  const Mlp& discriminator() const { return disc_; }

 private:
  void discriminator_step(const SynBatch& batch);
  Feedback feedback(const SynBatch& batch) const;

  SiteConfig cfg_;
  Mlp disc_;
  AdamState state_;
  Rng rng_;
  std::optional<LabelEncoding> encoding_;
  std::uint64_t round_ = 0;
  bool in_round_ = false;
  std::size_t batches_this_round_ = 0;
  std::set<std::uint64_t> disc_batches_;  // discriminator-phase ids this round
  std::optional<std::uint64_t> generator_batch_;
  Bytes last_feedback_;
  double disc_loss_sum_ = 0.0;
  bool finished_ = false;
};

// Sends the hello, then answers frames until shutdown. A channel closed by
// the center ends the loop quietly; the center reports its own failure.
void serve_site(SiteActor& site, Channel& channel);

struct RoundMetrics {
  std::uint64_t round = 0;
  double gen_loss = 0.0;
  double mean_dua = 0.0;  // mean central prediction on the generator batch
  std::vector<double> disc_loss;  // per site
};

struct RoundRecord {
  RoundMetrics metrics;
  const SynBatch* batch = nullptr;                 // generator-phase batch
  const std::vector<FeedbackBatch>* feedback = nullptr;  // indexed by site
  const GeneratorSignal* signal = nullptr;
};
using RoundObserver = std::function<void(const RoundRecord&)>;

struct TrainResult {
  Mlp generator;
  MixtureWeights weights;
  std::vector<RoundMetrics> metrics;
};

// Runs the center over already-connected site channels (any order; sites
// identify themselves in their hello). Channels are closed on return.
TrainResult run_training(const TrainConfig& config,
                         std::vector<std::unique_ptr<Channel>> sites,
                         const RoundObserver& observer = {});

enum class TransportKind { kInproc, kTcp };

struct TransportSpec {
  TransportKind kind = TransportKind::kInproc;
  TcpAddress address;       // kTcp; port 0 picks a free one
  bool threaded = false;    // kInproc: one thread per site instead of loopback
  bool external_sites = false;  // kTcp: wait for separate site processes
  std::size_t external_site_count = 0;
};

// Starts the sites in-process (threads or loopback) or waits for external
// ones, then trains. `transcripts`, when given, receives one transcript per
// site holding every frame that site sent.
TrainResult run_federation(const TrainConfig& config, std::vector<SiteConfig> sites,
                           const TransportSpec& transport,
                           const RoundObserver& observer = {},
                           std::vector<std::shared_ptr<Transcript>>* transcripts = nullptr);

// metrics.csv: round,gen_loss,mean_dua,per_site_disc_loss_0..K-1
std::string metrics_header(std::size_t num_sites);
std::string metrics_row(const RoundMetrics& m);

}  // namespace uagan
