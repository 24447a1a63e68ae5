#pragma once

// Odds-value aggregation of local discriminators.
//
// The simulated central discriminator D_ua has odds equal to the weighted sum
// of the local odds: odds(D_ua) = sum_j w_j * odds(D_j), with w_j = pi_j in
// the unconditional case and pi_j * omega_j(y) in the conditional one. The
// sum is evaluated in log-odds space (log-sum-exp over log w_j + logit D_j)
// so predictions close to 1 never overflow.

#include <cstdint>
#include <span>
#include <vector>

#include "uagan/tensor.hpp"

namespace uagan {

// p / (1 - p); DomainError unless 0 < p < 1.
double odds(double p);
// v / (1 + v); DomainError unless v > 0.
double inv_odds(double v);
// log(p / (1 - p)); DomainError unless 0 < p < 1.
double logit(double p);
// 1 / (1 + exp(-l)), evaluated without overflow.
double inv_logit(double l);

class MixtureWeights {
 public:
  MixtureWeights() = default;
  explicit MixtureWeights(std::vector<double> pi);
  // omega[j][y]: share of class y inside site j's data.
  MixtureWeights(std::vector<double> pi, std::vector<std::vector<double>> omega);

  // pi_j = n_j / n.
  static MixtureWeights from_counts(std::span<const std::uint64_t> counts);
  // Per-site class counts; pi from row totals, omega from per-row shares.
  static MixtureWeights from_class_counts(
      const std::vector<std::vector<std::uint64_t>>& class_counts);

  std::size_t num_sites() const { return pi_.size(); }
  const std::vector<double>& pi() const { return pi_; }
  bool conditional() const { return !omega_.empty(); }
  std::size_t num_classes() const { return omega_.empty() ? 0 : omega_.front().size(); }
  double omega(std::size_t site, std::size_t label) const { return omega_.at(site).at(label); }

  // pi_j * omega_j(y) for every site; divided by their sum when `normalize`.
  // DomainError when every site has zero weight for y.
  std::vector<double> label_weights(int label, bool normalize) const;

 private:
  std::vector<double> pi_;
  std::vector<std::vector<double>> omega_;
};

// What one site reports for a synthetic batch.
struct FeedbackBatch {
  std::uint64_t site_id = 0;
  std::uint64_t round = 0;
  std::uint64_t batch_id = 0;
  std::vector<double> predictions;  // D_j(x_i), i = 1..m
  Tensor gradients;                 // dD_j(x_i)/dx_i, m x data_dim
};

// D_ua from local predictions and raw (not renormalised) weights. Zero-weight
// sites are skipped; a lone term of weight exactly 1 returns its prediction
// unchanged.
double aggregate_odds_weighted(std::span<const double> preds,
                               std::span<const double> weights);
double aggregate_odds(std::span<const double> preds, const MixtureWeights& w);
double aggregate_odds_conditional(std::span<const double> preds, int label,
                                  const MixtureWeights& w,
                                  bool normalize_conditional_weights = false);

// Arithmetic mean of the predictions (Avg-GAN baseline).
double avg_aggregate(std::span<const double> preds);

enum class GeneratorLoss {
  kSaturating,     // minimise log(1 - D)
  kNonSaturating,  // minimise -log D
};

enum class Aggregator { kUniversal, kAverage, kCentralized };

// Per-sample central predictions plus the gradient of the batch-mean
// generator loss with respect to every synthetic sample.
struct GeneratorSignal {
  std::vector<double> central;  // D_ua (or D_avg / D) per sample
  Tensor grad;                  // m x data_dim
  double loss = 0.0;            // batch-mean generator loss
};

// Chain rule from the local (prediction, input-gradient) pairs:
//   dL/dD_ua * dD_ua/dodds_ua * sum_j dodds_ua/dD_j * dD_j/dx
// `feedback[j]` must come from site j. `labels` switches to conditional
// weights pi_j * omega_j(y_i).
GeneratorSignal ua_generator_gradient(std::span<const FeedbackBatch> feedback,
                                      const MixtureWeights& weights,
                                      GeneratorLoss loss,
                                      const std::vector<int>* labels = nullptr,
                                      bool normalize_conditional_weights = false);

GeneratorSignal avg_generator_gradient(std::span<const FeedbackBatch> feedback,
                                       GeneratorLoss loss);

// Vanilla single-discriminator generator gradient.
GeneratorSignal classical_generator_gradient(const FeedbackBatch& feedback,
                                             GeneratorLoss loss);

// Validates that `feedback` holds exactly one batch per site 0..K-1, all for
// the same batch id and of the same shape; throws ProtocolError otherwise.
void check_feedback_complete(std::span<const FeedbackBatch> feedback,
                             std::size_t num_sites);

}  // namespace uagan
