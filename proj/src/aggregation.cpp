#include "uagan/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "uagan/error.hpp"

namespace uagan {

namespace {

constexpr double kWeightTol = 1e-12;

void require_probability(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError(std::string(what) + ": probability " + std::to_string(p) +
                      " outside (0, 1)");
  }
}

void check_simplex(std::span<const double> w, const std::string& what) {
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(what + ": negative or non-finite weight");
    total += v;
  }
  if (std::abs(total - 1.0) > kWeightTol) {
    throw ConfigError(what + ": weights sum to " + std::to_string(total));
  }
}

double loss_value(double d, GeneratorLoss loss) {
  return loss == GeneratorLoss::kSaturating ? std::log1p(-d) : -std::log(d);
}

double loss_slope(double d, GeneratorLoss loss) {
  return loss == GeneratorLoss::kSaturating ? -1.0 / (1.0 - d) : -1.0 / d;
}

}  // namespace

double odds(double p) {
  require_probability(p, "odds");
  return p / (1.0 - p);
}

double inv_odds(double v) {
  if (!(v > 0.0)) throw DomainError("inv_odds: odds value must be positive");
  if (std::isinf(v)) return 1.0;
  return inv_logit(std::log(v));
}

double logit(double p) {
  require_probability(p, "logit");
  return std::log(p) - std::log1p(-p);
}

double inv_logit(double l) {
  if (l >= 0.0) return 1.0 / (1.0 + std::exp(-l));
  const double e = std::exp(l);
  return e / (1.0 + e);
}

MixtureWeights::MixtureWeights(std::vector<double> pi) : pi_(std::move(pi)) {
  if (pi_.empty()) throw ConfigError("mixture weights: no sites");
  check_simplex(pi_, "mixture weights");
}

MixtureWeights::MixtureWeights(std::vector<double> pi,
                               std::vector<std::vector<double>> omega)
    : MixtureWeights(std::move(pi)) {
  omega_ = std::move(omega);
  if (omega_.size() != pi_.size()) {
    throw ConfigError("mixture weights: omega has " + std::to_string(omega_.size()) +
                      " sites, pi has " + std::to_string(pi_.size()));
  }
  for (std::size_t j = 0; j < omega_.size(); ++j) {
    if (omega_[j].size() != omega_.front().size() || omega_[j].empty()) {
      throw ConfigError("mixture weights: omega rows must share a class count");
    }
    check_simplex(omega_[j], "omega of site " + std::to_string(j));
  }
}

MixtureWeights MixtureWeights::from_counts(std::span<const std::uint64_t> counts) {
  const double n = static_cast<double>(
      std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  if (counts.empty() || n == 0.0) throw ConfigError("mixture weights: no data");
  std::vector<double> pi;
  for (std::uint64_t c : counts) {
    if (c == 0) throw ConfigError("mixture weights: site with n_j = 0");
    pi.push_back(static_cast<double>(c) / n);
  }
  return MixtureWeights(std::move(pi));
}

MixtureWeights MixtureWeights::from_class_counts(
    const std::vector<std::vector<std::uint64_t>>& class_counts) {
  std::vector<std::uint64_t> totals;
  std::vector<std::vector<double>> omega;
  for (const auto& row : class_counts) {
    const std::uint64_t total = std::accumulate(row.begin(), row.end(), std::uint64_t{0});
    if (total == 0) throw ConfigError("mixture weights: site with no labelled rows");
    totals.push_back(total);
    std::vector<double> shares;
    for (std::uint64_t c : row) shares.push_back(static_cast<double>(c) / static_cast<double>(total));
    omega.push_back(std::move(shares));
  }
  MixtureWeights base = from_counts(totals);
  return MixtureWeights(base.pi(), std::move(omega));
}

std::vector<double> MixtureWeights::label_weights(int label, bool normalize) const {
  if (!conditional()) throw ConfigError("mixture weights: no per-label shares");
  if (label < 0 || static_cast<std::size_t>(label) >= num_classes()) {
    throw DomainError("label " + std::to_string(label) + " unsupported: outside class range");
  }
  std::vector<double> w(pi_.size());
  double total = 0.0;
  for (std::size_t j = 0; j < pi_.size(); ++j) {
    w[j] = pi_[j] * omega_[j][static_cast<std::size_t>(label)];
    total += w[j];
  }
  if (!(total > 0.0)) {
    throw DomainError("label " + std::to_string(label) + " unsupported: no site holds it");
  }
  if (normalize) {
    for (double& v : w) v /= total;
  }
  return w;
}

double aggregate_odds_weighted(std::span<const double> preds,
                               std::span<const double> weights) {
  if (preds.size() != weights.size()) {
    throw ShapeError("aggregate_odds: " + std::to_string(preds.size()) +
                     " predictions for " + std::to_string(weights.size()) + " weights");
  }
  std::vector<double> terms;
  terms.reserve(preds.size());
  std::size_t lone = 0;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    require_probability(preds[j], "aggregate_odds");
    if (weights[j] < 0.0) throw DomainError("aggregate_odds: negative weight");
    if (weights[j] == 0.0) continue;
    lone = j;
    terms.push_back(std::log(weights[j]) + logit(preds[j]));
  }
  if (terms.empty()) throw DomainError("aggregate_odds: all weights are zero");
  if (terms.size() == 1 && weights[lone] == 1.0) return preds[lone];

  const double top = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return inv_logit(top + std::log(acc));
}

double aggregate_odds(std::span<const double> preds, const MixtureWeights& w) {
  return aggregate_odds_weighted(preds, w.pi());
}

double aggregate_odds_conditional(std::span<const double> preds, int label,
                                  const MixtureWeights& w,
                                  bool normalize_conditional_weights) {
  const std::vector<double> lw = w.label_weights(label, normalize_conditional_weights);
  return aggregate_odds_weighted(preds, lw);
}

double avg_aggregate(std::span<const double> preds) {
  if (preds.empty()) throw DomainError("avg_aggregate: no predictions");
  double s = 0.0;
  for (double p : preds) s += p;
  return s / static_cast<double>(preds.size());
}

void check_feedback_complete(std::span<const FeedbackBatch> feedback,
                             std::size_t num_sites) {
  if (feedback.size() != num_sites) {
    throw ProtocolError("incomplete round: " + std::to_string(feedback.size()) +
                        " of " + std::to_string(num_sites) + " sites reported");
  }
  for (std::size_t j = 0; j < feedback.size(); ++j) {
    const FeedbackBatch& f = feedback[j];
    if (f.site_id != j) {
      throw ProtocolError("incomplete round: slot " + std::to_string(j) +
                          " holds feedback from site " + std::to_string(f.site_id));
    }
    if (f.batch_id != feedback[0].batch_id || f.round != feedback[0].round) {
      throw ProtocolError("feedback batch id mismatch: site " + std::to_string(j) +
                          " answered batch " + std::to_string(f.batch_id) +
                          ", expected " + std::to_string(feedback[0].batch_id));
    }
    if (f.predictions.size() != feedback[0].predictions.size() ||
        f.gradients.shape() != feedback[0].gradients.shape() ||
        f.gradients.rows() != f.predictions.size()) {
      throw ProtocolError("feedback shape mismatch from site " + std::to_string(j));
    }
  }
}

GeneratorSignal ua_generator_gradient(std::span<const FeedbackBatch> feedback,
                                      const MixtureWeights& weights,
                                      GeneratorLoss loss,
                                      const std::vector<int>* labels,
                                      bool normalize_conditional_weights) {
  check_feedback_complete(feedback, weights.num_sites());
  const std::size_t m = feedback[0].predictions.size();
  const std::size_t dim = feedback[0].gradients.cols();
  if (labels && labels->size() != m) {
    throw ShapeError("ua_generator_gradient: " + std::to_string(labels->size()) +
                     " labels for " + std::to_string(m) + " samples");
  }
  const std::size_t k = feedback.size();

  GeneratorSignal out;
  out.central.resize(m);
  out.grad = Tensor({m, dim});
  std::vector<double> preds(k);
  std::vector<double> acc(dim);
  double loss_sum = 0.0;
  const double inv_m = 1.0 / static_cast<double>(m);

  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) preds[j] = feedback[j].predictions[i];
    const std::vector<double> w =
        labels ? weights.label_weights((*labels)[i], normalize_conditional_weights)
               : weights.pi();
    const double dua = aggregate_odds_weighted(preds, w);
    out.central[i] = dua;
    loss_sum += loss_value(dua, loss);

    // dD_ua/dD_j = (1 - D_ua)^2 * w_j / (1 - D_j)^2
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      if (w[j] == 0.0) continue;
      const double ratio = (1.0 - dua) / (1.0 - preds[j]);
      const double factor = w[j] * (ratio * ratio);
      auto g = feedback[j].gradients.row(i);
      for (std::size_t c = 0; c < dim; ++c) acc[c] += factor * g[c];
    }
    const double slope = loss_slope(dua, loss) * inv_m;
    auto row = out.grad.row(i);
    for (std::size_t c = 0; c < dim; ++c) row[c] = slope * acc[c];
  }
  out.loss = loss_sum * inv_m;
  return out;
}

GeneratorSignal avg_generator_gradient(std::span<const FeedbackBatch> feedback,
                                       GeneratorLoss loss) {
  check_feedback_complete(feedback, feedback.size());
  const std::size_t m = feedback[0].predictions.size();
  const std::size_t dim = feedback[0].gradients.cols();
  const std::size_t k = feedback.size();
  const double inv_k = 1.0 / static_cast<double>(k);
  const double inv_m = 1.0 / static_cast<double>(m);

  GeneratorSignal out;
  out.central.resize(m);
  out.grad = Tensor({m, dim});
  std::vector<double> preds(k);
  std::vector<double> acc(dim);
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) preds[j] = feedback[j].predictions[i];
    const double davg = avg_aggregate(preds);
    out.central[i] = davg;
    loss_sum += loss_value(davg, loss);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      auto g = feedback[j].gradients.row(i);
      for (std::size_t c = 0; c < dim; ++c) acc[c] += inv_k * g[c];
    }
    const double slope = loss_slope(davg, loss) * inv_m;
    auto row = out.grad.row(i);
    for (std::size_t c = 0; c < dim; ++c) row[c] = slope * acc[c];
  }
  out.loss = loss_sum * inv_m;
  return out;
}

GeneratorSignal classical_generator_gradient(const FeedbackBatch& feedback,
                                             GeneratorLoss loss) {
  const std::size_t m = feedback.predictions.size();
  const std::size_t dim = feedback.gradients.cols();
  if (feedback.gradients.rows() != m) {
    throw ShapeError("classical_generator_gradient: gradient rows do not match predictions");
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  GeneratorSignal out;
  out.central = feedback.predictions;
  out.grad = Tensor({m, dim});
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = feedback.predictions[i];
    require_probability(d, "classical_generator_gradient");
    loss_sum += loss_value(d, loss);
    const double slope = loss_slope(d, loss) * inv_m;
    auto g = feedback.gradients.row(i);
    auto row = out.grad.row(i);
    for (std::size_t c = 0; c < dim; ++c) row[c] = slope * g[c];
  }
  out.loss = loss_sum * inv_m;
  return out;
}

}  // namespace uagan
