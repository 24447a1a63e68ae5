#include "uagan/federation.hpp"

#include <cstdio>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "uagan/error.hpp"
#include "uagan/log.hpp"

namespace uagan {
namespace {

// Fixed stream ids so every actor's randomness depends only on the run seed
// and its own identity.
constexpr std::uint64_t kCenterNoiseStream = 0x63656e74;
constexpr std::uint64_t kGeneratorInitStream = 0x67656e69;
constexpr std::uint64_t kSiteSampleStream = 0x73697465'00000000;
constexpr std::uint64_t kSiteInitStream = 0x64697363'00000000;

Tensor gather_rows(const Tensor& rows, const std::vector<std::size_t>& idx) {
  const std::size_t d = rows.cols();
  Tensor out({idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = rows.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::string describe(const Message& msg) { return message_tag_name(message_tag(msg)); }

}  // namespace

SiteActor::SiteActor(SiteConfig config)
    : cfg_(std::move(config)),
      disc_([&] {
        Rng init = make_rng(cfg_.seed, kSiteInitStream + cfg_.site_id);
        return Mlp(cfg_.discriminator, init);
      }()),
      state_(make_adam_state(disc_.params())),
      rng_(make_rng(cfg_.seed, kSiteSampleStream + cfg_.site_id)) {
  if (cfg_.data.size() == 0) {
    throw ConfigError("site " + std::to_string(cfg_.site_id) + ": empty dataset");
  }
  if (cfg_.conditional) {
    if (cfg_.num_classes == 0) throw ConfigError("conditional site needs num_classes");
    encoding_.emplace(cfg_.num_classes);
  }
}

Bytes SiteActor::hello() const {
  SiteHello h;
  h.site_id = cfg_.site_id;
  h.num_samples = cfg_.data.size();
  if (cfg_.conditional) {
    for (int y : cfg_.data.labels) ++h.class_counts[static_cast<std::uint64_t>(y)];
  }
  return encode_message(h);
}

void SiteActor::discriminator_step(const SynBatch& batch) {
  const std::size_t m = batch.samples.rows();
  std::vector<std::size_t> idx(m);
  for (auto& i : idx) i = uniform_index(rng_, cfg_.data.size());
  const Tensor real = gather_rows(cfg_.data.rows, idx);
  double objective;
  if (encoding_) {
    if (!batch.labels) throw ProtocolError("conditional site received unlabelled batch");
    std::vector<int> real_labels(m);
    for (std::size_t i = 0; i < m; ++i) real_labels[i] = cfg_.data.labels[idx[i]];
    const Tensor real_oh = encoding_->encode(real_labels);
    const Tensor fake_oh = encoding_->encode(*batch.labels);
    objective = local_discriminator_step(disc_, state_, cfg_.opt, real, batch.samples,
                                         &real_oh, &fake_oh);
  } else {
    objective = local_discriminator_step(disc_, state_, cfg_.opt, real, batch.samples);
  }
  disc_loss_sum_ += -objective;
}

Feedback SiteActor::feedback(const SynBatch& batch) const {
  InputGradient ig;
  if (encoding_) {
    if (!batch.labels) throw ProtocolError("conditional site received unlabelled batch");
    const Tensor oh = encoding_->encode(*batch.labels);
    ig = predict_with_input_gradient(disc_, batch.samples, &oh);
  } else {
    ig = predict_with_input_gradient(disc_, batch.samples);
  }
  Feedback fb;
  fb.round = batch.round;
  fb.batch_id = batch.batch_id;
  fb.site_id = cfg_.site_id;
  fb.predictions = std::move(ig.predictions);
  fb.gradients = std::move(ig.gradients);
  const std::size_t steps = disc_batches_.size();
  fb.disc_loss = steps ? disc_loss_sum_ / static_cast<double>(steps) : 0.0;
  return fb;
}

std::vector<Bytes> SiteActor::handle(const Bytes& frame) {
  if (finished_) throw ProtocolError("site " + std::to_string(cfg_.site_id) + ": frame after shutdown");
  const Message msg = decode_message(frame);
  if (const auto* rc = std::get_if<RoundControl>(&msg)) {
    switch (rc->directive) {
      case Directive::kBegin:
        round_ = rc->round;
        in_round_ = true;
        batches_this_round_ = 0;
        disc_batches_.clear();
        generator_batch_.reset();
        disc_loss_sum_ = 0.0;
        break;
      case Directive::kEnd:
        in_round_ = false;
        break;
      case Directive::kShutdown:
        if (!cfg_.checkpoint.empty()) save_checkpoint(cfg_.checkpoint, disc_.named_params());
        finished_ = true;
        break;
    }
    return {};
  }
  const auto* batch = std::get_if<SynBatch>(&msg);
  if (!batch) {
    throw ProtocolError("site " + std::to_string(cfg_.site_id) + ": unexpected " + describe(msg));
  }
  if (!in_round_ || batch->round != round_) {
    throw ProtocolError("site " + std::to_string(cfg_.site_id) + ": batch for round " +
                        std::to_string(batch->round) + " outside the current round");
  }
  if (disc_batches_.count(batch->batch_id)) return {};
  if (generator_batch_ == batch->batch_id) return {last_feedback_};
  if (batch->samples.rows() == 0) throw ProtocolError("empty synthetic batch");
  ++batches_this_round_;
  if (batches_this_round_ <= cfg_.disc_steps) {
    disc_batches_.insert(batch->batch_id);
    discriminator_step(*batch);
    return {};
  }
  if (generator_batch_) {
    throw ProtocolError("site " + std::to_string(cfg_.site_id) +
                        ": second generator batch in round " + std::to_string(round_));
  }
  generator_batch_ = batch->batch_id;
  last_feedback_ = encode_message(feedback(*batch));
  return {last_feedback_};
}

void serve_site(SiteActor& site, Channel& channel) {
  try {
    channel.send(site.hello());
    while (!site.finished()) {
      const std::optional<Bytes> frame = channel.recv(Millis(1000));
      if (!frame) continue;
      for (const Bytes& out : site.handle(*frame)) channel.send(out);
    }
  } catch (const TransportError& e) {
    log_info(std::string("site stopping: ") + e.what());
  }
}

namespace {

class Center {
 public:
  Center(const TrainConfig& cfg, std::vector<std::unique_ptr<Channel>> channels)
      : cfg_(cfg), channels_(std::move(channels)),
        rng_(make_rng(cfg.seed, kCenterNoiseStream)) {}

  ~Center() {
    for (auto& c : channels_) {
      if (c) c->close();
    }
  }

  TrainResult run(const RoundObserver& observer) {
    register_sites();
    Rng init = make_rng(cfg_.seed, kGeneratorInitStream);
    TrainResult result{Mlp(cfg_.generator, init), weights_, {}};
    Mlp& gen = result.generator;
    AdamState opt = make_adam_state(gen.params());
    const std::size_t k = channels_.size();

    for (std::uint64_t t = 0; t < cfg_.rounds; ++t) {
      broadcast(encode_message(RoundControl{t, Directive::kBegin}));
      for (std::size_t s = 0; s < cfg_.disc_steps; ++s) {
        SynBatch b = draw_batch(gen, t, nullptr, nullptr);
        broadcast(encode_message(b));
      }

      ad::Tape tape;
      std::vector<ad::Var> params;
      ad::Var xhat;
      SynBatch b = draw_batch(gen, t, &tape, &params, &xhat);
      const Bytes frame = encode_message(b);
      broadcast(frame);
      std::vector<double> disc_loss(k);
      std::vector<FeedbackBatch> fb = collect(b, frame, disc_loss);

      GeneratorSignal signal;
      switch (cfg_.aggregator) {
        case Aggregator::kUniversal:
          signal = ua_generator_gradient(fb, weights_, cfg_.loss,
                                         b.labels ? &*b.labels : nullptr,
                                         cfg_.normalize_conditional_weights);
          break;
        case Aggregator::kAverage:
          signal = avg_generator_gradient(fb, cfg_.loss);
          break;
        case Aggregator::kCentralized:
          signal = classical_generator_gradient(fb.front(), cfg_.loss);
          break;
      }
      ad::Gradients grads = tape.backward(xhat, signal.grad);
      std::vector<Tensor> g;
      g.reserve(params.size());
      for (ad::Var p : params) g.push_back(grads[p]);
      adam_step(gen.params(), g, opt, cfg_.generator_opt);

      RoundMetrics m;
      m.round = t;
      m.gen_loss = signal.loss;
      double s = 0.0;
      for (double d : signal.central) s += d;
      m.mean_dua = s / static_cast<double>(signal.central.size());
      m.disc_loss = std::move(disc_loss);
      if (observer) observer(RoundRecord{m, &b, &fb, &signal});
      if (log_level() >= LogLevel::kDebug) {
        log_debug("round " + std::to_string(t) + " gen_loss " + std::to_string(m.gen_loss));
      }
      result.metrics.push_back(std::move(m));
      broadcast(encode_message(RoundControl{t, Directive::kEnd}));
    }
    broadcast(encode_message(RoundControl{cfg_.rounds, Directive::kShutdown}));
    for (auto& c : channels_) c->close();
    return result;
  }

 private:
  void register_sites() {
    const std::size_t k = channels_.size();
    if (k == 0) throw ConfigError("no sites");
    if (cfg_.aggregator == Aggregator::kCentralized && k != 1) {
      throw ConfigError("centralized aggregation needs exactly one site, got " + std::to_string(k));
    }
    std::vector<std::unique_ptr<Channel>> ordered(k);
    std::vector<SiteHello> hellos(k);
    for (auto& ch : channels_) {
      auto frame = ch->recv(cfg_.timeout);
      if (!frame) throw TimeoutError("site did not say hello in time");
      const Message msg = decode_message(*frame);
      const auto* h = std::get_if<SiteHello>(&msg);
      if (!h) throw ProtocolError("expected SiteHello, got " + describe(msg));
      if (h->site_id >= k || ordered[h->site_id]) {
        throw ProtocolError("bad or duplicate site id " + std::to_string(h->site_id));
      }
      if (h->num_samples == 0) throw ProtocolError("site " + std::to_string(h->site_id) + " has no data");
      hellos[h->site_id] = *h;
      ordered[h->site_id] = std::move(ch);
    }
    channels_ = std::move(ordered);

    if (cfg_.conditional) {
      std::vector<std::vector<std::uint64_t>> counts(k, std::vector<std::uint64_t>(cfg_.num_classes));
      for (std::size_t j = 0; j < k; ++j) {
        for (const auto& [label, n] : hellos[j].class_counts) {
          if (label >= cfg_.num_classes) {
            throw ProtocolError("site " + std::to_string(j) + " reports class " +
                                std::to_string(label) + " outside " +
                                std::to_string(cfg_.num_classes) + " classes");
          }
          counts[j][label] = n;
        }
      }
      weights_ = MixtureWeights::from_class_counts(counts);
      std::vector<double> prior(cfg_.num_classes, 0.0);
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t y = 0; y < cfg_.num_classes; ++y) {
          prior[y] += weights_.pi()[j] * weights_.omega(j, y);
        }
      }
      label_prior_ = std::discrete_distribution<int>(prior.begin(), prior.end());
      encoding_.emplace(cfg_.num_classes);
    } else {
      std::vector<std::uint64_t> n(k);
      for (std::size_t j = 0; j < k; ++j) n[j] = hellos[j].num_samples;
      weights_ = MixtureWeights::from_counts(n);
    }
  }

  SynBatch draw_batch(const Mlp& gen, std::uint64_t round, ad::Tape* tape,
                      std::vector<ad::Var>* params, ad::Var* out = nullptr) {
    SynBatch b;
    b.round = round;
    b.batch_id = next_batch_id_++;
    const Tensor z = sample_noise(cfg_.batch, cfg_.noise, rng_);
    std::optional<Tensor> onehot;
    if (encoding_) {
      std::vector<int> labels(cfg_.batch);
      for (int& y : labels) y = label_prior_(rng_);
      onehot = encoding_->encode(labels);
      b.labels = std::move(labels);
    }
    if (tape) {
      *out = generator_forward(gen, *tape, tape->constant(z), onehot ? &*onehot : nullptr, params);
      b.samples = out->value();
    } else {
      b.samples = generate(gen, z, onehot ? &*onehot : nullptr);
    }
    return b;
  }

  void broadcast(const Bytes& frame) {
    for (auto& c : channels_) c->send(frame);
  }

  std::vector<FeedbackBatch> collect(const SynBatch& b, const Bytes& frame,
                                     std::vector<double>& disc_loss) {
    std::vector<FeedbackBatch> out(channels_.size());
    for (std::size_t j = 0; j < channels_.size(); ++j) {
      std::size_t retries = 0;
      for (;;) {
        auto reply = channels_[j]->recv(cfg_.timeout);
        if (!reply) {
          if (retries++ >= cfg_.max_retries) {
            throw TimeoutError("site " + std::to_string(j) + " did not answer batch " +
                               std::to_string(b.batch_id) + " after " +
                               std::to_string(cfg_.max_retries) + " retries");
          }
          log_info("site " + std::to_string(j) + " timed out; resending batch " +
                   std::to_string(b.batch_id));
          channels_[j]->send(frame);
          continue;
        }
        const Message msg = decode_message(*reply);
        const auto* f = std::get_if<Feedback>(&msg);
        if (!f) throw ProtocolError("site " + std::to_string(j) + " sent " + describe(msg));
        if (f->site_id != j) {
          throw ProtocolError("site " + std::to_string(j) + " sent feedback labelled site " +
                              std::to_string(f->site_id));
        }
        if (f->batch_id != b.batch_id) {
          // Answers to earlier batches are duplicates caused by a resend.
          if (f->batch_id < b.batch_id) continue;
          throw ProtocolError("site " + std::to_string(j) + " answered unknown batch " +
                              std::to_string(f->batch_id));
        }
        if (f->round != b.round || f->predictions.size() != b.samples.rows() ||
            f->gradients.rows() != b.samples.rows() ||
            f->gradients.cols() != b.samples.cols()) {
          throw ProtocolError("site " + std::to_string(j) + ": feedback does not match batch " +
                              std::to_string(b.batch_id));
        }
        out[j] = FeedbackBatch{f->site_id, f->round, f->batch_id, f->predictions, f->gradients};
        disc_loss[j] = f->disc_loss;
        break;
      }
    }
    check_feedback_complete(out, channels_.size());
    return out;
  }

  const TrainConfig& cfg_;
  std::vector<std::unique_ptr<Channel>> channels_;
  Rng rng_;
  MixtureWeights weights_;
  std::optional<LabelEncoding> encoding_;
  std::discrete_distribution<int> label_prior_;
  std::uint64_t next_batch_id_ = 0;
};

// Joins site threads on scope exit and keeps the first site failure.
class SiteThreads {
 public:
  ~SiteThreads() { join(); }

  void spawn(std::function<void()> body) {
    threads_.emplace_back([this, body = std::move(body)] {
      try {
        body();
      } catch (...) {
        std::lock_guard lock(mu_);
        if (!error_) error_ = std::current_exception();
      }
    });
  }

  void join() {
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
  }

  std::exception_ptr error() {
    std::lock_guard lock(mu_);
    return error_;
  }

 private:
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::exception_ptr error_;
};

}  // namespace

TrainResult run_training(const TrainConfig& config,
                         std::vector<std::unique_ptr<Channel>> sites,
                         const RoundObserver& observer) {
  if (config.batch == 0) throw ConfigError("batch must be positive");
  Center center(config, std::move(sites));
  return center.run(observer);
}

TrainResult run_federation(const TrainConfig& config, std::vector<SiteConfig> sites,
                           const TransportSpec& transport, const RoundObserver& observer,
                           std::vector<std::shared_ptr<Transcript>>* transcripts) {
  const std::size_t k = transport.external_sites ? transport.external_site_count : sites.size();
  if (transcripts) {
    transcripts->clear();
    for (std::size_t j = 0; j < sites.size(); ++j) {
      transcripts->push_back(std::make_shared<Transcript>());
    }
  }
  auto wrap = [&](std::unique_ptr<Channel> ch, std::size_t j) {
    return transcripts ? recording_channel(std::move(ch), (*transcripts)[j]) : std::move(ch);
  };

  std::vector<std::unique_ptr<SiteActor>> actors;
  for (auto& s : sites) actors.push_back(std::make_unique<SiteActor>(std::move(s)));

  std::vector<std::unique_ptr<Channel>> center_ends;
  SiteThreads threads;
  std::optional<TcpListener> listener;
  std::exception_ptr center_error;
  std::optional<TrainResult> result;

  try {
    if (transport.kind == TransportKind::kInproc && !transport.threaded) {
      for (std::size_t j = 0; j < actors.size(); ++j) {
        SiteActor* a = actors[j].get();
        FrameHandler h = [a](const Bytes& f) { return a->handle(f); };
        if (transcripts) {
          (*transcripts)[j]->record(a->hello());
          h = recording_handler(std::move(h), (*transcripts)[j]);
        }
        center_ends.push_back(loopback_channel(std::move(h), {a->hello()}));
      }
    } else if (transport.kind == TransportKind::kInproc) {
      for (std::size_t j = 0; j < actors.size(); ++j) {
        auto [center_end, site_end] = inproc_pair();
        center_ends.push_back(std::move(center_end));
        auto ch = std::shared_ptr<Channel>(wrap(std::move(site_end), j));
        SiteActor* a = actors[j].get();
        threads.spawn([a, ch] { serve_site(*a, *ch); });
      }
    } else {
      listener.emplace(transport.address);
      log_info("center listening on " + transport.address.host + ":" +
               std::to_string(listener->port()));
      if (!transport.external_sites) {
        const TcpAddress addr{transport.address.host, listener->port()};
        for (std::size_t j = 0; j < actors.size(); ++j) {
          SiteActor* a = actors[j].get();
          const bool record = transcripts != nullptr;
          auto t = record ? (*transcripts)[j] : nullptr;
          const Millis timeout = config.timeout;
          threads.spawn([a, addr, record, t, timeout] {
            auto ch = tcp_connect(addr, timeout);
            if (record) ch = recording_channel(std::move(ch), t);
            serve_site(*a, *ch);
          });
        }
      }
      for (std::size_t j = 0; j < k; ++j) center_ends.push_back(listener->accept(config.timeout));
    }
    result = run_training(config, std::move(center_ends), observer);
  } catch (...) {
    center_error = std::current_exception();
  }
  for (auto& c : center_ends) {
    if (c) c->close();
  }
  threads.join();
  const std::exception_ptr site_error = threads.error();
  if (center_error) {
    // A failing site usually surfaces at the center as a closed channel;
    // report the site's own error instead.
    try {
      std::rethrow_exception(center_error);
    } catch (const TransportError&) {
      if (site_error) std::rethrow_exception(site_error);
      throw;
    }
  }
  if (site_error) std::rethrow_exception(site_error);
  return std::move(*result);
}

std::string metrics_header(std::size_t num_sites) {
  std::string h = "round,gen_loss,mean_dua";
  for (std::size_t j = 0; j < num_sites; ++j) h += ",per_site_disc_loss_" + std::to_string(j);
  return h;
}

std::string metrics_row(const RoundMetrics& m) {
  char buf[64];
  std::string row = std::to_string(m.round);
  auto add = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    row += buf;
  };
  add(m.gen_loss);
  add(m.mean_dua);
  for (double d : m.disc_loss) add(d);
  return row;
}

}  // namespace uagan
