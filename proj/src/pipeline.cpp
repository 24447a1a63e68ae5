#include "uagan/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "uagan/error.hpp"
#include "uagan/log.hpp"

namespace uagan {
namespace {

constexpr std::uint64_t kEvalStream = 0x6576616c;
constexpr const char* kManifest = "manifest.txt";

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + g17(v[i]);
  return s;
}

Dataset scaled(const Dataset& d, double s) {
  Dataset out = d;
  if (s != 1.0) {
    for (double& v : out.rows.data()) v *= s;
  }
  return out;
}

std::vector<Dataset> split_sites(const RunConfig& c, const Dataset& full) {
  PartitionPlan plan{c.partition, c.fractions, c.partition_seed};
  return partition(full, plan, c.num_sites).sites;
}

// Label prior y ~ sum_j pi_j omega_j(y).
std::vector<double> label_prior(const MixtureWeights& w) {
  std::vector<double> prior(w.num_classes(), 0.0);
  for (std::size_t j = 0; j < w.num_sites(); ++j) {
    for (std::size_t y = 0; y < prior.size(); ++y) prior[y] += w.pi()[j] * w.omega(j, y);
  }
  return prior;
}

void write_samples_csv(const std::filesystem::path& path, const Tensor& samples,
                       const std::vector<int>* labels) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  for (std::size_t c = 0; c < samples.cols(); ++c) out << (c ? "," : "") << 'x' << c;
  if (labels) out << ",label";
  out << '\n';
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    for (std::size_t c = 0; c < samples.cols(); ++c) out << (c ? "," : "") << g17(samples.at(i, c));
    if (labels) out << ',' << (*labels)[i];
    out << '\n';
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace

std::vector<std::filesystem::path> gen_data(const DataSpecFile& spec,
                                            const std::filesystem::path& out_dir,
                                            std::uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  const Dataset full = gen_gaussian_mixture(spec.mixture, seed);
  const SitedDataset sited = partition(full, {spec.partition, spec.fractions, seed}, spec.num_sites);
  std::vector<std::filesystem::path> files;
  files.push_back(out_dir / "full.csv");
  write_dataset_csv(files.back(), full);
  for (std::size_t j = 0; j < sited.num_sites(); ++j) {
    files.push_back(out_dir / ("site_" + std::to_string(j) + ".csv"));
    write_dataset_csv(files.back(), sited.sites[j]);
  }
  std::string m;
  m += "seed = " + std::to_string(seed) + "\n";
  m += "num_sites = " + std::to_string(spec.num_sites) + "\n";
  m += "partition = " + partition_mode_name(spec.partition) + "\n";
  if (!spec.fractions.empty()) m += "fractions = " + join(spec.fractions) + "\n";
  m += "centers = " + format_centers(spec.mixture.centers) + "\n";
  m += "variance = " + g17(spec.mixture.variance) + "\n";
  m += "samples_per_mode = " + std::to_string(spec.mixture.samples_per_mode) + "\n";
  std::string counts;
  for (std::size_t j = 0; j < sited.num_sites(); ++j) {
    counts += (j ? "," : "") + std::to_string(sited.counts[j]);
  }
  m += "site_counts = " + counts + "\n";
  write_text(out_dir / kManifest, m);
  return files;
}

RunData load_run_data(const RunConfig& c) {
  RunData d;
  if (!c.data_dir.empty()) {
    const auto kv = parse_key_values(read_text(c.data_dir / kManifest),
                                     (c.data_dir / kManifest).string());
    auto get = [&](const std::string& k) -> const std::string& {
      auto it = kv.find(k);
      if (it == kv.end()) throw ConfigError("manifest lacks '" + k + "'");
      return it->second;
    };
    const std::size_t k = std::stoul(get("num_sites"));
    if (k == 0) throw ConfigError("manifest: num_sites must be positive");
    d.centers = parse_centers(get("centers"));
    d.variance = std::stod(get("variance"));
    for (std::size_t j = 0; j < k; ++j) {
      d.sites.push_back(read_dataset_csv(c.data_dir / ("site_" + std::to_string(j) + ".csv")));
    }
    d.full = read_dataset_csv(c.data_dir / "full.csv");
  } else if (!c.idx_images.empty()) {
    d.full = read_idx_dataset(c.idx_images, c.idx_labels);
    d.sites = split_sites(c, d.full);
  } else {
    const GaussianMixtureSpec spec = GaussianMixtureSpec::toy();
    d.full = gen_gaussian_mixture(spec, c.data_seed);
    d.centers = spec.centers;
    d.variance = spec.variance;
    d.sites = split_sites(c, d.full);
  }
  int classes = d.full.num_classes();
  for (const auto& s : d.sites) classes = std::max(classes, s.num_classes());
  d.num_classes = static_cast<std::size_t>(classes);
  if (c.aggregator == Aggregator::kCentralized && d.sites.size() != 1) {
    SitedDataset merged;
    merged.sites = std::move(d.sites);
    d.sites = {merged.merged()};
  }
  return d;
}

TrainConfig make_train_config(const RunConfig& c, const RunData& d) {
  TrainConfig t;
  t.rounds = c.rounds;
  t.batch = c.batch;
  t.disc_steps = c.disc_steps;
  t.aggregator = c.aggregator;
  t.loss = c.nonsaturating ? GeneratorLoss::kNonSaturating : GeneratorLoss::kSaturating;
  t.conditional = c.conditional;
  t.num_classes = c.conditional ? d.num_classes : 0;
  t.normalize_conditional_weights = c.normalize_conditional_weights;
  const std::size_t dim = d.full.dim();
  t.generator.widths = {c.noise_dim + t.num_classes};
  for (std::size_t w : c.generator_hidden) t.generator.widths.push_back(w);
  t.generator.widths.push_back(dim);
  t.generator.output = c.generator_output;
  t.generator.leaky_slope = c.leaky_slope;
  t.generator.validate();
  t.noise = NoiseSpec(c.noise_dim, c.noise_variance);
  t.generator_opt = c.generator_opt;
  t.seed = c.seed;
  t.timeout = Millis(c.timeout_ms);
  t.max_retries = c.max_retries;
  return t;
}

SiteConfig make_site_config(const RunConfig& c, const RunData& d, std::size_t site) {
  if (site >= d.sites.size()) {
    throw ConfigError("site id " + std::to_string(site) + " out of range for " +
                      std::to_string(d.sites.size()) + " sites");
  }
  SiteConfig s;
  s.site_id = site;
  s.data = scaled(d.sites[site], c.data_scale);
  const std::size_t classes = c.conditional ? d.num_classes : 0;
  s.discriminator.widths = {d.full.dim() + classes};
  for (std::size_t w : c.disc_hidden) s.discriminator.widths.push_back(w);
  s.discriminator.widths.push_back(1);
  s.discriminator.output = Activation::kSigmoid;
  s.discriminator.leaky_slope = c.leaky_slope;
  s.discriminator.validate();
  s.opt = c.disc_opt;
  s.disc_steps = c.disc_steps;
  s.conditional = c.conditional;
  s.num_classes = classes;
  s.seed = c.seed;
  s.checkpoint = c.out_dir / ("site_" + std::to_string(site) + ".ckpt");
  return s;
}

TransportSpec make_transport_spec(const RunConfig& c, std::size_t num_sites) {
  TransportSpec t;
  if (c.transport == "inproc") {
    t.kind = TransportKind::kInproc;
    t.threaded = c.threads > 1;
  } else {
    t.kind = TransportKind::kTcp;
    t.address = parse_tcp_address(c.transport.substr(4));
    t.external_sites = c.tcp_external_sites;
    t.external_site_count = num_sites;
  }
  return t;
}

TrainOutcome run_train(const RunConfig& c, const RoundObserver& observer,
                       std::vector<std::shared_ptr<Transcript>>* transcripts) {
  std::filesystem::create_directories(c.out_dir);
  const RunData data = load_run_data(c);
  const TrainConfig tc = make_train_config(c, data);
  const TransportSpec ts = make_transport_spec(c, data.sites.size());
  std::vector<SiteConfig> sites;
  if (!ts.external_sites) {
    for (std::size_t j = 0; j < data.sites.size(); ++j) sites.push_back(make_site_config(c, data, j));
  }

  std::ofstream metrics(c.out_dir / "metrics.csv", std::ios::trunc);
  if (!metrics) throw FormatError("cannot write " + (c.out_dir / "metrics.csv").string());
  metrics << metrics_header(data.sites.size()) << '\n';
  const std::size_t every = std::max<std::size_t>(1, c.rounds / 10);
  auto log_round = [&](const RoundRecord& r) {
    metrics << metrics_row(r.metrics) << '\n';
    if ((r.metrics.round + 1) % every == 0) {
      log_info("round " + std::to_string(r.metrics.round + 1) + "/" + std::to_string(c.rounds) +
               " gen_loss " + g17(r.metrics.gen_loss) + " mean_dua " + g17(r.metrics.mean_dua));
    }
    if (observer) observer(r);
  };

  TrainOutcome out{run_federation(tc, std::move(sites), ts, log_round, transcripts), {}, {}, {}};
  metrics.close();
  if (!metrics) throw FormatError("write failed for metrics.csv");
  save_checkpoint(c.out_dir / "generator.ckpt", out.result.generator.named_params());

  // Evaluation samples come from their own stream so they do not depend on
  // how many batches training consumed.
  Rng rng = make_rng(c.seed, kEvalStream);
  const Tensor z = sample_noise(c.eval_samples, tc.noise, rng);
  std::optional<std::vector<int>> labels;
  if (tc.conditional) {
    const auto prior = label_prior(out.result.weights);
    std::discrete_distribution<int> pick(prior.begin(), prior.end());
    labels.emplace(c.eval_samples);
    for (int& y : *labels) y = pick(rng);
    const Tensor oh = LabelEncoding(tc.num_classes).encode(*labels);
    out.samples = generate(out.result.generator, z, &oh);
  } else {
    out.samples = generate(out.result.generator, z);
  }
  if (c.data_scale != 1.0) {
    for (double& v : out.samples.data()) v /= c.data_scale;
  }
  write_samples_csv(c.out_dir / "samples.csv", out.samples, labels ? &*labels : nullptr);

  out.eval.emplace_back("num_samples", static_cast<double>(out.samples.rows()));
  out.eval.emplace_back("final_gen_loss", out.result.metrics.back().gen_loss);
  if (!data.centers.empty() && data.full.dim() == 2) {
    Tensor centers({data.centers.size(), 2});
    for (std::size_t i = 0; i < data.centers.size(); ++i) {
      centers.at(i, 0) = data.centers[i][0];
      centers.at(i, 1) = data.centers[i][1];
    }
    const double r = c.eval_radius ? *c.eval_radius : 3.0 * std::sqrt(data.variance.value_or(0.5));
    out.modes = mode_coverage(out.samples, centers, r, c.eval_fraction);
    out.eval.emplace_back("covered_modes", static_cast<double>(out.modes->covered));
    out.eval.emplace_back("high_quality_fraction", out.modes->high_quality);
    out.eval.emplace_back("radius", r);
    for (std::size_t i = 0; i < out.modes->counts.size(); ++i) {
      out.eval.emplace_back("mode_count_" + std::to_string(i),
                            static_cast<double>(out.modes->counts[i]));
    }
  }
  const std::size_t n = std::min({c.eval_mmd_samples, out.samples.rows(), data.full.size()});
  if (n >= 2) {
    Tensor gen({n, out.samples.cols()});
    Tensor real({n, data.full.dim()});
    for (std::size_t i = 0; i < n; ++i) {
      const auto g = out.samples.row(i);
      std::copy(g.begin(), g.end(), gen.row(i).begin());
      const auto src = data.full.rows.row(uniform_index(rng, data.full.size()));
      std::copy(src.begin(), src.end(), real.row(i).begin());
    }
    out.eval.emplace_back("mmd_rbf", mmd_rbf(gen, real, c.eval_bandwidth));
  }
  write_eval_csv(c.out_dir / "eval.csv", out.eval);
  return out;
}

void run_site(const RunConfig& c, std::size_t site_id) {
  if (c.transport == "inproc") throw ConfigError("site processes need a tcp transport");
  std::filesystem::create_directories(c.out_dir);
  const RunData data = load_run_data(c);
  SiteActor actor(make_site_config(c, data, site_id));
  const TcpAddress addr = parse_tcp_address(c.transport.substr(4));
  auto channel = tcp_connect(addr, Millis(c.timeout_ms));
  log_info("site " + std::to_string(site_id) + " connected to " + addr.host + ":" +
           std::to_string(addr.port));
  serve_site(actor, *channel);
}

}  // namespace uagan
