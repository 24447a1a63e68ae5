#include "uagan/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "uagan/error.hpp"

namespace uagan {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(trim(part));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Fields {
 public:
  Fields(std::map<std::string, std::string> kv, std::string origin)
      : kv_(std::move(kv)), origin_(std::move(origin)) {}

  template <typename F>
  void on(const std::string& key, F&& apply) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    try {
      apply(it->second);
    } catch (const ConfigError& e) {
      throw ConfigError(origin_ + ": " + key + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError(origin_ + ": " + key + ": " + e.what());
    }
    kv_.erase(it);
  }

  void finish() const {
    if (!kv_.empty()) throw ConfigError(origin_ + ": unknown key '" + kv_.begin()->first + "'");
  }

 private:
  std::map<std::string, std::string> kv_;
  std::string origin_;
};

double to_double(const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(d)) throw ConfigError("not a number: '" + v + "'");
  return d;
}

std::uint64_t to_u64(const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("not a non-negative integer: '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError("integer out of range: '" + v + "'");
  }
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

std::vector<double> to_doubles(const std::string& v) {
  std::vector<double> out;
  for (const auto& p : split(v, ',')) out.push_back(to_double(p));
  return out;
}

std::vector<std::size_t> to_widths(const std::string& v) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  for (const auto& p : split(v, ',')) {
    const std::uint64_t w = to_u64(p);
    if (w == 0) throw ConfigError("layer width must be positive");
    out.push_back(w);
  }
  return out;
}

Aggregator to_aggregator(const std::string& v) {
  if (v == "ua") return Aggregator::kUniversal;
  if (v == "avg") return Aggregator::kAverage;
  if (v == "centralized") return Aggregator::kCentralized;
  throw ConfigError("aggregator must be ua, avg or centralized, got '" + v + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
  std::filesystem::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

std::vector<std::array<double, 2>> parse_centers(const std::string& text) {
  std::vector<std::array<double, 2>> centers;
  for (const auto& pair : split(text, ';')) {
    if (pair.empty()) continue;
    const auto xy = to_doubles(pair);
    if (xy.size() != 2) throw ConfigError("center '" + pair + "' must be x,y");
    centers.push_back({xy[0], xy[1]});
  }
  if (centers.empty()) throw ConfigError("no centers given");
  return centers;
}

std::string format_centers(const std::vector<std::array<double, 2>>& centers) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < centers.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.17g,%.17g", i ? ";" : "", centers[i][0], centers[i][1]);
    out += buf;
  }
  return out;
}

void RunConfig::validate() const {
  if (rounds == 0) throw ConfigError("rounds must be positive");
  if (batch == 0) throw ConfigError("batch must be positive");
  if (disc_steps == 0) throw ConfigError("disc_steps must be positive");
  if (num_sites == 0) throw ConfigError("num_sites must be positive");
  if (!(data_scale > 0.0)) throw ConfigError("data_scale must be positive");
  if (!(noise_variance > 0.0)) throw ConfigError("noise_variance must be positive");
  if (noise_dim == 0) throw ConfigError("noise_dim must be positive");
  if (threads == 0) throw ConfigError("threads must be at least 1");
  if (eval_samples == 0) throw ConfigError("eval_samples must be positive");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw ConfigError("eval_fraction must lie in (0, 1)");
  if (eval_radius && !(*eval_radius > 0.0)) throw ConfigError("eval_radius must be positive");
  if (!(eval_bandwidth > 0.0)) throw ConfigError("eval_bandwidth must be positive");
  for (const AdamConfig* a : {&generator_opt, &disc_opt}) {
    if (!(a->lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(a->beta1 >= 0.0 && a->beta1 < 1.0) || !(a->beta2 >= 0.0 && a->beta2 < 1.0)) {
      throw ConfigError("Adam betas must lie in [0, 1)");
    }
  }
  if (transport != "inproc" && transport.rfind("tcp:", 0) != 0) {
    throw ConfigError("transport must be inproc or tcp:host:port, got '" + transport + "'");
  }
  if (tcp_external_sites && transport == "inproc") {
    throw ConfigError("tcp_external_sites needs a tcp transport");
  }
  if (idx_images.empty() != idx_labels.empty()) {
    throw ConfigError("idx_images and idx_labels go together");
  }
  if (!data_dir.empty() && !idx_images.empty()) {
    throw ConfigError("data_dir and idx files are mutually exclusive");
  }
  for (const auto* p : {&data_dir, &idx_images, &idx_labels}) {
    if (!p->empty() && !std::filesystem::exists(*p)) {
      throw ConfigError("path does not exist: " + p->string());
    }
  }
  if (partition == PartitionMode::kFractions && fractions.size() != num_sites) {
    throw ConfigError("fractions must list one share per site");
  }
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir,
                           const std::string& origin) {
  RunConfig c;
  Fields f(parse_key_values(text, origin), origin);
  f.on("data_dir", [&](const std::string& v) { c.data_dir = resolve(base_dir, v); });
  f.on("idx_images", [&](const std::string& v) { c.idx_images = resolve(base_dir, v); });
  f.on("idx_labels", [&](const std::string& v) { c.idx_labels = resolve(base_dir, v); });
  f.on("data_seed", [&](const std::string& v) { c.data_seed = to_u64(v); });
  f.on("num_sites", [&](const std::string& v) { c.num_sites = to_u64(v); });
  f.on("partition", [&](const std::string& v) { c.partition = parse_partition_mode(v); });
  f.on("fractions", [&](const std::string& v) { c.fractions = to_doubles(v); });
  f.on("partition_seed", [&](const std::string& v) { c.partition_seed = to_u64(v); });
  f.on("data_scale", [&](const std::string& v) { c.data_scale = to_double(v); });
  f.on("aggregator", [&](const std::string& v) { c.aggregator = to_aggregator(v); });
  f.on("conditional", [&](const std::string& v) { c.conditional = to_bool(v); });
  f.on("normalize_conditional_weights",
       [&](const std::string& v) { c.normalize_conditional_weights = to_bool(v); });
  f.on("nonsaturating", [&](const std::string& v) { c.nonsaturating = to_bool(v); });
  f.on("generator_hidden", [&](const std::string& v) { c.generator_hidden = to_widths(v); });
  f.on("disc_hidden", [&](const std::string& v) { c.disc_hidden = to_widths(v); });
  f.on("generator_output", [&](const std::string& v) { c.generator_output = parse_activation(v); });
  f.on("leaky_slope", [&](const std::string& v) { c.leaky_slope = to_double(v); });
  f.on("noise_dim", [&](const std::string& v) { c.noise_dim = to_u64(v); });
  f.on("noise_variance", [&](const std::string& v) { c.noise_variance = to_double(v); });
  f.on("lr_g", [&](const std::string& v) { c.generator_opt.lr = to_double(v); });
  f.on("lr_d", [&](const std::string& v) { c.disc_opt.lr = to_double(v); });
  f.on("beta1", [&](const std::string& v) { c.generator_opt.beta1 = c.disc_opt.beta1 = to_double(v); });
  f.on("beta2", [&](const std::string& v) { c.generator_opt.beta2 = c.disc_opt.beta2 = to_double(v); });
  f.on("adam_eps", [&](const std::string& v) { c.generator_opt.eps = c.disc_opt.eps = to_double(v); });
  f.on("rounds", [&](const std::string& v) { c.rounds = to_u64(v); });
  f.on("batch", [&](const std::string& v) { c.batch = to_u64(v); });
  f.on("disc_steps", [&](const std::string& v) { c.disc_steps = to_u64(v); });
  f.on("transport", [&](const std::string& v) { c.transport = v; });
  f.on("tcp_external_sites", [&](const std::string& v) { c.tcp_external_sites = to_bool(v); });
  f.on("threads", [&](const std::string& v) { c.threads = to_u64(v); });
  f.on("seed", [&](const std::string& v) { c.seed = to_u64(v); });
  f.on("timeout_ms", [&](const std::string& v) { c.timeout_ms = to_u64(v); });
  f.on("max_retries", [&](const std::string& v) { c.max_retries = to_u64(v); });
  f.on("out_dir", [&](const std::string& v) { c.out_dir = resolve(base_dir, v); });
  f.on("eval_samples", [&](const std::string& v) { c.eval_samples = to_u64(v); });
  f.on("eval_radius", [&](const std::string& v) { c.eval_radius = to_double(v); });
  f.on("eval_fraction", [&](const std::string& v) { c.eval_fraction = to_double(v); });
  f.on("eval_bandwidth", [&](const std::string& v) { c.eval_bandwidth = to_double(v); });
  f.on("eval_mmd_samples", [&](const std::string& v) { c.eval_mmd_samples = to_u64(v); });
  f.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path), path.parent_path(), path.string());
}

DataSpecFile parse_data_spec(const std::string& text, const std::string& origin) {
  DataSpecFile s;
  s.mixture = GaussianMixtureSpec::toy();
  Fields f(parse_key_values(text, origin), origin);
  f.on("centers", [&](const std::string& v) { s.mixture.centers = parse_centers(v); });
  f.on("variance", [&](const std::string& v) { s.mixture.variance = to_double(v); });
  f.on("samples_per_mode", [&](const std::string& v) { s.mixture.samples_per_mode = to_u64(v); });
  f.on("num_sites", [&](const std::string& v) { s.num_sites = to_u64(v); });
  f.on("partition", [&](const std::string& v) { s.partition = parse_partition_mode(v); });
  f.on("fractions", [&](const std::string& v) { s.fractions = to_doubles(v); });
  f.finish();
  try {
    s.mixture.validate();
  } catch (const Error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (s.num_sites == 0) throw ConfigError(origin + ": num_sites must be positive");
  return s;
}

DataSpecFile load_data_spec(const std::filesystem::path& path) {
  return parse_data_spec(read_file(path), path.string());
}

}  // namespace uagan
