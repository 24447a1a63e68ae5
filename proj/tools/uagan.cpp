// Command-line front end: gen-data, train, verify-theory, plot, site.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "uagan/config.hpp"
#include "uagan/error.hpp"
#include "uagan/log.hpp"
#include "uagan/pipeline.hpp"
#include "uagan/plot.hpp"
#include "uagan/theory.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitVerify = 3;
constexpr int kExitRuntime = 4;

int cmd_gen_data(const std::string& spec_path, const std::string& out, std::uint64_t seed) {
  const auto spec = uagan::load_data_spec(spec_path);
  const auto files = uagan::gen_data(spec, out, seed);
  for (const auto& f : files) std::cout << f.string() << '\n';
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& out,
              std::optional<std::size_t> threads) {
  auto cfg = uagan::load_run_config(config_path);
  if (!out.empty()) cfg.out_dir = out;
  if (threads) {
    if (*threads == 0) throw uagan::ConfigError("--threads must be at least 1");
    cfg.threads = *threads;
  }
  const auto outcome = uagan::run_train(cfg);
  for (const auto& [k, v] : outcome.eval) std::cout << k << ' ' << v << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::string& out) {
  namespace th = uagan::theory;
  std::vector<th::ReportRow> rows;
  const bool all = suite == "all";
  if (all || suite == "correctness") rows.push_back(th::verify_correctness(100, 32, seed));
  if (all || suite == "upper") {
    th::UpperBoundOptions o;
    o.seed = seed;
    for (auto& r : th::verify_upper_bound(o)) rows.push_back(r);
  }
  if (all || suite == "lower") {
    for (auto& r : th::verify_lower_bound({})) rows.push_back(r);
  }
  if (all || suite == "corollary") {
    th::CorollaryOptions o;
    o.seed = seed;
    for (auto& r : th::verify_corollary(o)) rows.push_back(r);
  }
  th::write_report_csv(out, rows);
  std::size_t violations = 0;
  for (const auto& r : rows) {
    violations += r.violations;
    std::printf("%-28s %-10.6g trials %-4zu violations %-4zu max_dev %-12.6g bound %.6g\n",
                r.theorem.c_str(), r.delta_or_gamma, r.trials, r.violations, r.max_dev, r.bound);
  }
  std::printf("%zu violation(s) across %zu check(s)\n", violations, rows.size());
  return violations == 0 ? kExitOk : kExitVerify;
}

int cmd_plot(const std::string& samples, const std::string& data, const std::string& noise,
             const std::string& heat, const std::string& out) {
  uagan::PlotInput in;
  in.generated = uagan::points_from_csv(uagan::read_numeric_csv(samples));
  if (!data.empty()) in.real = uagan::points_from_csv(uagan::read_numeric_csv(data));
  if (!noise.empty()) in.noise = uagan::points_from_csv(uagan::read_numeric_csv(noise));
  if (!heat.empty()) in.heat = uagan::heat_from_csv(uagan::read_numeric_csv(heat));
  std::ofstream o(out, std::ios::trunc);
  if (!o) throw uagan::FormatError("cannot write " + out);
  o << uagan::render_svg(in);
  if (!o) throw uagan::FormatError("write failed for " + out);
  return kExitOk;
}

int cmd_site(const std::string& config_path, std::size_t site_id) {
  uagan::run_site(uagan::load_run_config(config_path), site_id);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated GAN training with odds-value aggregation"};
  app.require_subcommand(1);

  std::string spec, out, config, suite = "all", samples, data, noise, heat;
  std::uint64_t seed = 0;
  std::size_t site_id = 0;
  std::optional<std::size_t> threads;

  auto* gen = app.add_subcommand("gen-data", "Write a Gaussian-mixture dataset and its site split");
  gen->add_option("--spec", spec, "Dataset spec file")->required();
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--seed", seed, "Random seed");

  auto* train = app.add_subcommand("train", "Run federated training");
  train->add_option("--config", config, "Run config file")->required();
  train->add_option("--out", out, "Override the config's out_dir");
  train->add_option("--threads", threads, "1 forces the single-threaded schedule");

  auto* verify = app.add_subcommand("verify-theory", "Check the analytic bounds numerically");
  verify->add_option("--suite", suite, "Which checks to run")
      ->check(CLI::IsMember({"correctness", "upper", "lower", "corollary", "all"}));
  verify->add_option("--seed", seed, "Random seed");
  verify->add_option("--out", out, "Report CSV")->required();

  auto* plot = app.add_subcommand("plot", "Render samples as an SVG scatter plot");
  plot->add_option("--samples", samples, "Generated samples CSV")->required();
  plot->add_option("--data", data, "Real data CSV");
  plot->add_option("--noise", noise, "Noise points CSV");
  plot->add_option("--heat", heat, "Grid CSV of x,y,D(x,y)");
  plot->add_option("--out", out, "Output SVG")->required();

  auto* site = app.add_subcommand("site", "Serve one site over tcp");
  site->add_option("--config", config, "Run config file")->required();
  site->add_option("--site-id", site_id, "Site index")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(spec, out, seed);
    if (*train) return cmd_train(config, out, threads);
    if (*verify) return cmd_verify(suite, seed, out);
    if (*plot) return cmd_plot(samples, data, noise, heat, out);
    if (*site) return cmd_site(config, site_id);
  } catch (const uagan::ConfigError& e) {
    uagan::log_error(e.what());
    return kExitUsage;
  } catch (const uagan::SolverError& e) {
    uagan::log_error(e.what());
    return kExitVerify;
  } catch (const uagan::FormatError& e) {
    uagan::log_error(e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    uagan::log_error(e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
