#include <gtest/gtest.h>

#include <regex>

#include "test_util.hpp"
#include "uagan/config.hpp"
#include "uagan/error.hpp"
#include "uagan/pipeline.hpp"
#include "uagan/plot.hpp"

using namespace uagan;

namespace {

std::size_t count_matches(const std::string& text, const std::string& pattern) {
  std::regex re(pattern);
  return static_cast<std::size_t>(
      std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

}  // namespace

TEST(KeyValues, CommentsAndDuplicates) {
  auto kv = parse_key_values("# c\n\na = 1\n b=two words \n", "t");
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "two words");
  EXPECT_THROW(parse_key_values("a = 1\na = 2\n", "t"), ConfigError);
  EXPECT_THROW(parse_key_values("novalue\n", "t"), ConfigError);
}

TEST(RunConfigParse, DefaultsAndOverrides) {
  auto c = parse_run_config(
      "aggregator = avg\nnonsaturating = true\nrounds = 12\ngenerator_hidden = 8,8\n"
      "transport = tcp:127.0.0.1:7000\nlr_g = 2e-4\nfractions = 0.5,0.5\nnum_sites = 2\n"
      "partition = fractions\n");
  EXPECT_EQ(c.aggregator, Aggregator::kAverage);
  EXPECT_TRUE(c.nonsaturating);
  EXPECT_EQ(c.rounds, 12u);
  EXPECT_EQ(c.generator_hidden, (std::vector<std::size_t>{8, 8}));
  EXPECT_EQ(c.transport, "tcp:127.0.0.1:7000");
  EXPECT_EQ(c.generator_opt.lr, 2e-4);
  EXPECT_EQ(c.batch, 256u);
  EXPECT_FALSE(c.normalize_conditional_weights);
  EXPECT_EQ(c.partition, PartitionMode::kFractions);
}

TEST(RunConfigParse, Errors) {
  EXPECT_THROW(parse_run_config("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_run_config("aggregator = median\n"), ConfigError);
  EXPECT_THROW(parse_run_config("rounds = -3\n"), ConfigError);
  EXPECT_THROW(parse_run_config("rounds = 0\n"), ConfigError);
  EXPECT_THROW(parse_run_config("batch = lots\n"), ConfigError);
  EXPECT_THROW(parse_run_config("transport = udp\n"), ConfigError);
  EXPECT_THROW(parse_run_config("nonsaturating = maybe\n"), ConfigError);
  EXPECT_THROW(parse_run_config("data_dir = /definitely/not/here\n"), ConfigError);
  EXPECT_THROW(parse_run_config("beta1 = 1.0\n"), ConfigError);
  EXPECT_THROW(load_run_config("/definitely/not/here.cfg"), ConfigError);
}

TEST(RunConfigParse, PathsRelativeToConfig) {
  auto dir = testutil::scratch_dir("cfg_paths");
  std::filesystem::create_directories(dir / "data");
  testutil::write_file(dir / "run.cfg", "data_dir = data\nout_dir = results\n");
  auto c = load_run_config(dir / "run.cfg");
  EXPECT_EQ(c.data_dir, dir / "data");
  EXPECT_EQ(c.out_dir, dir / "results");
}

TEST(DataSpec, ParseAndCenters) {
  auto s = parse_data_spec("centers = 10,10;-10,-10\nvariance = 0.25\nsamples_per_mode = 7\n"
                           "num_sites = 2\npartition = by-mode\n");
  ASSERT_EQ(s.mixture.centers.size(), 2u);
  EXPECT_EQ(s.mixture.centers[1][0], -10.0);
  EXPECT_EQ(s.mixture.variance, 0.25);
  EXPECT_EQ(s.mixture.samples_per_mode, 7u);
  EXPECT_EQ(parse_centers(format_centers(s.mixture.centers)), s.mixture.centers);
  EXPECT_THROW(parse_data_spec("centers = 1;2\n"), ConfigError);
  EXPECT_THROW(parse_data_spec("variance = 0\n"), ConfigError);
}

TEST(GenData, WritesFilesDeterministically) {
  auto dir = testutil::scratch_dir("gen_data");
  DataSpecFile spec;
  spec.mixture = GaussianMixtureSpec::toy();
  spec.mixture.samples_per_mode = 30;
  auto files = gen_data(spec, dir / "a", 4);
  gen_data(spec, dir / "b", 4);
  for (const char* name : {"full.csv", "site_0.csv", "site_1.csv", "site_2.csv", "site_3.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(dir / "a" / name)) << name;
    EXPECT_EQ(testutil::read_file(dir / "a" / name), testutil::read_file(dir / "b" / name));
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "manifest.txt"));
  auto site2 = read_dataset_csv(dir / "a" / "site_2.csv");
  for (int y : site2.labels) EXPECT_EQ(y, 2);
}

TEST(Pipeline, TrainWritesArtifacts) {
  auto dir = testutil::scratch_dir("pipeline_train");
  auto c = parse_run_config(
      "data_seed = 2\nrounds = 5\nbatch = 32\ngenerator_hidden = 8\ndisc_hidden = 8\n"
      "eval_samples = 256\neval_mmd_samples = 64\ndata_scale = 0.1\n");
  c.out_dir = dir;
  auto outcome = run_train(c);
  for (const char* name : {"metrics.csv", "eval.csv", "samples.csv", "generator.ckpt",
                           "site_0.ckpt", "site_3.ckpt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  const std::string metrics = testutil::read_file(dir / "metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')),
            "round,gen_loss,mean_dua,per_site_disc_loss_0,per_site_disc_loss_1,"
            "per_site_disc_loss_2,per_site_disc_loss_3");
  EXPECT_EQ(count_matches(metrics, "\n"), 6u);
  const std::string eval = testutil::read_file(dir / "eval.csv");
  EXPECT_NE(eval.find("covered_modes,"), std::string::npos);
  EXPECT_NE(eval.find("mmd_rbf,"), std::string::npos);
  ASSERT_TRUE(outcome.modes.has_value());
  EXPECT_EQ(outcome.samples.rows(), 256u);
}

TEST(Pipeline, CentralizedMergesSites) {
  auto c = parse_run_config("aggregator = centralized\ndata_seed = 2\n");
  auto data = load_run_data(c);
  ASSERT_EQ(data.sites.size(), 1u);
  EXPECT_EQ(data.sites[0].size(), 10000u);
}

TEST(Plot, ThreeMarkers) {
  auto dir = testutil::scratch_dir("plot3");
  testutil::write_file(dir / "s.csv", "x0,x1\n0,0\n1,1\n-2,3.5\n");
  PlotInput in;
  in.generated = points_from_csv(read_numeric_csv(dir / "s.csv"));
  const std::string svg = render_svg(in);
  EXPECT_EQ(count_matches(svg, "<circle class=\"marker"), 3u);
}

TEST(Plot, MarkerClassesAndHeat) {
  PlotInput in;
  in.real = {{1, 1}, {2, 2}};
  in.generated = {{0, 0}};
  in.noise = {{-1, -1}, {-2, -2}, {-3, -3}};
  in.heat = {{0, 0, 0.5}, {1, 0, 0.9}, {0, 1, 0.1}, {1, 1, 0.3}};
  const std::string svg = render_svg(in);
  EXPECT_EQ(count_matches(svg, "class=\"marker real\""), 2u);
  EXPECT_EQ(count_matches(svg, "class=\"marker generated\""), 1u);
  EXPECT_EQ(count_matches(svg, "class=\"marker noise\""), 3u);
  EXPECT_EQ(count_matches(svg, "class=\"heat\""), 4u);
}

TEST(Plot, EmptySamplesStillHaveAxes) {
  const std::string svg = render_svg({});
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("axis"), std::string::npos);
  EXPECT_EQ(count_matches(svg, "<circle"), 0u);
}

TEST(Plot, MalformedCsv) {
  auto dir = testutil::scratch_dir("plot_bad");
  testutil::write_file(dir / "bad.csv", "x0,x1\n1,2\n3\n");
  EXPECT_THROW(read_numeric_csv(dir / "bad.csv"), FormatError);
  testutil::write_file(dir / "nan.csv", "x0,x1\n1,abc\n");
  EXPECT_THROW(read_numeric_csv(dir / "nan.csv"), FormatError);
}

TEST(ShippedConfigs, AllParse) {
  std::size_t runs = 0;
  for (const auto& e : std::filesystem::directory_iterator(UAGAN_CONFIG_DIR)) {
    if (e.path().extension() == ".cfg") {
      EXPECT_NO_THROW(load_run_config(e.path())) << e.path();
      ++runs;
    } else {
      EXPECT_NO_THROW(load_data_spec(e.path())) << e.path();
    }
  }
  EXPECT_GE(runs, 3u);
}
