#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "config.hpp"
#include "svg.hpp"
#include "svq/persistence.hpp"

using namespace svqcli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "svq_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Result {
  int code;
  std::string output;
};

Result run_cli(const std::string& args) {
  const auto log = fs::temp_directory_path() / "svq_cli_tests" / "last_output.txt";
  fs::create_directories(log.parent_path());
  const std::string cmd = std::string("\"") + SVQCHAIN_EXE + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) { return svq::read_text_file(p); }

/// Small hierarchical run so the full command sequence finishes quickly.
std::string tiny_hier_config(const std::string& check, std::size_t epochs) {
  return R"({
  "name": "tiny",
  "dataset": {"generator": "hier-phases", "count": 300, "seed": 3, "parameters": "depth=2"},
  "chain": {"layer_sizes": [8, 16, 8, 4], "samples": [20, 20, 20], "lambdas": [1.0, 5.0, 0.1]},
  "schedule": {"epochs": )" +
         std::to_string(epochs) + R"(, "steps": [{"weights": 1, "biases": 0.5, "recon": 0.1},
     {"weights": 1, "biases": 0.5, "recon": 0.1}, {"weights": 1, "biases": 0.5, "recon": 0.1}], "decay": 0.99},
  "protocol": {"seeds": [4], "check": ")" +
         check + R"("},
  "analysis": {"grid": 16, "cooccurrence_bins": 16},
  "plot": {"size": 200}
})";
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "input.cfg";
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Config, PresetsValidateAndRoundTrip) {
  ASSERT_EQ(preset_names(), (std::vector<std::string>{"circle", "hier", "blobs"}));
  for (const auto& name : preset_names()) {
    const auto c = preset_config(name);
    EXPECT_NO_THROW(c.validate()) << name;
    const auto again = config_from_json(to_json(c));
    EXPECT_EQ(dump_config(again), dump_config(c)) << name;
  }
  EXPECT_EQ(dump_config(preset_config("hier-phases")), dump_config(preset_config("hier")));
  EXPECT_THROW(preset_config("nope"), ConfigError);
}

TEST(Config, HierPresetHoldsExperimentConstants) {
  const auto c = preset_config("hier");
  EXPECT_EQ(c.chain.layer_sizes, (std::vector<std::size_t>{8, 16, 8, 4}));
  EXPECT_EQ(c.chain.samples, (std::vector<std::size_t>{20, 20, 20}));
  EXPECT_EQ(c.chain.lambdas, (std::vector<double>{1.0, 5.0, 0.1}));
  EXPECT_EQ(c.schedule.init_range, 0.1);
  EXPECT_EQ(c.protocol.seeds.size(), 10u);
  const auto circle = preset_config("circle");
  EXPECT_EQ(circle.chain.layer_sizes, (std::vector<std::size_t>{2, 6}));
  EXPECT_EQ(circle.chain.samples, (std::vector<std::size_t>{20}));
}

TEST(Config, StrictParsing) {
  auto j = to_json(preset_config("circle"));
  j["schedule"]["epoch"] = 3;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = to_json(preset_config("circle"));
  j["dataset"]["count"] = "many";
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = to_json(preset_config("circle"));
  j["dataset"]["count"] = -5;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = to_json(preset_config("circle"));
  j["schedule"]["decay_start"] = {-1};
  EXPECT_THROW(config_from_json(j), ConfigError);

  const auto dir = scratch("strict");
  const auto p = write_config(dir, "{\"name\": \"x\",, }");
  try {
    load_config(p);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos);
  }
}

TEST(Config, DecayStartDefaultsToTenthsOfTheRun) {
  auto j = to_json(preset_config("hier"));
  j["schedule"].erase("decay_start");
  j["schedule"]["epochs"] = 500;
  const auto c = config_from_json(j);
  EXPECT_EQ(c.schedule.decay_start, (std::vector<std::size_t>{50, 100, 150}));
}

TEST(Config, ValidationCatchesInconsistentShapes) {
  auto c = preset_config("hier");
  c.chain.lambdas = {1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = preset_config("circle");
  c.protocol.check = "hierarchy";
  EXPECT_THROW(c.validate(), ConfigError);
  c = preset_config("circle");
  c.name = "a b";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Resolve, OverridesAndOutputRoot) {
  Overrides o;
  o.preset = "circle";
  o.seed = 7;
  o.epochs = 1000;
  ::setenv("SVQ_OUT_ROOT", "/tmp/svq-root", 1);
  auto c = resolve_config(o, Command::gen_data);
  EXPECT_EQ(c.dataset.seed, 7u);
  EXPECT_EQ(c.output, "/tmp/svq-root/circle");
  c = resolve_config(o, Command::train);
  EXPECT_EQ(c.protocol.seeds, (std::vector<std::uint64_t>{7}));
  EXPECT_EQ(c.dataset.seed, 1u);
  EXPECT_EQ(c.schedule.epochs, 1000u);
  EXPECT_EQ(c.schedule.decay_start, (std::vector<std::size_t>{100}));
  ::unsetenv("SVQ_OUT_ROOT");
  o.out = "/tmp/elsewhere";
  EXPECT_EQ(resolve_config(o, Command::train).output, "/tmp/elsewhere");
  o.config = "/tmp/x.cfg";
  EXPECT_THROW(resolve_config(o, Command::train), ConfigError);
}

TEST(Svg, EmptyHistogramGivesBlankAxes) {
  svq::AnalysisTable t{"cooccurrence_1_2", {{"axis_a", "1"}, {"axis_b", "2"}, {"bins", "4"}}, {"row"}, {}};
  for (int c = 0; c < 4; ++c) t.columns.push_back("bin_" + std::to_string(c));
  for (int r = 0; r < 4; ++r) t.add_row({std::to_string(r), "0", "0", "0", "0"});
  const auto svg = plot_heatmap(t, 256);
  EXPECT_NE(svg.find("width=\"256.00\" height=\"256.00\""), std::string::npos);
  EXPECT_EQ(plot_heatmap(t, 256), svg);
  auto filled = t;
  filled.rows[1][2] = "5";
  const auto with_cell = plot_heatmap(filled, 256);
  EXPECT_NE(with_cell, svg);
  EXPECT_NE(with_cell.find(ramp_colour(1.0)), std::string::npos);
  EXPECT_EQ(svg.find(ramp_colour(1.0)), std::string::npos);
}

TEST(Cli, GenDataIsDeterministic) {
  const auto a = scratch("gen-a"), b = scratch("gen-b");
  auto r = run_cli("gen-data --preset circle --count 1000 --seed 7 --out " + a.string());
  ASSERT_EQ(r.code, 0) << r.output;
  r = run_cli("gen-data --preset circle --count 1000 --seed 7 --out " + b.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(slurp(a / "dataset.txt"), slurp(b / "dataset.txt"));
  const auto d = svq::load_dataset(a / "dataset.txt");
  EXPECT_EQ(d.samples.size(), 1000u);
  EXPECT_EQ(d.seed, 7u);
  EXPECT_TRUE(fs::exists(a / "resolved.cfg"));
}

TEST(Cli, GenDataHierPhases) {
  const auto dir = scratch("gen-hier");
  const auto r = run_cli("gen-data --preset hier-phases --count 10000 --seed 1 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto d = svq::load_dataset(dir / "dataset.txt");
  EXPECT_EQ(d.samples.size(), 10000u);
  EXPECT_EQ(d.data_dim, 8u);
  EXPECT_EQ(d.latent_dim, 4u);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("codes");
  EXPECT_EQ(run_cli("frobnicate").code, kConfigError);
  EXPECT_EQ(run_cli("train --preset circle --bogus 3").code, kConfigError);
  const auto bad = write_config(dir, "{\"name\": \"x\", \"mystery\": 1}");
  const auto r = run_cli("gen-data --config " + bad.string() + " --out " + dir.string());
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.output.find("mystery"), std::string::npos) << r.output;

  const auto missing = run_cli("train --preset circle --data " + (dir / "nope.txt").string() + " --out " +
                               dir.string());
  EXPECT_EQ(missing.code, kDataError) << missing.output;

  // Zero epochs leave the circle chain at its initialisation, which fails the arc check.
  const auto unchecked = run_cli("train --preset circle --count 200 --epochs 0 --out " + dir.string());
  EXPECT_EQ(unchecked.code, kStructureCheckFailed) << unchecked.output;

  auto j = to_json(preset_config("circle"));
  j["schedule"]["steps"][0] = {{"weights", 1e200}, {"biases", 1e200}, {"recon", 1e200}};
  j["dataset"]["count"] = 50;
  j["schedule"]["epochs"] = 20;
  const auto wild = write_config(dir, j.dump());
  const auto diverged = run_cli("train --config " + wild.string() + " --out " + dir.string());
  EXPECT_EQ(diverged.code, kDivergence) << diverged.output;
}

TEST(Cli, PlotWithoutAnalysisListsExpectedFiles) {
  const auto dir = scratch("noplot");
  const auto r = run_cli("plot --preset circle --out " + dir.string());
  EXPECT_EQ(r.code, kDataError);
  EXPECT_NE(r.output.find("connectivity_raw.txt"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("cooccurrence_"), std::string::npos) << r.output;
}

TEST(Cli, ZeroEpochsKeepInitialisation) {
  const auto dir = scratch("zero-epochs");
  const auto cfg = write_config(dir, tiny_hier_config("none", 10));
  const auto r = run_cli("train --config " + cfg.string() + " --epochs 0 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto model = svq::load_model(dir / "model.txt");
  auto init = svq::ChainNetwork::zeros(std::vector<std::size_t>{8, 16, 8, 4}, std::vector<std::size_t>{20, 20, 20},
                                       {1.0, 5.0, 0.1});
  svq::randomize_parameters(init, 0.1, 4);
  EXPECT_EQ(model.chain, init);
  EXPECT_EQ(model.seed, 4u);
  EXPECT_TRUE(svq::load_trace(dir / "trace.txt").epochs.empty());
}

TEST(Cli, FullRunEmitsAnalysisFilesAndReproduces) {
  const auto dir = scratch("full");
  const auto cfg = write_config(dir, tiny_hier_config("none", 5));
  auto r = run_cli("run --config " + cfg.string() + " --out " + (dir / "a").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto a = dir / "a";
  for (const char* f : {"cooccurrence_1_2", "cooccurrence_1_3", "cooccurrence_1_4", "cooccurrence_2_3",
                        "cooccurrence_2_4", "cooccurrence_3_4", "connectivity_raw", "connectivity_thresholded",
                        "connectivity_permuted", "activity_layer1_12", "activity_layer1_34", "activity_layer2_12",
                        "activity_layer2_34", "activity_layer3_12", "activity_layer3_34", "logic", "hierarchy",
                        "layer_orders", "sensitivity_stage1", "codebook_stage1", "codebook_stage2", "codebook_stage3"})
    EXPECT_TRUE(fs::exists(a / "analysis" / (std::string(f) + ".txt"))) << f;
  for (const char* f : {"cooccurrence_1_2", "connectivity_permuted", "activity_layer2_12", "codebook_stage3", "trace"})
    EXPECT_TRUE(fs::exists(a / "plots" / (std::string(f) + ".svg"))) << f;
  const auto heat = slurp(a / "plots" / "cooccurrence_1_2.svg");
  EXPECT_NE(heat.find("width=\"200.00\" height=\"200.00\""), std::string::npos);

  r = run_cli("run --config " + (a / "resolved.cfg").string() + " --out " + (dir / "b").string());
  ASSERT_EQ(r.code, 0) << r.output;
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().filename() == "resolved.cfg") continue;
    const auto rel = fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(dir / "b" / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 30u);
}
