#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

void add_common(CLI::App* cmd, svqcli::Overrides& o) {
  cmd->add_option("--config", o.config, "Experiment config file (JSON)");
  cmd->add_option("--preset", o.preset, "Bundled config: circle, hier, blobs");
  cmd->add_option("--out", o.out, "Output directory (default $SVQ_OUT_ROOT/<name>, root 'runs')");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace svqcli;
  CLI::App app{"Chains of stochastic vector quantisers: data generation, training, analysis and plots"};
  app.require_subcommand(1);
  Overrides o;

  auto* gen = app.add_subcommand("gen-data", "Generate the configured dataset");
  add_common(gen, o);
  gen->add_option("--seed", o.seed, "Dataset seed");
  gen->add_option("--count", o.count, "Number of samples");

  auto* train = app.add_subcommand("train", "Train the chain, trying each protocol seed until one passes the check");
  add_common(train, o);
  train->add_option("--seed", o.seed, "Single training seed (replaces the protocol seed list)");
  train->add_option("--epochs", o.epochs, "Number of epochs");
  train->add_option("--count", o.count, "Number of samples");
  train->add_option("--data", o.data, "Train on this dataset file instead of generating one");

  auto* analyze = app.add_subcommand("analyze", "Write connectivity, co-occurrence, activity and logic tables");
  add_common(analyze, o);
  analyze->add_option("--threshold", o.threshold, "Connectivity threshold as a fraction of each stage's largest component");
  analyze->add_option("--grid", o.grid, "Activity map resolution per axis");
  analyze->add_option("--model", o.model, "Model file (default <out>/model.txt)");
  analyze->add_option("--data", o.data, "Dataset file (default <out>/dataset.txt)");

  auto* plot = app.add_subcommand("plot", "Render the analysis tables as SVG");
  add_common(plot, o);

  auto* run = app.add_subcommand("run", "gen-data, train, analyze and plot");
  add_common(run, o);
  run->add_option("--seed", o.seed, "Single training seed");
  run->add_option("--epochs", o.epochs, "Number of epochs");
  run->add_option("--count", o.count, "Number of samples");
  run->add_option("--threshold", o.threshold, "Connectivity threshold fraction");
  run->add_option("--grid", o.grid, "Activity map resolution per axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  return run_guarded(
      [&]() -> int {
        if (gen->parsed()) return cmd_gen_data(resolve_config(o, Command::gen_data), std::cout);
        if (train->parsed()) return cmd_train(resolve_config(o, Command::train), o, std::cout);
        if (analyze->parsed()) return cmd_analyze(resolve_config(o, Command::analyze), o, std::cout);
        if (plot->parsed()) return cmd_plot(resolve_config(o, Command::plot), std::cout);
        return cmd_run(resolve_config(o, Command::run), std::cout);
      },
      std::cerr);
}
