#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "svg.hpp"
#include "svq/analysis.hpp"
#include "svq/errors.hpp"
#include "svq/persistence.hpp"

namespace svqcli {

namespace fs = std::filesystem;
using svq::AnalysisTable;
using svq::number_cell;

namespace {

constexpr const char* kConfigFile = "resolved.cfg";
constexpr const char* kDatasetFile = "dataset.txt";
constexpr const char* kModelFile = "model.txt";
constexpr const char* kTraceFile = "trace.txt";
constexpr const char* kTrainingFile = "training.txt";

fs::path out_dir(const ExperimentConfig& c) { return fs::path(c.output); }

void write_resolved(const ExperimentConfig& c) {
  svq::write_text_file(out_dir(c) / kConfigFile, dump_config(c));
}

svq::Dataset generate(const ExperimentConfig& c) {
  try {
    return svq::make_dataset(c.dataset.generator, c.dataset.seed, c.dataset.count, c.dataset.parameters);
  } catch (const svq::InvalidArgument& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
}

template <class F>
auto load_or_data_error(const fs::path& path, F&& load) {
  try {
    return load(path);
  } catch (const svq::Error& e) {
    throw DataError(e.what());
  }
}

svq::ChainNetwork initial_chain(const ExperimentConfig& c) {
  try {
    return svq::ChainNetwork::zeros(c.chain.layer_sizes, c.chain.samples, c.chain.lambdas);
  } catch (const svq::InvalidArgument& e) {
    throw ConfigError(std::string("chain: ") + e.what());
  }
}

std::string idx(std::size_t v) { return std::to_string(v); }

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string join_sizes(const std::vector<std::size_t>& v, char sep) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? std::string(1, sep) : "") + std::to_string(v[k]);
  return out;
}

std::string check_run(const ExperimentConfig& c, const svq::Dataset& data, const svq::TrainingResult& run) {
  if (c.protocol.check == "hierarchy") {
    const auto samples = svq::phase_samples(data);
    const auto report = svq::evaluate_hierarchy(run.chain, samples, c.hierarchy_options());
    return report.passed() ? std::string{} : report.summary();
  }
  if (c.protocol.check == "arcs") {
    if (run.trace.epochs.empty()) return "no training epochs";
    const double initial = run.trace.epochs.front().weighted_total;
    const double final_value = svq::chain_objective(run.chain, data.data_vectors()).weighted_total;
    const auto arcs = svq::high_posterior_arcs(run.chain.stage(0), c.analysis.arc_resolution);
    std::string reason;
    if (final_value > 0.1 * initial) reason += "final objective above 10% of initial; ";
    if (!arcs.every_code_single_arc) reason += "a code's high-posterior region is not a single arc; ";
    if (!arcs.covers_circle) reason += "arcs leave part of the circle uncovered; ";
    return reason;
  }
  return {};
}

AnalysisTable connectivity_table(const std::string& name, const svq::ConnectivityGraph& g,
                                 const std::vector<std::size_t>& layers, bool kept_only) {
  AnalysisTable t;
  t.name = name;
  t.attributes.emplace_back("layers", join_sizes(layers, ':'));
  for (std::size_t s = 0; s < g.num_stages(); ++s)
    t.attributes.emplace_back("tau_" + idx(s + 1), number_cell(g.taus[s]));
  t.columns = {"stage", "code", "input", "value"};
  for (std::size_t s = 0; s < g.num_stages(); ++s)
    for (std::size_t y = 0; y < g.recon[s].rows(); ++y)
      for (std::size_t k = 0; k < g.recon[s].cols(); ++k)
        if (!kept_only || g.kept(s, y, k))
          t.add_row({idx(s + 1), idx(y + 1), idx(k + 1), number_cell(g.recon[s](y, k))});
  return t;
}

AnalysisTable activity_table(const svq::ActivityMap& map) {
  AnalysisTable t;
  t.name = "activity_layer" + idx(map.layer) + "_" + idx(map.axis_a) + idx(map.axis_b);
  t.attributes = {{"layer", idx(map.layer)}, {"axis_a", idx(map.axis_a)}, {"axis_b", idx(map.axis_b)},
                  {"grid", idx(map.grid)}};
  t.columns = {"i", "j", "phi_a", "phi_b"};
  for (std::size_t y = 0; y < map.nodes(); ++y) t.columns.push_back("node_" + idx(y + 1));
  for (std::size_t i = 0; i < map.grid; ++i)
    for (std::size_t j = 0; j < map.grid; ++j) {
      std::vector<std::string> row{idx(i), idx(j), number_cell(map.phase(i)), number_cell(map.phase(j))};
      const auto& p = map.at(i, j);
      for (std::size_t y = 0; y < p.size(); ++y) row.push_back(number_cell(p[y]));
      t.add_row(std::move(row));
    }
  return t;
}

AnalysisTable classification_table(const std::string& name, const svq::EncoderClassification& cls) {
  AnalysisTable t;
  t.name = name;
  t.columns = {"node", "label", "score", "peak", "along_variance", "across_variance",
               "invariant_ratio", "factorial_a_ratio", "factorial_b_ratio"};
  for (std::size_t y = 0; y < cls.nodes.size(); ++y) {
    const auto& n = cls.nodes[y];
    auto ratio = [](double v) { return std::isfinite(v) ? number_cell(v) : std::string("inf"); };
    t.add_row({idx(y + 1), svq::to_string(n.label), number_cell(n.score), number_cell(n.peak),
               number_cell(n.along_variance), number_cell(n.across_variance), ratio(n.invariant_ratio),
               ratio(n.factorial_a_ratio), ratio(n.factorial_b_ratio)});
  }
  return t;
}

AnalysisTable sensitivity_table(std::size_t stage, const svq::FactorialGroups& groups) {
  AnalysisTable t;
  t.name = "sensitivity_stage" + idx(stage);
  t.columns = {"node"};
  for (std::size_t j = 0; j < groups.sensitivity.cols(); ++j) t.columns.push_back("phase_" + idx(j + 1));
  t.columns.push_back("group");
  std::map<std::size_t, std::string> group_of;
  for (const auto& g : groups.groups)
    for (std::size_t y : g.nodes) group_of[y] = join_sizes(g.phases, '+');
  for (std::size_t y : groups.silent) group_of[y] = "silent";
  for (std::size_t y = 0; y < groups.sensitivity.rows(); ++y) {
    std::vector<std::string> row{idx(y + 1)};
    for (std::size_t j = 0; j < groups.sensitivity.cols(); ++j) row.push_back(number_cell(groups.sensitivity(y, j)));
    row.push_back(group_of[y]);
    t.add_row(std::move(row));
  }
  return t;
}

AnalysisTable cooccurrence_table(const svq::Histogram2D& h, std::size_t a, std::size_t b) {
  AnalysisTable t;
  t.name = "cooccurrence_" + idx(a) + "_" + idx(b);
  t.attributes = {{"axis_a", idx(a)}, {"axis_b", idx(b)}, {"bins", idx(h.bins())}};
  t.columns = {"row"};
  for (std::size_t c = 0; c < h.bins(); ++c) t.columns.push_back("bin_" + idx(c));
  for (std::size_t r = 0; r < h.bins(); ++r) {
    std::vector<std::string> row{idx(r)};
    for (std::size_t c = 0; c < h.bins(); ++c) row.push_back(std::to_string(h.at(r, c)));
    t.add_row(std::move(row));
  }
  return t;
}

void save(const fs::path& dir, const AnalysisTable& t, std::ostream& log) {
  svq::save_table(dir / (t.name + ".txt"), t);
  log << "  wrote " << (dir / (t.name + ".txt")).string() << "\n";
}

}  // namespace

ExperimentConfig resolve_config(const Overrides& o, Command command) {
  if (o.config && o.preset) throw ConfigError("--config and --preset are mutually exclusive");
  ExperimentConfig c = o.config ? load_config(*o.config) : preset_config(o.preset.value_or("hier"));
  if (o.count) c.dataset.count = *o.count;
  if (o.seed) {
    if (command == Command::gen_data)
      c.dataset.seed = *o.seed;
    else
      c.protocol.seeds = {*o.seed};
  }
  if (o.epochs) {
    const std::size_t old = c.schedule.epochs;
    c.schedule.epochs = *o.epochs;
    // decay starts scale with the run length
    for (auto& s : c.schedule.decay_start)
      s = old == 0 ? 0 : static_cast<std::size_t>(static_cast<unsigned long long>(s) * *o.epochs / old);
  }
  if (o.threshold) c.analysis.threshold_fraction = *o.threshold;
  if (o.grid) c.analysis.grid = *o.grid;
  if (o.out) {
    c.output = o.out->string();
  } else if (c.output.empty()) {
    const char* root = std::getenv("SVQ_OUT_ROOT");
    c.output = (fs::path(root && *root ? root : "runs") / c.name).string();
  }
  c.validate();
  return c;
}

int cmd_gen_data(const ExperimentConfig& c, std::ostream& log) {
  const auto data = generate(c);
  svq::save_dataset(out_dir(c) / kDatasetFile, data);
  write_resolved(c);
  log << "dataset " << data.generator << " count=" << data.samples.size() << " seed=" << data.seed << " -> "
      << (out_dir(c) / kDatasetFile).string() << "\n";
  return kOk;
}

int cmd_train(const ExperimentConfig& c, const Overrides& o, std::ostream& log) {
  svq::Dataset data = o.data ? load_or_data_error(*o.data, [](const fs::path& p) { return svq::load_dataset(p); })
                             : generate(c);
  if (data.data_dim != c.chain.layer_sizes.front())
    throw DataError("dataset dimension " + idx(data.data_dim) + " differs from chain input size " +
                    idx(c.chain.layer_sizes.front()));
  if (!o.data) svq::save_dataset(out_dir(c) / kDatasetFile, data);
  write_resolved(c);

  const auto vectors = data.data_vectors();
  const auto chain = initial_chain(c);
  const auto report = [&](const svq::SeedAttempt& a) {
    log << "seed " << a.seed << ": " << (a.passed ? "accepted" : "rejected: " + a.reason) << "\n";
  };
  auto result = c.protocol.check == "lowest-objective"
                    ? svq::train_lowest_objective(chain, vectors, c.schedule, c.protocol.seeds, report)
                    : svq::train_multi_seed(
                          chain, vectors, c.schedule, c.protocol.seeds,
                          [&](const svq::TrainingResult& run) { return check_run(c, data, run); }, report);

  AnalysisTable attempts;
  attempts.name = "training";
  attempts.attributes = {{"check", c.protocol.check}};
  attempts.columns = {"seed", "passed", "reason"};
  for (const auto& a : result.attempts)
    attempts.add_row({std::to_string(a.seed), a.passed ? "1" : "0", sanitize(a.reason)});
  svq::save_table(out_dir(c) / kTrainingFile, attempts);

  if (!result.last) {
    log << "every seed diverged\n";
    return kDivergence;
  }
  const auto& kept = result.accepted ? *result.accepted : *result.last;
  const auto seed = result.accepted_seed ? *result.accepted_seed : *result.last_seed;
  auto schedule = c.schedule;
  schedule.seed = seed;
  svq::save_model(out_dir(c) / kModelFile, kept.chain, seed, schedule);
  svq::save_trace(out_dir(c) / kTraceFile, kept.trace);
  if (!kept.trace.epochs.empty())
    log << "objective " << kept.trace.epochs.front().weighted_total << " -> "
        << svq::chain_objective(kept.chain, vectors).weighted_total << "\n";
  for (std::size_t l : kept.collapsed_stages) log << "warning: stage " << l + 1 << " collapsed\n";
  if (result.accepted) {
    log << "accepted seed " << seed << "\n";
    return kOk;
  }
  log << "no seed passed the " << c.protocol.check << " check; kept the last run (seed " << seed << ")\n";
  return kStructureCheckFailed;
}

int cmd_analyze(const ExperimentConfig& c, const Overrides& o, std::ostream& log) {
  const fs::path model_path = o.model.value_or(out_dir(c) / kModelFile);
  const fs::path data_path = o.data.value_or(out_dir(c) / kDatasetFile);
  const auto model = load_or_data_error(model_path, [](const fs::path& p) { return svq::load_model(p); });
  const auto data = load_or_data_error(data_path, [](const fs::path& p) { return svq::load_dataset(p); });
  const auto& chain = model.chain;
  if (data.data_dim != chain.input_dim())
    throw DataError("dataset dimension " + idx(data.data_dim) + " differs from model input " + idx(chain.input_dim()));
  write_resolved(c);

  const fs::path dir = out_dir(c) / "analysis";
  const auto layers = chain.layer_sizes();
  const auto taus = svq::relative_thresholds(chain, c.analysis.threshold_fraction);
  const auto graph = svq::threshold_connectivity(chain, taus);
  const auto permuted = svq::permute_for_clarity(graph);
  save(dir, connectivity_table("connectivity_raw", graph, layers, false), log);
  save(dir, connectivity_table("connectivity_thresholded", graph, layers, true), log);
  save(dir, connectivity_table("connectivity_permuted", permuted, layers, true), log);

  AnalysisTable orders;
  orders.name = "layer_orders";
  orders.columns = {"layer", "position", "node"};
  for (std::size_t k = 0; k < permuted.order.size(); ++k)
    for (std::size_t p = 0; p < permuted.order[k].size(); ++p)
      orders.add_row({idx(k), idx(p + 1), idx(permuted.order[k][p] + 1)});
  save(dir, orders, log);

  std::vector<double> logic_taus = taus;
  for (double& t : logic_taus) t *= c.analysis.logic_factor;
  const auto logic = svq::extract_logic(graph, logic_taus);
  const auto pairs = svq::complement_pairing(logic);
  AnalysisTable lt;
  lt.name = "logic";
  lt.columns = {"output", "expression", "complement_of"};
  for (std::size_t k = 0; k < logic.size(); ++k) {
    std::string partner = "-";
    for (const auto& [a, b] : pairs) {
      if (a == k) partner = idx(b + 1);
      if (b == k) partner = idx(a + 1);
    }
    lt.add_row({idx(logic[k].output), logic[k].to_string(), partner});
    if (logic[k].empty()) log << "warning: output " << logic[k].output << " has no surviving paths\n";
  }
  save(dir, lt, log);

  if (data.generator == "hier-phases") {
    const auto samples = svq::phase_samples(data);
    const std::size_t phases = data.latent_dim;
    for (std::size_t a = 1; a <= phases; ++a)
      for (std::size_t b = a + 1; b <= phases; ++b)
        save(dir, cooccurrence_table(svq::cooccurrence(samples, a, b, c.analysis.cooccurrence_bins), a, b), log);
    std::vector<std::pair<std::size_t, std::size_t>> axes;
    for (std::size_t a = 1; a + 1 <= phases; a += 2) axes.emplace_back(a, a + 1);
    svq::ClassifyOptions copt;
    copt.ratio_threshold = c.analysis.ratio_threshold;
    svq::SensitivityOptions sopt;
    sopt.group_fraction = c.analysis.group_fraction;
    for (std::size_t layer = 1; layer <= chain.num_stages(); ++layer) {
      save(dir, sensitivity_table(layer, svq::detect_factorial_groups(chain, layer, samples, sopt)), log);
      if (layer > 3) continue;
      for (const auto& ab : axes) {
        const auto map = svq::activity_map(chain, layer, ab, samples.front().phases, c.analysis.grid);
        save(dir, activity_table(map), log);
        save(dir, classification_table("classification_layer" + idx(layer) + "_" + idx(ab.first) + idx(ab.second),
                                       svq::classify_encoders(map, samples, copt)),
             log);
      }
    }
    if (chain.num_stages() == 3 && phases == 4) {
      const auto report = svq::evaluate_hierarchy(chain, samples, c.hierarchy_options());
      AnalysisTable h;
      h.name = "hierarchy";
      h.columns = {"check", "passed"};
      h.add_row({"stage1_factorial", report.factorial_stage1 ? "1" : "0"});
      h.add_row({"stage2_invariant", report.invariant_stage2 ? "1" : "0"});
      h.add_row({"stage3_invariant", report.invariant_stage3 ? "1" : "0"});
      h.add_row({"complement_logic", report.complement_logic ? "1" : "0"});
      save(dir, h, log);
      log << "hierarchy: " << report.summary() << "\n";
    }
  }

  if (data.generator == "circle" && chain.input_dim() == 2) {
    const auto& stage = chain.stage(0);
    const auto arcs = svq::high_posterior_arcs(stage, c.analysis.arc_resolution);
    AnalysisTable at;
    at.name = "arcs";
    at.attributes = {{"single_arc", arcs.every_code_single_arc ? "1" : "0"},
                     {"covers_circle", arcs.covers_circle ? "1" : "0"}};
    at.columns = {"code", "arc", "start", "end"};
    for (const auto& code : arcs.codes)
      for (std::size_t k = 0; k < code.arcs.size(); ++k)
        at.add_row({idx(code.code + 1), idx(k + 1), number_cell(code.arcs[k].first), number_cell(code.arcs[k].second)});
    save(dir, at, log);

    AnalysisTable pc;
    pc.name = "posterior_circle";
    pc.columns = {"theta"};
    for (std::size_t y = 0; y < stage.m(); ++y) pc.columns.push_back("p_" + idx(y + 1));
    constexpr std::size_t kPoints = 360;
    for (std::size_t k = 0; k <= kPoints; ++k) {
      const double theta = svq::kTwoPi * static_cast<double>(k) / kPoints;
      const auto p = svq::posterior(stage, svq::circle_point(theta).data);
      std::vector<std::string> row{number_cell(theta)};
      for (std::size_t y = 0; y < p.size(); ++y) row.push_back(number_cell(p[y]));
      pc.add_row(std::move(row));
    }
    save(dir, pc, log);
  }

  for (std::size_t l = 0; l < chain.num_stages(); ++l) {
    const auto& stage = chain.stage(l);
    AnalysisTable cb;
    cb.name = "codebook_stage" + idx(l + 1);
    cb.columns = {"code"};
    for (std::size_t k = 0; k < stage.input_dim(); ++k) cb.columns.push_back("recon_" + idx(k + 1));
    for (std::size_t y = 0; y < stage.m(); ++y) {
      std::vector<std::string> row{idx(y + 1)};
      for (double v : stage.recon().row(y)) row.push_back(number_cell(v));
      cb.add_row(std::move(row));
    }
    save(dir, cb, log);
  }
  return kOk;
}

int cmd_plot(const ExperimentConfig& c, std::ostream& log) {
  const fs::path dir = out_dir(c) / "analysis";
  const fs::path plots = out_dir(c) / "plots";
  std::vector<fs::path> files;
  if (fs::is_directory(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  auto kind_of = [](const std::string& name) -> std::string {
    for (const char* prefix : {"cooccurrence_", "connectivity_", "activity_", "codebook_"})
      if (name.rfind(prefix, 0) == 0) return prefix;
    if (name == "posterior_circle") return name;
    return {};
  };
  std::size_t drawn = 0;
  for (const auto& f : files) {
    const std::string kind = kind_of(f.stem().string());
    if (kind.empty()) continue;
    const auto table = load_or_data_error(f, [](const fs::path& p) { return svq::load_table(p); });
    std::string svg;
    if (kind == "cooccurrence_") svg = plot_heatmap(table, c.plot.size);
    if (kind == "connectivity_") svg = plot_connectivity(table, c.plot.size);
    if (kind == "activity_") svg = plot_activity(table, c.plot.size);
    if (kind == "codebook_") svg = plot_codebook(table, c.plot.size);
    if (kind == "posterior_circle") svg = plot_curves(table, c.plot.size);
    const auto target = plots / (table.name + ".svg");
    svq::write_text_file(target, svg);
    log << "  wrote " << target.string() << "\n";
    ++drawn;
  }
  const fs::path trace = out_dir(c) / kTraceFile;
  if (fs::exists(trace)) {
    const auto t = load_or_data_error(trace, [](const fs::path& p) { return svq::load_trace(p); });
    svq::write_text_file(plots / "trace.svg", plot_trace(t, c.plot.size));
    log << "  wrote " << (plots / "trace.svg").string() << "\n";
    ++drawn;
  }
  if (drawn == 0)
    throw DataError("nothing to plot in " + out_dir(c).string() +
                    "; expected analysis/connectivity_raw.txt, analysis/connectivity_thresholded.txt, "
                    "analysis/connectivity_permuted.txt, analysis/cooccurrence_<i>_<j>.txt, "
                    "analysis/activity_layer<l>_<ab>.txt or trace.txt (run analyze first)");
  return kOk;
}

int cmd_run(const ExperimentConfig& c, std::ostream& log) {
  if (int rc = cmd_gen_data(c, log); rc != kOk) return rc;
  const int trained = cmd_train(c, {}, log);
  if (trained != kOk && trained != kStructureCheckFailed) return trained;
  if (int rc = cmd_analyze(c, {}, log); rc != kOk) return rc;
  if (int rc = cmd_plot(c, log); rc != kOk) return rc;
  return trained;
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const svq::DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const svq::FormatError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kOtherError;
  }
}

}  // namespace svqcli
