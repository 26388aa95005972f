#include "config.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "presets.hpp"
#include "svq/errors.hpp"

namespace svqcli {

using json = nlohmann::ordered_json;

namespace {

using Handlers = std::map<std::string, std::function<void(const json&)>>;

void read_object(const json& j, const std::string& where, const Handlers& handlers) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    auto it = handlers.find(key);
    if (it == handlers.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError(where + "." + key + ": " + e.what());
    }
  }
}

template <class T>
std::function<void(const json&)> into(T& target) {
  return [&target](const json& v) { target = v.get<T>(); };
}

std::function<void(const json&)> into_size(std::size_t& target, const std::string& name) {
  return [&target, name](const json& v) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError(name + ": expected a non-negative integer");
    target = v.get<std::size_t>();
  };
}

json steps_json(const svq::StageSteps& s) {
  return json{{"weights", s.weights}, {"biases", s.biases}, {"recon", s.recon}};
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty() || name.find_first_of("/\\ ") != std::string::npos)
    throw ConfigError("name must be non-empty and free of spaces and slashes");
  if (dataset.count == 0) throw ConfigError("dataset.count must be positive");
  const std::size_t L = chain.samples.size();
  if (L == 0) throw ConfigError("chain.samples must list one sample count per stage");
  if (chain.layer_sizes.size() != L + 1)
    throw ConfigError("chain.layer_sizes must have one more entry than chain.samples");
  if (chain.lambdas.size() != L) throw ConfigError("chain.lambdas must have one entry per stage");
  for (auto m : chain.layer_sizes)
    if (m == 0) throw ConfigError("chain.layer_sizes entries must be positive");
  for (auto n : chain.samples)
    if (n == 0) throw ConfigError("chain.samples entries must be positive");
  try {
    schedule.validate(L);
  } catch (const svq::InvalidArgument& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  if (protocol.seeds.empty()) throw ConfigError("protocol.seeds must not be empty");
  if (protocol.check != "none" && protocol.check != "hierarchy" && protocol.check != "arcs" &&
      protocol.check != "lowest-objective")
    throw ConfigError("protocol.check must be none, hierarchy, arcs or lowest-objective");
  if (protocol.check == "hierarchy" && (L != 3 || dataset.generator != "hier-phases"))
    throw ConfigError("protocol.check hierarchy needs a 3-stage chain on hier-phases data");
  if (protocol.check == "arcs" && (L != 1 || dataset.generator != "circle"))
    throw ConfigError("protocol.check arcs needs a 1-stage chain on circle data");
  if (!(analysis.threshold_fraction > 0.0 && analysis.threshold_fraction <= 1.0))
    throw ConfigError("analysis.threshold_fraction must lie in (0, 1]");
  if (!(analysis.logic_factor >= 1.0)) throw ConfigError("analysis.logic_factor must be at least 1");
  if (analysis.grid < 8) throw ConfigError("analysis.grid must be at least 8");
  if (analysis.cooccurrence_bins < 2) throw ConfigError("analysis.cooccurrence_bins must be at least 2");
  if (!(analysis.ratio_threshold > 0.0)) throw ConfigError("analysis.ratio_threshold must be positive");
  if (!(analysis.group_fraction > 0.0 && analysis.group_fraction <= 1.0))
    throw ConfigError("analysis.group_fraction must lie in (0, 1]");
  if (analysis.arc_resolution < 8) throw ConfigError("analysis.arc_resolution must be at least 8");
  if (plot.size < 64) throw ConfigError("plot.size must be at least 64");
}

svq::HierarchyOptions ExperimentConfig::hierarchy_options() const {
  svq::HierarchyOptions o;
  o.threshold_fraction = analysis.threshold_fraction;
  o.logic_factor = analysis.logic_factor;
  o.grid = analysis.grid;
  o.classify.ratio_threshold = analysis.ratio_threshold;
  o.sensitivity.group_fraction = analysis.group_fraction;
  return o;
}

json to_json(const ExperimentConfig& c) {
  json steps = json::array();
  for (const auto& s : c.schedule.steps) steps.push_back(steps_json(s));
  return json{
      {"name", c.name},
      {"dataset",
       {{"generator", c.dataset.generator},
        {"count", c.dataset.count},
        {"seed", c.dataset.seed},
        {"parameters", c.dataset.parameters}}},
      {"chain",
       {{"layer_sizes", c.chain.layer_sizes}, {"samples", c.chain.samples}, {"lambdas", c.chain.lambdas}}},
      {"schedule",
       {{"epochs", c.schedule.epochs},
        {"batch_size", c.schedule.batch_size},
        {"steps", steps},
        {"decay", c.schedule.decay},
        {"decay_start", c.schedule.decay_start},
        {"init_range", c.schedule.init_range},
        {"full_backprop", c.schedule.full_backprop},
        {"threads", c.schedule.threads}}},
      {"protocol", {{"seeds", c.protocol.seeds}, {"check", c.protocol.check}}},
      {"analysis",
       {{"threshold_fraction", c.analysis.threshold_fraction},
        {"logic_factor", c.analysis.logic_factor},
        {"grid", c.analysis.grid},
        {"cooccurrence_bins", c.analysis.cooccurrence_bins},
        {"ratio_threshold", c.analysis.ratio_threshold},
        {"group_fraction", c.analysis.group_fraction},
        {"arc_resolution", c.analysis.arc_resolution}}},
      {"plot", {{"size", c.plot.size}}},
      {"output", c.output},
  };
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  bool have_decay_start = false;
  auto& d = c.dataset;
  auto& ch = c.chain;
  auto& s = c.schedule;
  auto& a = c.analysis;
  read_object(j, "config", {
      {"name", into(c.name)},
      {"output", into(c.output)},
      {"dataset", [&](const json& v) {
         read_object(v, "dataset", {{"generator", into(d.generator)},
                                    {"count", into_size(d.count, "dataset.count")},
                                    {"seed", into(d.seed)},
                                    {"parameters", into(d.parameters)}});
       }},
      {"chain", [&](const json& v) {
         read_object(v, "chain", {{"layer_sizes", into(ch.layer_sizes)},
                                  {"samples", into(ch.samples)},
                                  {"lambdas", into(ch.lambdas)}});
       }},
      {"schedule", [&](const json& v) {
         read_object(v, "schedule", {
             {"epochs", into_size(s.epochs, "schedule.epochs")},
             {"batch_size", into_size(s.batch_size, "schedule.batch_size")},
             {"decay", into(s.decay)},
             {"decay_start", [&](const json& x) {
                if (!x.is_array()) throw ConfigError("schedule.decay_start: expected an array");
                s.decay_start.assign(x.size(), 0);
                for (std::size_t k = 0; k < x.size(); ++k) into_size(s.decay_start[k], "schedule.decay_start")(x[k]);
                have_decay_start = true;
              }},
             {"init_range", into(s.init_range)},
             {"full_backprop", into(s.full_backprop)},
             {"threads", into_size(s.threads, "schedule.threads")},
             {"steps", [&](const json& x) {
                if (!x.is_array()) throw ConfigError("schedule.steps: expected an array");
                s.steps.clear();
                for (const auto& e : x) {
                  svq::StageSteps st;
                  read_object(e, "schedule.steps[]", {{"weights", into(st.weights)},
                                                      {"biases", into(st.biases)},
                                                      {"recon", into(st.recon)}});
                  s.steps.push_back(st);
                }
              }},
         });
       }},
      {"protocol", [&](const json& v) {
         read_object(v, "protocol", {{"seeds", into(c.protocol.seeds)}, {"check", into(c.protocol.check)}});
       }},
      {"analysis", [&](const json& v) {
         read_object(v, "analysis", {
             {"threshold_fraction", into(a.threshold_fraction)},
             {"logic_factor", into(a.logic_factor)},
             {"grid", into_size(a.grid, "analysis.grid")},
             {"cooccurrence_bins", into_size(a.cooccurrence_bins, "analysis.cooccurrence_bins")},
             {"ratio_threshold", into(a.ratio_threshold)},
             {"group_fraction", into(a.group_fraction)},
             {"arc_resolution", into_size(a.arc_resolution, "analysis.arc_resolution")},
         });
       }},
      {"plot", [&](const json& v) { read_object(v, "plot", {{"size", into_size(c.plot.size, "plot.size")}}); }},
  });
  if (!have_decay_start) {
    const std::size_t L = ch.samples.size();
    s.decay_start.clear();
    for (std::size_t l = 0; l < L; ++l) s.decay_start.push_back((l + 1) * s.epochs / 10);
  }
  return c;
}

namespace {

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

ExperimentConfig preset_config(const std::string& name) {
  for (const auto& p : kPresets)
    if (name == p.name || name == p.alias) return parse_config_text(p.text, "preset " + name);
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

std::string dump_config(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace svqcli
