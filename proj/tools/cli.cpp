#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sean/diff/checkpoint.hpp"
#include "sean/harness.hpp"

namespace sean::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

const std::vector<std::string> kCommands = {
    "train", "eval", "perturb-sweep", "layer-sweep", "gradcheck", "synth"};

auto trim(std::string_view s) -> std::string {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

auto parse_uint(const std::string& key, const std::string& value,
                std::size_t min) -> std::size_t {
  std::size_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value +
                      "'");
  }
  if (out < min) {
    throw ConfigError(key + ": must be >= " + std::to_string(min) + " (got " +
                      value + ")");
  }
  return out;
}

auto parse_double(const std::string& key, const std::string& value) -> double {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a finite number, got '" + value + "'");
  }
  return out;
}

auto parse_double_min(const std::string& key, const std::string& value,
                      double lo, bool strict) -> double {
  const double v = parse_double(key, value);
  if (strict ? !(v > lo) : !(v >= lo)) {
    std::ostringstream msg;
    msg << key << ": must be " << (strict ? "> " : ">= ") << lo << " (got "
        << value << ")";
    throw ConfigError(msg.str());
  }
  return v;
}

auto parse_double_range(const std::string& key, const std::string& value,
                        double lo, double hi) -> double {
  const double v = parse_double(key, value);
  if (v < lo || v > hi) {
    std::ostringstream msg;
    msg << key << ": must be in [" << lo << ", " << hi << "] (got " << value
        << ")";
    throw ConfigError(msg.str());
  }
  return v;
}

auto parse_bool(const std::string& key, const std::string& value) -> bool {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

template <class T>
auto parse_list(const std::string& key, const std::string& value,
                const std::function<T(const std::string&)>& item)
    -> std::vector<T> {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    out.push_back(item(trim(part)));
  }
  if (out.empty()) throw ConfigError(key + ": list must not be empty");
  return out;
}

auto command_defaults(const std::string& command)
    -> std::map<std::string, std::string> {
  std::map<std::string, std::string> out;
  for (const auto& spec : schema()) out[spec.key] = spec.default_value;
  if (command == "layer-sweep") out["sample_size"] = "5";
  return out;
}

auto open_out(const fs::path& path) -> std::ofstream {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

auto load_graph(const RunConfig& cfg) -> TemporalGraph {
  if (cfg.data.empty()) {
    throw ConfigError("data: required for '" + cfg.command + "'");
  }
  spdlog::info("loading {}", cfg.data.string());
  auto g = load_jodie_csv(cfg.data, CsvOptions{cfg.bipartite});
  spdlog::info("{} events, {} nodes, {} edge features", g.num_events(),
               g.num_nodes(), g.feat_dim());
  return g;
}

void write_report(const RunConfig& cfg, const EvalReport& report,
                  std::optional<double> node_auroc = std::nullopt) {
  ordered_json j;
  j["setting"] = setting_name(report.setting);
  j["ap"] = report.ap;
  j["auroc"] = report.auroc ? ordered_json(*report.auroc) : ordered_json();
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.train.seed;
  j["runtime_s"] = report.runtime_s;
  j["pairs"] = report.pairs;
  if (node_auroc) j["node_auroc"] = *node_auroc;
  auto out = open_out(cfg.out / "report.json");
  out << j.dump(2) << '\n';
  spdlog::info("{} AP {:.4f} AUROC {:.4f} over {} pairs",
               setting_name(report.setting), report.ap,
               report.auroc.value_or(0.0), report.pairs);
}

struct Prepared {
  TemporalGraph graph;
  Splits splits;
  std::optional<InductiveMask> mask;

  auto active_graph() const -> const TemporalGraph& {
    return mask ? mask->visible : graph;
  }
  auto active_splits() const -> const Splits& {
    return mask ? mask->visible_splits : splits;
  }
  auto eval_options(const RunConfig& cfg) const -> EvalOptions {
    EvalOptions eo;
    eo.setting = cfg.setting;
    eo.mask = mask ? &*mask : nullptr;
    eo.seed = cfg.train.seed;
    return eo;
  }
};

auto prepare(const RunConfig& cfg) -> Prepared {
  Prepared p;
  p.graph = load_graph(cfg);
  p.splits = chronological_split(p.graph, cfg.split);
  if (cfg.setting == Setting::kInductive) {
    p.mask.emplace(mask_inductive_nodes(p.graph, p.splits,
                                        cfg.inductive_fraction, cfg.train.seed));
    spdlog::info("inductive: {} unseen nodes", p.mask->unseen.size());
  }
  return p;
}

auto metrics_line(const char* phase, std::size_t epoch,
                  std::optional<std::size_t> batch, double loss, double l_link,
                  double l_ndp, std::optional<double> val_ap) -> std::string {
  ordered_json j;
  j["phase"] = phase;
  j["epoch"] = epoch;
  j["batch"] = batch ? ordered_json(*batch) : ordered_json();
  j["loss"] = loss;
  j["l_link"] = l_link;
  j["l_ndp"] = l_ndp;
  j["val_ap"] = val_ap ? ordered_json(*val_ap) : ordered_json();
  return j.dump();
}

auto cmd_train(const RunConfig& cfg) -> int {
  const auto p = prepare(cfg);
  auto metrics = open_out(cfg.out / "metrics.jsonl");
  RunOptions ro;
  ro.validate_each_epoch = true;
  ro.test_options = p.eval_options(cfg);
  ro.on_epoch = [&](const EpochStats& s, std::optional<double> val_ap) {
    for (const auto& b : s.batches) {
      metrics << metrics_line("train", b.epoch, b.batch, b.loss, b.l_link,
                              b.l_ndp, std::nullopt)
              << '\n';
      spdlog::debug("epoch {} batch {} loss {:.6f}", b.epoch, b.batch, b.loss);
    }
    metrics << metrics_line("val", s.epoch, std::nullopt, s.loss, s.l_link,
                            s.l_ndp, val_ap)
            << '\n';
    metrics.flush();
    spdlog::info("epoch {} loss {:.4f} (link {:.4f}, ndp {:.4f}) val AP {:.4f} "
                 "in {:.1f}s",
                 s.epoch, s.loss, s.l_link, s.l_ndp, val_ap.value_or(0.0),
                 s.seconds);
  };
  const auto run =
      fit_and_evaluate(p.active_graph(), p.active_splits(), cfg.train, ro);
  diff::save_checkpoint(cfg.checkpoint, run.model->state());
  EvalReport report = run.test;
  report.runtime_s = run.runtime_s;
  write_report(cfg, report);
  return 0;
}

auto cmd_eval(const RunConfig& cfg) -> int {
  const auto p = prepare(cfg);
  SeanModel model(cfg.train.model_config(p.graph.feat_dim()));
  model.load_state(diff::load_checkpoint(cfg.checkpoint));
  auto eo = p.eval_options(cfg);
  std::vector<PruneTrace> trace;
  if (cfg.prune_trace) eo.trace = &trace;
  const auto report = evaluate_link_prediction(model, p.active_graph(),
                                               p.active_splits().test, eo);
  std::optional<double> node_auroc;
  if (cfg.node_class) {
    NodeClassConfig nc;
    nc.hidden = cfg.train.dim;
    nc.seed = cfg.train.seed;
    node_auroc = evaluate_node_classification(model, p.graph, p.splits, nc);
    spdlog::info("node classification AUROC {:.4f}", *node_auroc);
  }
  if (cfg.prune_trace) {
    auto out = open_out(cfg.out / "prune_trace.jsonl");
    write_prune_trace(out, trace);
  }
  write_report(cfg, report, node_auroc);
  return 0;
}

auto cmd_perturb_sweep(const RunConfig& cfg) -> int {
  const auto g = load_graph(cfg);
  const auto splits = chronological_split(g, cfg.split);
  SweepOptions so;
  so.jobs = cfg.jobs;
  const auto result =
      noise_robustness_sweep(g, splits, cfg.train, cfg.rates, so);
  auto table = open_out(cfg.out / "perturb_sweep.csv");
  write_sweep_csv(table, result.rows);
  auto weights = open_out(cfg.out / "perturbed_attention.csv");
  write_attention_csv(weights, result.perturbed_weights);
  for (const auto& r : result.rows) {
    spdlog::info("rate {:.2f} {} AP {:.4f}", r.param, mode_name(r.mode), r.ap);
  }
  return 0;
}

auto cmd_layer_sweep(const RunConfig& cfg) -> int {
  const auto g = load_graph(cfg);
  const auto splits = chronological_split(g, cfg.split);
  SweepOptions so;
  so.jobs = cfg.jobs;
  const auto rows = layer_sweep(g, splits, cfg.train, cfg.ks, so);
  auto table = open_out(cfg.out / "layer_sweep.csv");
  write_sweep_csv(table, rows);
  for (const auto& r : rows) {
    spdlog::info("K={} {} AP {:.4f} in {:.1f}s", r.param, mode_name(r.mode),
                 r.ap, r.runtime_s);
  }
  return 0;
}

auto cmd_gradcheck(const RunConfig& cfg) -> int {
  constexpr double kTolerance = 1e-4;
  const auto report = gradcheck_sean(cfg.gc_seeds, cfg.gc_eps, cfg.train.seed);
  const bool passed = report.max_rel_error < kTolerance;
  ordered_json j;
  j["eps"] = cfg.gc_eps;
  j["seeds"] = cfg.gc_seeds;
  j["coordinates"] = report.coordinates;
  j["max_rel_error"] = report.max_rel_error;
  j["max_abs_error"] = report.max_abs_error;
  j["per_seed"] = report.per_seed;
  j["tolerance"] = kTolerance;
  j["passed"] = passed;
  j["runtime_s"] = report.runtime_s;
  auto out = open_out(cfg.out / "gradcheck.json");
  out << j.dump(2) << '\n';
  if (!passed) {
    spdlog::error("max relative error {:.3g} >= {} (max absolute error {:.3g})",
                  report.max_rel_error, kTolerance, report.max_abs_error);
    return 1;
  }
  spdlog::info("max relative error {:.3g} over {} coordinates",
               report.max_rel_error, report.coordinates);
  return 0;
}

auto cmd_synth(const RunConfig& cfg) -> int {
  auto synth = cfg.synth;
  synth.seed = cfg.train.seed;
  const auto g = generate_synthetic(synth);
  const auto path = cfg.out / "synth.csv";
  write_jodie_csv(g, path);
  spdlog::info("wrote {} events to {}", g.num_events(), path.string());
  return 0;
}

void configure_logging() {
  auto logger = spdlog::get("sean");
  if (!logger) {
    logger = spdlog::stderr_color_mt("sean");
    logger->set_pattern("[%l] %v");
  }
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("SEAN_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    throw ConfigError("SEAN_LOG: must be one of {error, info, debug}, got '" +
                      level + "'");
  }
}

auto keys_footer() -> std::string {
  std::ostringstream out;
  out << "Keys (flags --key VALUE or `key = value` lines in --config FILE; "
         "flags win):\n";
  for (const auto& spec : schema()) {
    out << "  " << std::left << std::setw(27) << spec.key << std::setw(26)
        << ("default " + (spec.default_value.empty() ? std::string("(none)")
                                                      : spec.default_value))
        << std::setw(14) << spec.unit << spec.help << '\n';
  }
  out << "Environment: SEAN_LOG in {error, info, debug} (default info).";
  return out.str();
}

}  // namespace

auto schema() -> const std::vector<KeySpec>& {
  static const std::vector<KeySpec> keys = {
      {"data", "", "path", "JODIE-layout CSV event file"},
      {"out", "out", "dir", "directory receiving every output"},
      {"checkpoint", "", "path", "model file (default <out>/checkpoint.bin)"},
      {"bipartite", "true", "bool", "user/item id spaces in the CSV"},
      {"train_frac", "0.70", "fraction", "chronological training share"},
      {"val_frac", "0.15", "fraction", "chronological validation share"},
      {"test_frac", "0.15", "fraction", "chronological test share"},
      {"seed", "0", "-", "single source of all randomness"},
      {"epochs", "10", "epochs", "training epochs"},
      {"batch_size", "200", "events", "events per optimiser step"},
      {"lr", "0.0001", "-", "Adam learning rate"},
      {"layers", "1", "layers", "aggregation depth K"},
      {"heads", "2", "heads", "attention heads (must divide dim)"},
      {"tau", "0.1", "score", "diversity-penalty threshold in [0, 1]"},
      {"lambda", "0.1", "weight", "diversity-penalty weight, >= 0"},
      {"sample_size", "10", "neighbours", "most recent neighbours per node "
                                          "(layer-sweep default 5)"},
      {"dim", "32", "-", "embedding width d"},
      {"mode", "sean", "enum", "baseline | sean"},
      {"rns", "true", "bool", "occurrence-aware attention"},
      {"ta", "true", "bool", "LSTM temporal aggregator"},
      {"ndp", "true", "bool", "neighbour diversity penalty"},
      {"apm", "true", "bool", "adaptive pruning"},
      {"om", "true", "bool", "outdated decay"},
      {"degree_mode", "neighbor", "enum", "neighbor | target occurrence "
                                          "normaliser"},
      {"prune_projection", "vector", "enum", "vector | matrix_mean"},
      {"ndp_filter_in_aggregation", "false", "bool",
       "feed tau-filtered scores to the softmax"},
      {"setting", "transductive", "enum", "transductive | inductive"},
      {"inductive_fraction", "0.1", "fraction", "share of nodes held out"},
      {"node_class", "false", "bool", "eval: also report node AUROC"},
      {"prune_trace", "false", "bool", "eval: write prune_trace.jsonl"},
      {"rates", "0.1,0.2,0.3,0.4,0.5", "list", "perturbation rates"},
      {"ks", "1,2,3,4,5", "list", "layer-sweep depths"},
      {"jobs", "1", "threads", "parallel sweep cells"},
      {"gc_seeds", "20", "seeds", "gradcheck random problems"},
      {"gc_eps", "1e-5", "-", "gradcheck central-difference step"},
      {"num_nodes", "500", "nodes", "synth: node count"},
      {"num_events", "20000", "events", "synth: event count"},
      {"feat_dim", "16", "-", "synth: edge-feature width"},
      {"recur_prob", "0.8", "probability", "synth: repeat-destination rate"},
      {"feat_noise", "0.5", "stddev", "synth: feature noise"},
  };
  return keys;
}

auto parse_config_file(const fs::path& path)
    -> std::map<std::string, std::string> {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    const auto key = trim(std::string_view(body).substr(0, eq));
    const auto value = trim(std::string_view(body).substr(eq + 1));
    if (!out.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
    }
  }
  return out;
}

auto resolve_config(const std::string& command,
                    const std::map<std::string, std::string>& file_values,
                    const std::map<std::string, std::string>& flag_values)
    -> RunConfig {
  RunConfig cfg;
  cfg.command = command;
  cfg.resolved = command_defaults(command);
  for (const auto* layer : {&file_values, &flag_values}) {
    for (const auto& [k, v] : *layer) {
      auto it = cfg.resolved.find(k);
      if (it == cfg.resolved.end()) {
        throw ConfigError("unknown key '" + k + "'");
      }
      it->second = v;
    }
  }
  const auto& r = cfg.resolved;
  auto get = [&](const char* key) -> const std::string& { return r.at(key); };

  cfg.data = get("data");
  cfg.out = get("out");
  if (cfg.out.empty()) throw ConfigError("out: must not be empty");
  cfg.checkpoint = get("checkpoint").empty() ? cfg.out / "checkpoint.bin"
                                             : fs::path(get("checkpoint"));
  cfg.bipartite = parse_bool("bipartite", get("bipartite"));
  cfg.split.train_frac = parse_double_range("train_frac", get("train_frac"), 0, 1);
  cfg.split.val_frac = parse_double_range("val_frac", get("val_frac"), 0, 1);
  cfg.split.test_frac = parse_double_range("test_frac", get("test_frac"), 0, 1);
  try {
    cfg.split.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("train_frac/val_frac/test_frac: ") + e.what());
  }

  auto& t = cfg.train;
  t.seed = parse_uint("seed", get("seed"), 0);
  t.epochs = parse_uint("epochs", get("epochs"), 1);
  t.batch_size = parse_uint("batch_size", get("batch_size"), 1);
  t.lr = parse_double_min("lr", get("lr"), 0.0, true);
  t.layers = parse_uint("layers", get("layers"), 1);
  t.heads = parse_uint("heads", get("heads"), 1);
  t.tau = parse_double_range("tau", get("tau"), 0.0, 1.0);
  t.lambda = parse_double_min("lambda", get("lambda"), 0.0, false);
  t.sample_size = parse_uint("sample_size", get("sample_size"), 1);
  t.dim = parse_uint("dim", get("dim"), 1);
  if (t.dim % t.heads != 0) {
    throw ConfigError("heads: must divide dim (dim " + std::to_string(t.dim) +
                      ", heads " + std::to_string(t.heads) + ")");
  }
  try {
    t.mode = parse_mode(get("mode"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  t.components.rns = parse_bool("rns", get("rns"));
  t.components.ta = parse_bool("ta", get("ta"));
  t.components.ndp = parse_bool("ndp", get("ndp"));
  t.components.apm = parse_bool("apm", get("apm"));
  t.components.om = parse_bool("om", get("om"));
  if (get("degree_mode") == "neighbor") {
    t.degree_mode = DegreeMode::kNeighbor;
  } else if (get("degree_mode") == "target") {
    t.degree_mode = DegreeMode::kTarget;
  } else {
    throw ConfigError("degree_mode: must be one of {neighbor, target}, got '" +
                      get("degree_mode") + "'");
  }
  if (get("prune_projection") == "vector") {
    t.prune_projection = PruneProjection::kVector;
  } else if (get("prune_projection") == "matrix_mean") {
    t.prune_projection = PruneProjection::kMatrixMean;
  } else {
    throw ConfigError(
        "prune_projection: must be one of {vector, matrix_mean}, got '" +
        get("prune_projection") + "'");
  }
  t.ndp_filter_in_aggregation =
      parse_bool("ndp_filter_in_aggregation", get("ndp_filter_in_aggregation"));

  if (get("setting") == "transductive") {
    cfg.setting = Setting::kTransductive;
  } else if (get("setting") == "inductive") {
    cfg.setting = Setting::kInductive;
  } else {
    throw ConfigError("setting: must be one of {transductive, inductive}, got '" +
                      get("setting") + "'");
  }
  cfg.inductive_fraction =
      parse_double("inductive_fraction", get("inductive_fraction"));
  if (!(cfg.inductive_fraction > 0.0) || !(cfg.inductive_fraction < 1.0)) {
    throw ConfigError("inductive_fraction: must be in (0, 1) (got " +
                      get("inductive_fraction") + ")");
  }
  cfg.node_class = parse_bool("node_class", get("node_class"));
  cfg.prune_trace = parse_bool("prune_trace", get("prune_trace"));
  cfg.rates = parse_list<double>("rates", get("rates"), [](const std::string& v) {
    return parse_double_range("rates", v, 0.0, 1.0);
  });
  cfg.ks = parse_list<std::size_t>("ks", get("ks"), [](const std::string& v) {
    return parse_uint("ks", v, 1);
  });
  cfg.jobs = parse_uint("jobs", get("jobs"), 1);
  cfg.gc_seeds = parse_uint("gc_seeds", get("gc_seeds"), 1);
  cfg.gc_eps = parse_double_min("gc_eps", get("gc_eps"), 0.0, true);

  cfg.synth.num_nodes = parse_uint("num_nodes", get("num_nodes"), 2);
  cfg.synth.num_events = parse_uint("num_events", get("num_events"), 1);
  cfg.synth.feat_dim = parse_uint("feat_dim", get("feat_dim"), 0);
  cfg.synth.recur_prob =
      parse_double_range("recur_prob", get("recur_prob"), 0.0, 1.0);
  cfg.synth.feat_noise =
      parse_double_min("feat_noise", get("feat_noise"), 0.0, false);
  cfg.synth.seed = t.seed;
  return cfg;
}

auto config_hash(const RunConfig& config) -> std::string {
  std::uint64_t h = 14695981039346656037ull;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  feed(config.command);
  feed("\n");
  for (const auto& [k, v] : config.resolved) {
    if (k == "out" || k == "checkpoint" || k == "jobs") continue;
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

auto run_cli(int argc, const char* const* argv) -> int {
  CLI::App app{"Adaptive neighbourhood encoding (SEAN) for temporal interaction "
               "graphs"};
  app.require_subcommand(1);
  app.footer(keys_footer());

  struct CommandSlot {
    CLI::App* app = nullptr;
    std::string config_file;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
  };
  const std::map<std::string, std::string> descriptions = {
      {"train", "train a model; writes checkpoint, metrics stream, report"},
      {"eval", "evaluate a checkpoint on the test split"},
      {"perturb-sweep", "link-noise robustness table"},
      {"layer-sweep", "AP per aggregation depth"},
      {"gradcheck", "finite-difference gradient verification"},
      {"synth", "write a planted-recurrence synthetic dataset"},
  };
  std::map<std::string, CommandSlot> slots;
  for (const auto& name : kCommands) {
    auto& slot = slots[name];
    slot.app = app.add_subcommand(name, descriptions.at(name));
    slot.app->add_option("--config", slot.config_file,
                         "flat `key = value` file; flags override it");
    const auto defaults = command_defaults(name);
    for (const auto& spec : schema()) {
      const auto& def = defaults.at(spec.key);
      slot.options[spec.key] = slot.app->add_option(
          "--" + spec.key, slot.values[spec.key],
          spec.help + " [" + spec.unit + "] (default: " +
              (def.empty() ? std::string("none") : def) + ")");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::string command;
  for (auto& [name, slot] : slots) {
    if (slot.app->parsed()) command = name;
  }
  auto& slot = slots.at(command);

  RunConfig cfg;
  try {
    configure_logging();
    std::map<std::string, std::string> file_values;
    if (!slot.config_file.empty()) {
      file_values = parse_config_file(slot.config_file);
    }
    std::map<std::string, std::string> flag_values;
    for (const auto& [key, opt] : slot.options) {
      if (opt->count() > 0) flag_values[key] = slot.values[key];
    }
    cfg = resolve_config(command, file_values, flag_values);
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    fs::create_directories(cfg.out);
    if (command == "train") return cmd_train(cfg);
    if (command == "eval") return cmd_eval(cfg);
    if (command == "perturb-sweep") return cmd_perturb_sweep(cfg);
    if (command == "layer-sweep") return cmd_layer_sweep(cfg);
    if (command == "gradcheck") return cmd_gradcheck(cfg);
    return cmd_synth(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}

}  // namespace sean::cli
