#include "sean/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

namespace sean {

namespace {

// Runs task(i) for i in [0, n) on up to `jobs` threads and rethrows the
// first failure by index.
void run_cells(std::size_t n, std::size_t jobs,
               const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

auto perturbed_attention(const SeanModel& model, const PerturbedGraph& pg,
                         const Splits& splits, std::size_t max_nodes,
                         std::uint64_t seed) -> std::vector<AttentionSample> {
  const auto& g = pg.graph;
  const double t_query = splits.train.end < g.num_events()
                             ? g.event(splits.train.end).t
                             : g.max_time() + 1.0;
  std::vector<NodeId> touched;
  for (auto i : pg.perturbed_events) touched.push_back(g.event(i).src);
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  std::mt19937_64 rng(seed);
  std::shuffle(touched.begin(), touched.end(), rng);
  touched.resize(std::min(touched.size(), max_nodes));
  std::sort(touched.begin(), touched.end());

  std::vector<AttentionSample> out;
  Embedder embedder(g, model);
  for (NodeId node : touched) {
    const auto view = g.neighbor_view(node, t_query, model.config().sample_size);
    if (view.empty()) continue;
    const auto emb = embedder.embed(node, t_query);
    const auto& weights = emb.layers.front().weights;
    for (std::size_t j = 0; j < view.size(); ++j) {
      const auto ev = view.entries[j].event;
      if (std::binary_search(pg.perturbed_events.begin(),
                             pg.perturbed_events.end(), ev)) {
        out.push_back({model.config().mode, node, ev, weights.data()[j]});
      }
    }
  }
  return out;
}

}  // namespace

auto mode_name(AggregatorMode mode) -> std::string {
  return mode == AggregatorMode::kSeanLstm ? "sean" : "baseline";
}

auto parse_mode(const std::string& name) -> AggregatorMode {
  if (name == "sean") return AggregatorMode::kSeanLstm;
  if (name == "baseline") return AggregatorMode::kBaselineMlp;
  throw std::invalid_argument("mode must be one of {baseline, sean}, got '" +
                              name + "'");
}

auto fit_and_evaluate(const TemporalGraph& graph, const Splits& splits,
                      const TrainConfig& config, const RunOptions& options)
    -> RunResult {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  RunResult result;
  result.model = std::make_unique<SeanModel>(config.model_config(graph.feat_dim()));
  result.model->set_t_max(
      compute_t_max(graph, splits.train, config.sample_size));
  Trainer trainer(*result.model, graph, config);
  EvalOptions eval;
  eval.seed = config.seed;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    auto stats = trainer.train_epoch(splits.train);
    std::optional<double> val_ap;
    if (options.validate_each_epoch && !splits.val.empty()) {
      val_ap = evaluate_link_prediction(*result.model, graph, splits.val, eval).ap;
      result.val_ap.push_back(*val_ap);
    }
    if (options.on_epoch) options.on_epoch(stats, val_ap);
    result.epochs.push_back(std::move(stats));
  }
  result.test = evaluate_link_prediction(*result.model, graph, splits.test,
                                         options.test_options.value_or(eval));
  result.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

auto noise_robustness_sweep(const TemporalGraph& graph, const Splits& splits,
                            const TrainConfig& config,
                            const std::vector<double>& rates,
                            const SweepOptions& options) -> NoiseSweepResult {
  if (rates.empty() || options.modes.empty()) {
    throw std::invalid_argument("noise sweep: need at least one rate and mode");
  }
  const double top_rate = *std::max_element(rates.begin(), rates.end());
  const std::size_t n_modes = options.modes.size();
  NoiseSweepResult result;
  result.rows.resize(rates.size() * n_modes);
  std::vector<std::vector<AttentionSample>> attention(result.rows.size());
  run_cells(result.rows.size(), options.jobs, [&](std::size_t cell) {
    const double rate = rates[cell / n_modes];
    TrainConfig cfg = config;
    cfg.mode = options.modes[cell % n_modes];
    const auto pg = perturb_links(graph, rate, config.seed, splits.train);
    const auto run = fit_and_evaluate(pg.graph, splits, cfg);
    result.rows[cell] = {rate, cfg.mode, run.test.ap, run.runtime_s};
    if (rate == top_rate && top_rate > 0.0) {
      attention[cell] = perturbed_attention(*run.model, pg, splits,
                                            options.attention_nodes, config.seed);
    }
  });
  for (auto& a : attention) {
    result.perturbed_weights.insert(result.perturbed_weights.end(), a.begin(),
                                    a.end());
  }
  return result;
}

auto layer_sweep(const TemporalGraph& graph, const Splits& splits,
                 const TrainConfig& config, const std::vector<std::size_t>& ks,
                 const SweepOptions& options) -> std::vector<SweepRow> {
  if (ks.empty() || options.modes.empty()) {
    throw std::invalid_argument("layer sweep: need at least one depth and mode");
  }
  const std::size_t n_modes = options.modes.size();
  std::vector<SweepRow> rows(ks.size() * n_modes);
  run_cells(rows.size(), options.jobs, [&](std::size_t cell) {
    TrainConfig cfg = config;
    cfg.layers = ks[cell / n_modes];
    cfg.mode = options.modes[cell % n_modes];
    const auto run = fit_and_evaluate(graph, splits, cfg);
    rows[cell] = {static_cast<double>(cfg.layers), cfg.mode, run.test.ap,
                  run.runtime_s};
  });
  return rows;
}

auto gradcheck_sean(std::size_t seeds, double eps, std::uint64_t base_seed)
    -> GradCheckReport {
  const auto start = std::chrono::steady_clock::now();
  GradCheckReport report;
  for (std::size_t s = 0; s < seeds; ++s) {
    SynthConfig synth;
    synth.num_nodes = 12;
    synth.num_events = 40;
    synth.feat_dim = 3;
    synth.seed = base_seed + s;
    const auto g = generate_synthetic(synth);

    ModelConfig cfg;
    cfg.dim = 4;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.feat_dim = synth.feat_dim;
    cfg.sample_size = 4;
    cfg.seed = base_seed + s;
    SeanModel model(cfg);
    model.set_t_max(compute_t_max(g, {0, 30}, cfg.sample_size));

    const EventRange batch{30, 36};
    NegativeSampler sampler = NegativeSampler::for_graph(g, cfg.seed);
    std::vector<NodeId> negatives;
    for (std::size_t i = batch.begin; i < batch.end; ++i) {
      negatives.push_back(sampler.sample(g.event(i).dst));
    }
    EmbedOptions embed;
    embed.detach_gate = true;
    auto loss_fn = [&] {
      Embedder embedder(g, model, embed);
      std::vector<ProbabilityPair> pairs;
      for (std::size_t i = batch.begin; i < batch.end; ++i) {
        const auto& ev = g.event(i);
        const auto zs = embedder.embed(ev.src, ev.t).z;
        const auto zd = embedder.embed(ev.dst, ev.t).z;
        const auto zn = embedder.embed(negatives[i - batch.begin], ev.t).z;
        pairs.push_back({link_probability(zs, zd, model.decoder()),
                         link_probability(zs, zn, model.decoder())});
      }
      return link_loss(pairs);
    };
    auto params = model.parameters();
    const auto result = diff::grad_check(loss_fn, params, eps);
    report.per_seed.push_back(result.max_rel_error);
    report.max_rel_error = std::max(report.max_rel_error, result.max_rel_error);
    report.max_abs_error = std::max(report.max_abs_error, result.max_abs_error);
    report.coordinates += result.coordinates;
  }
  report.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << std::setprecision(12) << "param,mode,ap,runtime_s\n";
  for (const auto& r : rows) {
    out << r.param << ',' << mode_name(r.mode) << ',' << r.ap << ','
        << r.runtime_s << '\n';
  }
}

void write_attention_csv(std::ostream& out,
                         const std::vector<AttentionSample>& samples) {
  out << std::setprecision(12) << "mode,node,event,weight\n";
  for (const auto& s : samples) {
    out << mode_name(s.mode) << ',' << s.node << ',' << s.event << ','
        << s.weight << '\n';
  }
}

}  // namespace sean
