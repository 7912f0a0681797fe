#include "sean/training.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <stdexcept>

#include "sean/diff/ops.hpp"

namespace sean {

using namespace sean::diff;

namespace {

constexpr double kProbFloor = 1e-12;

auto seconds_since(std::chrono::steady_clock::time_point start) -> double {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(tau >= 0.0) || tau > 1.0) {
    throw std::invalid_argument("tau must be in [0, 1]");
  }
  model_config(0).validate();
}

auto TrainConfig::model_config(std::size_t feat_dim) const -> ModelConfig {
  ModelConfig m;
  m.dim = dim;
  m.heads = heads;
  m.layers = layers;
  m.feat_dim = feat_dim;
  m.sample_size = sample_size;
  m.mode = mode;
  m.components = components;
  m.degree_mode = degree_mode;
  m.prune_projection = prune_projection;
  m.ndp_filter_in_aggregation = ndp_filter_in_aggregation;
  m.tau = tau;
  m.seed = seed;
  return m;
}

auto TrainConfig::effective_lambda() const -> double {
  return model_config(0).effective_components().ndp ? lambda : 0.0;
}

NegativeSampler::NegativeSampler(NodeId first, NodeId last, std::uint64_t seed)
    : first_(first), last_(last), rng_(seed) {
  if (last <= first) {
    throw std::invalid_argument("NegativeSampler: empty candidate range");
  }
}

auto NegativeSampler::for_graph(const TemporalGraph& g, std::uint64_t seed)
    -> NegativeSampler {
  const auto [lo, hi] = destination_candidates(g);
  return NegativeSampler(lo, hi, seed);
}

auto NegativeSampler::sample(NodeId positive) -> NodeId {
  const bool inside = positive >= first_ && positive < last_;
  const NodeId pool = last_ - first_ - (inside ? 1 : 0);
  if (pool == 0) {
    throw std::logic_error("NegativeSampler: no candidate besides the positive");
  }
  std::uniform_int_distribution<NodeId> pick(0, pool - 1);
  NodeId v = first_ + pick(rng_);
  if (inside && v >= positive) ++v;
  return v;
}

auto link_probability(const Tensor& z_i, const Tensor& z_j,
                      const LinkDecoder& decoder) -> Tensor {
  if (z_i.rank() != 1 || z_i.shape() != z_j.shape()) {
    throw ShapeError("link_probability: embeddings " + shape_str(z_i.shape()) +
                     " and " + shape_str(z_j.shape()));
  }
  const Tensor parts[] = {z_i, z_j};
  return sigmoid(decoder.output.forward(relu(decoder.hidden.forward(concat(parts)))));
}

auto link_loss(std::span<const ProbabilityPair> pairs) -> Tensor {
  if (pairs.empty()) throw std::invalid_argument("link_loss: no pairs");
  std::vector<Tensor> terms;
  terms.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    terms.push_back(log(clamp(p.positive, kProbFloor, 1.0 - kProbFloor)));
    const auto miss = add_scalar(scale(p.negative, -1.0), 1.0);
    terms.push_back(log(clamp(miss, kProbFloor, 1.0 - kProbFloor)));
  }
  return scale(sum(concat(terms)), -1.0);
}

auto total_loss(const Tensor& l_link, const Tensor& l_ndp, double lambda)
    -> Tensor {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  return add(l_link, scale(l_ndp, lambda));
}

auto compute_t_max(const TemporalGraph& g, EventRange range,
                   std::size_t sample_size) -> double {
  double t_max = 0.0;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    const auto& e = g.event(i);
    for (NodeId node : {e.src, e.dst}) {
      const auto view = g.neighbor_view(node, e.t, sample_size);
      if (!view.empty()) {
        t_max = std::max(t_max, e.t - view.entries.back().event_t);
      }
    }
  }
  return t_max > 0.0 ? t_max : 1.0;
}

Trainer::Trainer(SeanModel& model, const TemporalGraph& graph, TrainConfig config)
    : model_(model),
      graph_(graph),
      config_(config),
      params_(model.parameters()),
      adam_(adam_init(params_, config.lr)),
      sampler_(NegativeSampler::for_graph(graph, config.seed ^ 0x5EA17EA1ull)) {
  config_.validate();
}

auto Trainer::train_epoch(EventRange range) -> EpochStats {
  if (range.empty()) throw std::invalid_argument("train_epoch: empty range");
  if (range.end > graph_.num_events()) {
    throw std::out_of_range("train_epoch: range exceeds event count");
  }
  const auto start = std::chrono::steady_clock::now();
  const double lambda = config_.effective_lambda();
  const std::size_t depth = model_.config().layers;
  EpochStats stats;
  stats.epoch = ++epochs_done_;
  std::size_t batch_index = 0;
  for (std::size_t b = range.begin; b < range.end; b += config_.batch_size) {
    const std::size_t e = std::min(range.end, b + config_.batch_size);
    Tape tape;
    TapeScope scope(tape);
    Embedder embedder(graph_, model_);
    std::vector<ProbabilityPair> pairs;
    pairs.reserve(e - b);
    std::vector<std::vector<Tensor>> ndp_scores(depth);
    bool any_scores = false;
    auto keep_scores = [&](const Embedding& emb) {
      for (std::size_t k = 0; k < depth; ++k) {
        if (emb.layers[k].scores.defined()) {
          ndp_scores[k].push_back(emb.layers[k].scores);
          any_scores = true;
        }
      }
    };
    for (std::size_t i = b; i < e; ++i) {
      const auto& ev = graph_.event(i);
      const NodeId neg = sampler_.sample(ev.dst);
      const auto zs = embedder.embed(ev.src, ev.t);
      const auto zd = embedder.embed(ev.dst, ev.t);
      const auto zn = embedder.embed(neg, ev.t);
      keep_scores(zs);
      keep_scores(zd);
      keep_scores(zn);
      pairs.push_back({link_probability(zs.z, zd.z, model_.decoder()),
                       link_probability(zs.z, zn.z, model_.decoder())});
    }
    const Tensor l_link = link_loss(pairs);
    const Tensor l_ndp = any_scores ? selector::ndp_loss(ndp_scores, config_.tau)
                                    : Tensor::scalar(0.0);
    const Tensor loss = total_loss(l_link, l_ndp, lambda);
    zero_grad(params_);
    tape.backward(loss);
    adam_step(params_, adam_);

    BatchStats bs{stats.epoch, ++batch_index, loss.item(), l_link.item(),
                  l_ndp.item()};
    stats.loss += bs.loss;
    stats.l_link += bs.l_link;
    stats.l_ndp += bs.l_ndp;
    stats.batches.push_back(bs);
  }
  const double n = static_cast<double>(stats.batches.size());
  stats.loss /= n;
  stats.l_link /= n;
  stats.l_ndp /= n;
  stats.seconds = seconds_since(start);
  return stats;
}

auto setting_name(Setting s) -> std::string {
  return s == Setting::kTransductive ? "transductive" : "inductive";
}

auto score_link_pairs(const SeanModel& model, const TemporalGraph& graph,
                      EventRange range, const EvalOptions& options)
    -> std::vector<ScoredLabel> {
  if (range.end > graph.num_events()) {
    throw std::out_of_range("evaluate: range exceeds event count");
  }
  if (options.setting == Setting::kInductive && options.mask == nullptr) {
    throw std::invalid_argument("evaluate: inductive setting needs a node mask");
  }
  NegativeSampler sampler = NegativeSampler::for_graph(graph, options.seed);
  EmbedOptions embed_options;
  embed_options.trace = options.trace;
  Embedder embedder(graph, model, embed_options);
  std::vector<ScoredLabel> scored;
  std::size_t in_chunk = 0;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    const auto& ev = graph.event(i);
    if (options.setting == Setting::kInductive &&
        !options.mask->is_unseen(ev.src) && !options.mask->is_unseen(ev.dst)) {
      continue;
    }
    const NodeId neg = sampler.sample(ev.dst);
    const auto zs = embedder.embed(ev.src, ev.t).z;
    const auto zd = embedder.embed(ev.dst, ev.t).z;
    const auto zn = embedder.embed(neg, ev.t).z;
    scored.push_back({link_probability(zs, zd, model.decoder()).item(), 1});
    scored.push_back({link_probability(zs, zn, model.decoder()).item(), 0});
    if (++in_chunk == options.chunk) {
      embedder.clear_cache();
      in_chunk = 0;
    }
  }
  if (scored.empty()) {
    throw std::invalid_argument("evaluate: no qualifying " +
                                setting_name(options.setting) + " events");
  }
  return scored;
}

auto evaluate_link_prediction(const SeanModel& model,
                              const TemporalGraph& graph, EventRange range,
                              const EvalOptions& options) -> EvalReport {
  const auto start = std::chrono::steady_clock::now();
  const auto scored = score_link_pairs(model, graph, range, options);
  EvalReport report;
  report.setting = options.setting;
  report.ap = average_precision(scored);
  report.auroc = auroc(scored);
  report.pairs = scored.size() / 2;
  report.runtime_s = seconds_since(start);
  return report;
}

auto fit_label_decoder(const std::vector<std::vector<double>>& train_x,
                       const std::vector<int>& train_y,
                       const std::vector<std::vector<double>>& test_x,
                       const std::vector<int>& test_y,
                       const NodeClassConfig& config) -> double {
  if (train_x.empty() || train_x.size() != train_y.size() ||
      test_x.size() != test_y.size()) {
    throw std::invalid_argument("fit_label_decoder: mismatched or empty data");
  }
  if (config.batch_size == 0 || config.hidden == 0 || !(config.lr > 0.0)) {
    throw std::invalid_argument("fit_label_decoder: invalid decoder config");
  }
  const std::size_t in = train_x.front().size();
  Rng rng(config.seed);
  const Linear hidden = Linear::init(in, config.hidden, rng);
  const Linear output = Linear::init(config.hidden, 1, rng);
  std::vector<NamedTensor> named;
  hidden.collect("hidden", named);
  output.collect("output", named);
  std::vector<Tensor> params;
  for (auto& n : named) params.push_back(n.tensor);
  AdamState adam = adam_init(params, config.lr);

  auto rows = [in](const std::vector<std::vector<double>>& x,
                   std::span<const std::size_t> idx) {
    std::vector<double> flat;
    flat.reserve(idx.size() * in);
    for (auto i : idx) {
      if (x[i].size() != in) {
        throw ShapeError("fit_label_decoder: ragged feature rows");
      }
      flat.insert(flat.end(), x[i].begin(), x[i].end());
    }
    return Tensor::from({idx.size(), in}, std::move(flat));
  };
  auto logits = [&](const Tensor& x) {
    return output.forward(relu(hidden.forward(x)));
  };

  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::span<const std::size_t> idx(
          order.data() + b, std::min(config.batch_size, order.size() - b));
      std::vector<double> target;
      for (auto i : idx) target.push_back(train_y[i] == 1 ? 1.0 : 0.0);
      Tape tape;
      TapeScope scope(tape);
      const auto p = clamp(sigmoid(logits(rows(train_x, idx))), kProbFloor,
                           1.0 - kProbFloor);
      const auto y = Tensor::from(p.shape(), target);
      const auto one_minus_y = add_scalar(scale(y, -1.0), 1.0);
      const auto one_minus_p = add_scalar(scale(p, -1.0), 1.0);
      const auto loss = scale(
          mean(add(mul(y, log(p)), mul(one_minus_y, log(one_minus_p)))), -1.0);
      zero_grad(params);
      tape.backward(loss);
      adam_step(params, adam);
    }
  }

  std::vector<std::size_t> all(test_x.size());
  std::iota(all.begin(), all.end(), 0);
  const auto scores = logits(rows(test_x, all));
  std::vector<ScoredLabel> scored;
  for (std::size_t i = 0; i < all.size(); ++i) {
    scored.push_back({scores.data()[i], test_y[i]});
  }
  return auroc(scored);
}

auto evaluate_node_classification(const SeanModel& model,
                                  const TemporalGraph& graph,
                                  const Splits& splits,
                                  const NodeClassConfig& config) -> double {
  if (!graph.has_labels()) {
    throw std::invalid_argument(
        "node classification: dataset carries no dynamic labels");
  }
  Embedder embedder(graph, model);
  auto collect = [&](EventRange range, std::vector<std::vector<double>>& x,
                     std::vector<int>& y) {
    std::size_t in_chunk = 0;
    for (std::size_t i = range.begin; i < range.end; ++i) {
      const auto& ev = graph.event(i);
      if (!ev.label) continue;
      const auto z = embedder.embed(ev.src, ev.t).z;
      x.emplace_back(z.data().begin(), z.data().end());
      y.push_back(*ev.label == 1 ? 1 : 0);
      if (++in_chunk == 200) {
        embedder.clear_cache();
        in_chunk = 0;
      }
    }
  };
  std::vector<std::vector<double>> train_x, test_x;
  std::vector<int> train_y, test_y;
  collect(splits.train, train_x, train_y);
  collect(splits.test, test_x, test_y);
  return fit_label_decoder(train_x, train_y, test_x, test_y, config);
}

}  // namespace sean
