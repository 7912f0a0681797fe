#include "sean/aggregator.hpp"

#include <bit>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sean/diff/checkpoint.hpp"
#include "sean/diff/ops.hpp"

namespace sean {

using namespace sean::diff;

void ModelConfig::validate() const {
  if (dim == 0) throw std::invalid_argument("dim must be >= 1");
  if (heads == 0 || dim % heads != 0) {
    throw std::invalid_argument("dim must be divisible by heads");
  }
  if (layers == 0) throw std::invalid_argument("layers must be >= 1");
  if (sample_size == 0) throw std::invalid_argument("sample_size must be >= 1");
  if (!(tau >= 0.0) || tau > 1.0) {
    throw std::invalid_argument("tau must be in [0, 1]");
  }
}

auto ModelConfig::effective_components() const -> Components {
  if (mode == AggregatorMode::kBaselineMlp) {
    return {false, false, false, false, false};
  }
  return components;
}

void LayerParams::collect(const std::string& prefix,
                          std::vector<NamedTensor>& out) const {
  attention.collect(prefix + ".attention", out);
  occurrence.collect(prefix + ".occurrence", out);
  edge.collect(prefix + ".edge", out);
  time.collect(prefix + ".time", out);
  lstm.collect(prefix + ".lstm", out);
  mlp_hidden.collect(prefix + ".mlp_hidden", out);
  mlp_output.collect(prefix + ".mlp_output", out);
  prune.collect(prefix + ".prune", out);
  decay.collect(prefix + ".decay", out);
}

auto LinkDecoder::init(std::size_t dim, Rng& rng) -> LinkDecoder {
  return {Linear::init(2 * dim, dim, rng), Linear::init(dim, 1, rng)};
}

void LinkDecoder::collect(const std::string& prefix,
                          std::vector<NamedTensor>& out) const {
  hidden.collect(prefix + ".hidden", out);
  output.collect(prefix + ".output", out);
}

SeanModel::SeanModel(ModelConfig config) : config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  const std::size_t d = config_.dim;
  layers_.reserve(config_.layers);
  for (std::size_t k = 0; k < config_.layers; ++k) {
    LayerParams p;
    p.attention = selector::AttentionParams::init(d, 3 * d, config_.heads, rng);
    p.occurrence = selector::OccurrenceParams::init(d, rng);
    p.edge = selector::EdgeAdapter::init(config_.feat_dim, d, rng);
    p.time = TimeEncoderParams::init(d, rng);
    p.lstm = LstmParams::init(d, d, rng);
    p.mlp_hidden = Linear::init(2 * d, d, rng);
    p.mlp_output = Linear::init(d, d, rng);
    p.prune = Linear::init(
        d, config_.prune_projection == PruneProjection::kVector ? 1 : d, rng);
    p.decay = Linear::init(d, d, rng);
    layers_.push_back(std::move(p));
  }
  decoder_ = LinkDecoder::init(d, rng);
  set_t_max(1.0);
}

void SeanModel::set_t_max(double t_max) {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) {
    throw std::invalid_argument("t_max must be positive and finite");
  }
  t_max_ = t_max;
  for (auto& layer : layers_) layer.time.scale = 1.0 / t_max;
}

auto SeanModel::named_parameters() const -> std::vector<NamedTensor> {
  std::vector<NamedTensor> out;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    layers_[k].collect("layer" + std::to_string(k + 1), out);
  }
  decoder_.collect("decoder", out);
  return out;
}

auto SeanModel::parameters() const -> std::vector<Tensor> {
  std::vector<Tensor> out;
  for (auto& named : named_parameters()) out.push_back(named.tensor);
  return out;
}

auto SeanModel::state() const -> std::vector<NamedTensor> {
  auto out = named_parameters();
  out.push_back({"t_max", Tensor::scalar(t_max_)});
  return out;
}

void SeanModel::load_state(const std::vector<NamedTensor>& records) {
  assign_checkpoint(records, named_parameters());
  for (const auto& r : records) {
    if (r.name == "t_max") {
      set_t_max(r.tensor.item());
      return;
    }
  }
  throw CheckpointError("checkpoint: missing record t_max");
}

namespace aggregator {

auto mlp_aggregate(const Tensor& h_prev, const Tensor& h_tilde,
                   const LayerParams& p) -> Tensor {
  if (h_prev.shape() != h_tilde.shape() || h_prev.rank() != 1) {
    throw ShapeError("mlp_aggregate: shape mismatch " +
                     shape_str(h_prev.shape()) + " vs " +
                     shape_str(h_tilde.shape()));
  }
  const Tensor parts[] = {h_prev, h_tilde};
  return p.mlp_output.forward(relu(p.mlp_hidden.forward(concat(parts))));
}

auto decay_factor(double delta_t, double t_max) -> double {
  if (!(t_max > 0.0)) {
    throw std::invalid_argument("decay_factor: t_max must be > 0");
  }
  if (!(delta_t >= 0.0)) {
    throw std::invalid_argument("decay_factor: negative interval");
  }
  return std::exp(-2.0 * delta_t / t_max);
}

auto decompose_cell_state(const Tensor& c, double delta_t, double t_max,
                          const Linear& decay) -> CellDecomposition {
  const double g = decay_factor(delta_t, t_max);
  CellDecomposition out;
  out.c = c;
  out.c_short = tanh(decay.forward(c));
  out.c_long = sub(c, out.c_short);
  out.c_star = add(out.c_long, scale(out.c_short, g));
  return out;
}

auto decay_cell_state(const Tensor& c, double delta_t, double t_max,
                      const Linear& decay) -> Tensor {
  return decompose_cell_state(c, delta_t, t_max, decay).c_star;
}

auto pruning_decision(const Tensor& u_tilde) -> Tensor {
  return ste_round(u_tilde);
}

auto apply_pruning(const Tensor& u, const Tensor& h_new, const Tensor& h_prev)
    -> Tensor {
  const auto keep = add_scalar(scale(u, -1.0), 1.0);
  return add(mul_scalar(h_new, u), mul_scalar(h_prev, keep));
}

auto update_layer_state(const Tensor& u_tilde, const Tensor& u,
                        const Tensor& h, const Linear& prune,
                        PruneProjection projection) -> Tensor {
  Tensor delta = sigmoid(prune.forward(h));
  if (projection == PruneProjection::kMatrixMean) {
    delta = mean(delta);
  }
  if (delta.numel() != 1) {
    throw ShapeError("update_layer_state: pruning projection must yield a "
                     "scalar, got " + shape_str(delta.shape()));
  }
  delta = reshape(delta, {1});
  const auto keep = add_scalar(scale(u, -1.0), 1.0);
  const auto headroom = add_scalar(scale(u_tilde, -1.0), 1.0);
  const auto accumulated = add(u_tilde, maximum(delta, headroom));
  return clamp(add(mul(u, delta), mul(keep, accumulated)), 0.0, 1.0);
}

auto temporal_aggregate(const Tensor& h_prev, const Tensor& h_tilde,
                        const Tensor& c_in, const Tensor& u_tilde,
                        double delta_t, double t_max, const LayerParams& p,
                        const GateOptions& gate) -> LayerStep {
  const Tensor c_star =
      gate.decay ? decay_cell_state(c_in, delta_t, t_max, p.decay) : c_in;
  auto [h_lstm, c_lstm] = lstm_cell(h_tilde, h_prev, c_star, p.lstm);
  if (!gate.prune) {
    return {std::move(h_lstm), std::move(c_lstm), Tensor::scalar(1.0),
            Tensor::scalar(1.0)};
  }
  Tensor u;
  if (gate.force_gate) {
    u = Tensor::scalar(*gate.force_gate);
  } else if (gate.detach_gate) {
    u = hard_round(u_tilde);
  } else {
    u = pruning_decision(u_tilde);
  }
  LayerStep step;
  step.h = apply_pruning(u, h_lstm, h_prev);
  step.c = apply_pruning(u, c_lstm, c_star);
  step.u_tilde_next =
      update_layer_state(u_tilde, u, step.h, p.prune, gate.projection);
  step.u = std::move(u);
  return step;
}

}  // namespace aggregator

void write_prune_trace(std::ostream& out, const std::vector<PruneTrace>& trace) {
  for (const auto& r : trace) {
    nlohmann::json line = {{"node", r.node},
                           {"t", r.t},
                           {"layer", r.layer},
                           {"u_tilde", r.u_tilde},
                           {"u", static_cast<int>(r.u)}};
    out << line.dump() << '\n';
  }
}

auto Embedder::KeyHash::operator()(const Key& k) const noexcept
    -> std::size_t {
  const auto bits = std::bit_cast<std::uint64_t>(k.t);
  return std::hash<std::uint64_t>{}(bits * 0x9E3779B97F4A7C15ull ^ k.node);
}

Embedder::Embedder(const TemporalGraph& graph, const SeanModel& model,
                   EmbedOptions options)
    : graph_(graph),
      model_(model),
      options_(options),
      components_(model.config().effective_components()) {}

void Embedder::clear_cache() { memo_.clear(); }

auto Embedder::chain(NodeId node, double t, std::size_t depth) -> Chain& {
  // References into an unordered_map survive rehashing, so recursion that
  // inserts other keys cannot invalidate `ch`.
  Chain& ch = memo_[Key{node, t}];
  if (ch.h.empty()) {
    const std::size_t d = model_.config().dim;
    ch.h.push_back(Tensor::zeros({d}));
    ch.c = Tensor::zeros({d});
    ch.u_tilde = Tensor::scalar(1.0);
  }
  while (ch.h.size() <= depth) {
    advance(ch, node, t);
  }
  return ch;
}

auto Embedder::hidden(NodeId node, double t, std::size_t depth) -> Tensor {
  if (depth > model_.config().layers) {
    throw std::out_of_range("Embedder::hidden: depth exceeds layer count");
  }
  return chain(node, t, depth).h[depth];
}

void Embedder::advance(Chain& ch, NodeId node, double t) {
  const auto& cfg = model_.config();
  const std::size_t d = cfg.dim;
  const std::size_t layer = ch.h.size();  // 1-based index of the new layer
  const auto& lp = model_.layer(layer - 1);
  if (!ch.view) {
    ch.view = graph_.neighbor_view(node, t, cfg.sample_size);
    events_read_ += ch.view->size();
    if (options_.audit_time) {
      for (const auto& e : ch.view->entries) {
        if (!(e.event_t < t)) {
          throw std::logic_error("time audit: event at " +
                                 std::to_string(e.event_t) +
                                 " read for query at " + std::to_string(t));
        }
      }
    }
  }
  const NeighborView& view = *ch.view;
  const Tensor h_prev = ch.h.back();

  LayerRecord record;
  record.neighbors = view.size();
  Tensor h_tilde;
  double decay_dt = 0.0;
  if (!view.empty()) {
    const std::size_t n = view.size();
    Tensor h_rows;
    if (layer == 1) {
      h_rows = Tensor::zeros({n, d});
    } else {
      std::vector<Tensor> rows;
      rows.reserve(n);
      for (const auto& e : view.entries) {
        rows.push_back(hidden(e.neighbor, e.event_t, layer - 1));
      }
      h_rows = stack_rows(rows);
    }
    std::vector<std::span<const double>> feats;
    std::vector<double> deltas;
    feats.reserve(n);
    deltas.reserve(n);
    for (const auto& e : view.entries) {
      feats.push_back(e.edge_feat);
      deltas.push_back(t - e.event_t);
    }
    const Tensor edge_block = lp.edge.apply(feats);
    const Tensor time_block = time_encode(deltas, lp.time);
    const Tensor parts[] = {h_rows, edge_block, time_block};
    const Tensor rows = concat(parts);

    Tensor scores = selector::semantic_attention_scores(h_prev, rows, lp.attention);
    if (components_.rns) {
      std::vector<std::size_t> degree = view.neigh_degree;
      if (cfg.degree_mode == DegreeMode::kTarget) {
        degree.assign(n, graph_.temporal_degree(node, t));
      }
      const auto normalized = selector::normalize_occurrence(view.freq, degree);
      const auto encoding =
          selector::occurrence_encoding(Tensor::vector(normalized), lp.occurrence);
      const auto occurrence = selector::occurrence_attention_scores(
          encoding, edge_block, time_block, lp.occurrence);
      scores = selector::combine_scores(scores, occurrence);
    }
    const Tensor agg_scores = cfg.ndp_filter_in_aggregation
                                  ? selector::filter_scores(scores, cfg.tau)
                                  : scores;
    h_tilde = selector::aggregate_neighborhood_info(agg_scores, rows, lp.attention);
    record.scores = scores;
    record.weights = softmax(detach(agg_scores));
    decay_dt = t - view.entries.front().event_t;
  } else {
    h_tilde = Tensor::zeros({d});
  }

  if (components_.ta) {
    aggregator::GateOptions gate;
    gate.prune = components_.apm;
    gate.decay = components_.om;
    gate.detach_gate = options_.detach_gate;
    gate.force_gate = options_.force_gate;
    gate.projection = cfg.prune_projection;
    auto step = aggregator::temporal_aggregate(h_prev, h_tilde, ch.c, ch.u_tilde,
                                               decay_dt, model_.t_max(), lp, gate);
    record.u_tilde = ch.u_tilde.item();
    record.u = step.u.item();
    ch.h.push_back(std::move(step.h));
    ch.c = std::move(step.c);
    ch.u_tilde = std::move(step.u_tilde_next);
  } else {
    ch.h.push_back(aggregator::mlp_aggregate(h_prev, h_tilde, lp));
  }
  ch.records.push_back(std::move(record));
}

auto Embedder::embed(NodeId node, double t) -> Embedding {
  if (!(t > 0.0)) {
    throw std::invalid_argument("embed: query time must be > 0");
  }
  const std::size_t depth = model_.config().layers;
  Chain& ch = chain(node, t, depth);
  Embedding out;
  out.z = ch.h[depth];
  out.layers.assign(ch.records.begin(), ch.records.begin() + depth);
  if (options_.trace != nullptr) {
    for (std::size_t k = 0; k < depth; ++k) {
      options_.trace->push_back(
          {node, t, k + 1, out.layers[k].u_tilde, out.layers[k].u});
    }
  }
  return out;
}

auto compute_embedding(const TemporalGraph& graph, const SeanModel& model,
                       NodeId node, double t, EmbedOptions options)
    -> Embedding {
  Embedder embedder(graph, model, options);
  return embedder.embed(node, t);
}

}  // namespace sean
