#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sean/diff/nn.hpp"
#include "sean/graph_store.hpp"
#include "sean/selector.hpp"

namespace sean {

using diff::Tensor;

enum class AggregatorMode { kBaselineMlp, kSeanLstm };

// How the occurrence count of neighbour j is normalised: by j's own temporal
// degree (default) or by the target's degree broadcast to every entry.
enum class DegreeMode { kNeighbor, kTarget };

// Shape of the pruning-state projection: a 1 x d row producing the scalar
// increment directly, or a d x d matrix whose sigmoid outputs are averaged.
enum class PruneProjection { kVector, kMatrixMean };

// Component switches. All true is the full model; each false removes one
// component (the ablation variants).
struct Components {
  bool rns = true;  // occurrence-aware attention (a~ = 0 when off)
  bool ta = true;   // LSTM aggregation; off means the MLP aggregator
  bool ndp = true;  // diversity penalty in the loss
  bool apm = true;  // adaptive pruning; off means u = 1 everywhere
  bool om = true;   // outdated decay; off means g = 1

  auto operator==(const Components&) const -> bool = default;
};

struct ModelConfig {
  std::size_t dim = 32;
  std::size_t heads = 2;
  std::size_t layers = 1;
  std::size_t feat_dim = 0;
  std::size_t sample_size = 10;
  AggregatorMode mode = AggregatorMode::kSeanLstm;
  Components components;
  DegreeMode degree_mode = DegreeMode::kNeighbor;
  PruneProjection prune_projection = PruneProjection::kVector;
  bool ndp_filter_in_aggregation = false;
  double tau = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  // Baseline mode strips every component; otherwise `components` as given.
  auto effective_components() const -> Components;
};

struct LayerParams {
  selector::AttentionParams attention;
  selector::OccurrenceParams occurrence;
  selector::EdgeAdapter edge;
  diff::TimeEncoderParams time;
  diff::LstmParams lstm;
  diff::Linear mlp_hidden;  // 2d -> d
  diff::Linear mlp_output;  // d -> d
  diff::Linear prune;       // d -> 1 (or d -> d for kMatrixMean)
  diff::Linear decay;       // d -> d

  void collect(const std::string& prefix,
               std::vector<diff::NamedTensor>& out) const;
};

// Two-layer MLP over [z_i | z_j] producing a link logit.
struct LinkDecoder {
  diff::Linear hidden;  // 2d -> d
  diff::Linear output;  // d -> 1

  static auto init(std::size_t dim, diff::Rng& rng) -> LinkDecoder;
  void collect(const std::string& prefix,
               std::vector<diff::NamedTensor>& out) const;
};

// Every learnable tensor of the K-layer stack plus the link decoder. The
// parameter set is identical across modes so checkpoints are interchangeable.
class SeanModel {
 public:
  explicit SeanModel(ModelConfig config);

  auto config() const -> const ModelConfig& { return config_; }
  auto layer(std::size_t k) const -> const LayerParams& { return layers_.at(k); }
  auto decoder() const -> const LinkDecoder& { return decoder_; }

  // Largest training-split interval; normalises decay and time encoding.
  auto t_max() const -> double { return t_max_; }
  void set_t_max(double t_max);

  auto named_parameters() const -> std::vector<diff::NamedTensor>;
  auto parameters() const -> std::vector<Tensor>;

  // Parameters plus the frozen t_max, for checkpointing.
  auto state() const -> std::vector<diff::NamedTensor>;
  void load_state(const std::vector<diff::NamedTensor>& records);

 private:
  ModelConfig config_;
  std::vector<LayerParams> layers_;
  LinkDecoder decoder_;
  double t_max_ = 1.0;
  Tensor t_max_record_;
};

namespace aggregator {

// MLP over [h_prev | h_tilde]: W2 relu(W1 [h_prev | h_tilde] + b1) + b2.
auto mlp_aggregate(const Tensor& h_prev, const Tensor& h_tilde,
                   const LayerParams& p) -> Tensor;

// exp(-2 dt / t_max)
auto decay_factor(double delta_t, double t_max) -> double;

struct CellDecomposition {
  Tensor c;
  Tensor c_short;
  Tensor c_long;
  Tensor c_star;
};

auto decompose_cell_state(const Tensor& c, double delta_t, double t_max,
                          const diff::Linear& decay) -> CellDecomposition;
auto decay_cell_state(const Tensor& c, double delta_t, double t_max,
                      const diff::Linear& decay) -> Tensor;

// Rounds u~ to {0, 1} with a straight-through backward pass.
auto pruning_decision(const Tensor& u_tilde) -> Tensor;

// u h_new + (1 - u) h_prev
auto apply_pruning(const Tensor& u, const Tensor& h_new, const Tensor& h_prev)
    -> Tensor;

// du = sigmoid(W_p h + b_p); u~' = clamp(u du + (1-u)(u~ + max(du, 1-u~)), 0, 1)
auto update_layer_state(const Tensor& u_tilde, const Tensor& u,
                        const Tensor& h, const diff::Linear& prune,
                        PruneProjection projection) -> Tensor;

struct GateOptions {
  bool prune = true;
  bool decay = true;
  // Treat the rounded gate as a constant (finite-difference checks).
  bool detach_gate = false;
  // Override the rounded gate value.
  std::optional<double> force_gate;
  PruneProjection projection = PruneProjection::kVector;
};

struct LayerStep {
  Tensor h;
  Tensor c;
  Tensor u_tilde_next;
  Tensor u;
};

// One full temporal-aware layer: decay c_in, run the LSTM on
// (h_tilde, h_prev, c_star), gate the result against h_prev and advance the
// pruning state. A pruned layer carries (h_prev, c_star) through unchanged.
auto temporal_aggregate(const Tensor& h_prev, const Tensor& h_tilde,
                        const Tensor& c_in, const Tensor& u_tilde,
                        double delta_t, double t_max, const LayerParams& p,
                        const GateOptions& gate = {}) -> LayerStep;

}  // namespace aggregator

struct PruneTrace {
  NodeId node = 0;
  double t = 0.0;
  std::size_t layer = 0;  // 1-based
  double u_tilde = 0.0;
  double u = 0.0;
};

void write_prune_trace(std::ostream& out, const std::vector<PruneTrace>& trace);

struct LayerRecord {
  // Combined scores a^ and their softmax; undefined for an empty view.
  Tensor scores;
  Tensor weights;
  double u_tilde = 1.0;
  double u = 1.0;
  std::size_t neighbors = 0;
};

struct Embedding {
  Tensor z;
  std::vector<LayerRecord> layers;
};

struct EmbedOptions {
  bool detach_gate = false;
  std::optional<double> force_gate;
  // Verify that every event read is strictly earlier than its query time.
  bool audit_time = false;
  std::vector<PruneTrace>* trace = nullptr;
};

// Recursive K-layer neighbourhood encoder. Neighbour representations at
// depth k-1 are taken at the neighbour's interaction time. Results are
// memoised per (node, time) until clear_cache(); one Embedder belongs to one
// thread.
class Embedder {
 public:
  Embedder(const TemporalGraph& graph, const SeanModel& model,
           EmbedOptions options = {});

  auto embed(NodeId node, double t) -> Embedding;
  auto hidden(NodeId node, double t, std::size_t depth) -> Tensor;
  void clear_cache();

  auto events_read() const -> std::size_t { return events_read_; }

 private:
  struct Chain {
    std::vector<Tensor> h;  // h[0] = input features, h[k] after layer k
    Tensor c;
    Tensor u_tilde;
    std::vector<LayerRecord> records;
    std::optional<NeighborView> view;
  };
  struct Key {
    NodeId node;
    double t;
    auto operator==(const Key&) const -> bool = default;
  };
  struct KeyHash {
    auto operator()(const Key& k) const noexcept -> std::size_t;
  };

  auto chain(NodeId node, double t, std::size_t depth) -> Chain&;
  void advance(Chain& ch, NodeId node, double t);

  const TemporalGraph& graph_;
  const SeanModel& model_;
  EmbedOptions options_;
  Components components_;
  std::unordered_map<Key, Chain, KeyHash> memo_;
  std::size_t events_read_ = 0;
};

// Convenience wrapper over a throwaway Embedder.
auto compute_embedding(const TemporalGraph& graph, const SeanModel& model,
                       NodeId node, double t, EmbedOptions options = {})
    -> Embedding;

}  // namespace sean
