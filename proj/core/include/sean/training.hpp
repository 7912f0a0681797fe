#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sean/aggregator.hpp"
#include "sean/diff/nn.hpp"
#include "sean/diff/optim.hpp"
#include "sean/graph_store.hpp"
#include "sean/metrics.hpp"

namespace sean {

struct TrainConfig {
  std::size_t batch_size = 200;
  double lr = 1e-4;
  std::size_t layers = 1;
  std::size_t heads = 2;
  double tau = 0.1;
  double lambda = 0.1;
  std::size_t sample_size = 10;
  std::size_t dim = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  AggregatorMode mode = AggregatorMode::kSeanLstm;
  Components components;
  DegreeMode degree_mode = DegreeMode::kNeighbor;
  PruneProjection prune_projection = PruneProjection::kVector;
  bool ndp_filter_in_aggregation = false;

  void validate() const;
  auto model_config(std::size_t feat_dim) const -> ModelConfig;
  // lambda, or 0 when the diversity penalty is disabled.
  auto effective_lambda() const -> double;
};

// Seeded uniform draws over a contiguous candidate range [first, last) that
// never return the paired positive.
class NegativeSampler {
 public:
  NegativeSampler(NodeId first, NodeId last, std::uint64_t seed);
  static auto for_graph(const TemporalGraph& g, std::uint64_t seed)
      -> NegativeSampler;

  auto sample(NodeId positive) -> NodeId;

 private:
  NodeId first_;
  NodeId last_;
  diff::Rng rng_;
};

// sigmoid(MLP([z_i | z_j])), shape (1).
auto link_probability(const Tensor& z_i, const Tensor& z_j,
                      const LinkDecoder& decoder) -> Tensor;

struct ProbabilityPair {
  Tensor positive;
  Tensor negative;
};

// -sum [log p_pos + log(1 - p_neg)], probabilities clamped to
// [1e-12, 1 - 1e-12].
auto link_loss(std::span<const ProbabilityPair> pairs) -> Tensor;

// l_link + lambda * l_ndp
auto total_loss(const Tensor& l_link, const Tensor& l_ndp, double lambda)
    -> Tensor;

// Largest elapsed interval seen by any training-event endpoint's view.
auto compute_t_max(const TemporalGraph& g, EventRange range,
                   std::size_t sample_size) -> double;

struct BatchStats {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
  double l_link = 0.0;
  double l_ndp = 0.0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean over batches
  double l_link = 0.0;
  double l_ndp = 0.0;
  double seconds = 0.0;
  std::vector<BatchStats> batches;
};

// Owns the optimiser and negative-sampling state for one model. Training is
// single-threaded and deterministic given the config seed.
class Trainer {
 public:
  Trainer(SeanModel& model, const TemporalGraph& graph, TrainConfig config);

  auto train_epoch(EventRange range) -> EpochStats;
  auto epochs_done() const -> std::size_t { return epochs_done_; }

 private:
  SeanModel& model_;
  const TemporalGraph& graph_;
  TrainConfig config_;
  std::vector<Tensor> params_;
  diff::AdamState adam_;
  NegativeSampler sampler_;
  std::size_t epochs_done_ = 0;
};

enum class Setting { kTransductive, kInductive };

auto setting_name(Setting s) -> std::string;

struct EvalReport {
  Setting setting = Setting::kTransductive;
  double ap = 0.0;
  std::optional<double> auroc;
  std::size_t pairs = 0;
  double runtime_s = 0.0;
};

struct EvalOptions {
  Setting setting = Setting::kTransductive;
  // Required for the inductive setting; `graph` must then be mask->visible.
  const InductiveMask* mask = nullptr;
  std::uint64_t seed = 0;
  std::size_t chunk = 200;
  // Receives the pruning trace of every embedding computed.
  std::vector<PruneTrace>* trace = nullptr;
};

// Scores every event of `range` and one sampled negative per event.
auto score_link_pairs(const SeanModel& model, const TemporalGraph& graph,
                      EventRange range, const EvalOptions& options)
    -> std::vector<ScoredLabel>;

auto evaluate_link_prediction(const SeanModel& model,
                              const TemporalGraph& graph, EventRange range,
                              const EvalOptions& options) -> EvalReport;

struct NodeClassConfig {
  std::size_t hidden = 32;
  std::size_t epochs = 100;
  std::size_t batch_size = 200;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

// Trains a two-layer MLP decoder on (x, y) rows and returns the AUROC of its
// predictions on the test rows.
auto fit_label_decoder(const std::vector<std::vector<double>>& train_x,
                       const std::vector<int>& train_y,
                       const std::vector<std::vector<double>>& test_x,
                       const std::vector<int>& test_y,
                       const NodeClassConfig& config) -> double;

// Frozen source embeddings of labelled train/test events fed to
// fit_label_decoder. Throws std::invalid_argument for unlabelled data.
auto evaluate_node_classification(const SeanModel& model,
                                  const TemporalGraph& graph,
                                  const Splits& splits,
                                  const NodeClassConfig& config) -> double;

}  // namespace sean
