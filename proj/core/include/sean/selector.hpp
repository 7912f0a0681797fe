#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sean/diff/nn.hpp"
#include "sean/diff/tensor.hpp"

// Representative neighbour selection: semantic attention, occurrence-aware
// attention, score fusion, the refined neighbourhood message and the
// neighbour diversity penalty.
namespace sean::selector {

using diff::Tensor;

// Query encoder acts on the target's d-dim representation; key and value
// encoders act on neighbour rows of width `row_dim` (d in the plain form,
// 3d when rows carry [h | edge | time]).
struct AttentionParams {
  diff::Linear query;
  diff::Linear key;
  diff::Linear value;
  std::size_t heads = 1;

  static auto init(std::size_t dim, std::size_t row_dim, std::size_t heads,
                   diff::Rng& rng) -> AttentionParams;
  auto dim() const -> std::size_t { return query.out_features(); }
  void collect(const std::string& prefix,
               std::vector<diff::NamedTensor>& out) const;
};

// Two-layer MLP 1 -> d -> d over the normalised occurrence frequency plus the
// 3d reshaping vector that turns [r | e | phi] into a scalar score. The
// reshaping vector is shared by all nodes of a layer.
struct OccurrenceParams {
  diff::Linear hidden;
  diff::Linear output;
  Tensor reshape;  // (3d)

  static auto init(std::size_t dim, diff::Rng& rng) -> OccurrenceParams;
  void collect(const std::string& prefix,
               std::vector<diff::NamedTensor>& out) const;
};

// Maps F-dim edge features to width d: zero padding when F <= d, a learned
// projection when F > d.
struct EdgeAdapter {
  std::size_t feat_dim = 0;
  std::size_t dim = 0;
  std::optional<diff::Linear> projection;

  static auto init(std::size_t feat_dim, std::size_t dim, diff::Rng& rng)
      -> EdgeAdapter;
  // rows: one F-vector per neighbour -> (N, d)
  auto apply(std::span<const std::span<const double>> rows) const -> Tensor;
  void collect(const std::string& prefix,
               std::vector<diff::NamedTensor>& out) const;
};

struct ScoredNeighborhood {
  Tensor semantic;    // a, (N)
  Tensor occurrence;  // a~, (N); undefined when occurrence attention is off
  Tensor combined;    // a^, (N)
  Tensor messages;    // V, (N, d)
  Tensor refined;     // h~, (d)
};

// a_j = mean over heads of <q_h, k_jh> / sqrt(d / H).
auto semantic_attention_scores(const Tensor& h_target,
                               const Tensor& h_neighbors,
                               const AttentionParams& p) -> Tensor;

// f^[j] = freq[j] / degree[j]; degree entries must be >= 1.
auto normalize_occurrence(std::span<const std::size_t> freq,
                          std::span<const std::size_t> degree)
    -> std::vector<double>;

// (N) -> (N, d)
auto occurrence_encoding(const Tensor& normalized_freq,
                         const OccurrenceParams& p) -> Tensor;

// a~_j = tanh(w . [r_j | e_j | phi_j]) with all three blocks (N, d).
auto occurrence_attention_scores(const Tensor& encoding,
                                 const Tensor& edge_block,
                                 const Tensor& time_block,
                                 const OccurrenceParams& p) -> Tensor;

// Convenience form encoding the intervals t - t_j itself. Negative
// intervals throw std::invalid_argument.
auto occurrence_attention_scores(const Tensor& encoding,
                                 const Tensor& edge_block,
                                 std::span<const double> deltas,
                                 const OccurrenceParams& p,
                                 const diff::TimeEncoderParams& time)
    -> Tensor;

auto combine_scores(const Tensor& semantic, const Tensor& occurrence)
    -> Tensor;

// h~ = softmax(scores) . f_v(rows)
auto aggregate_neighborhood_info(const Tensor& scores, const Tensor& rows,
                                 const AttentionParams& p) -> Tensor;

// Zeroes scores below tau. The mask is a constant for the backward pass.
auto filter_scores(const Tensor& scores, double tau) -> Tensor;

// scores_by_layer[k] holds one combined-score vector per batch node for
// layer k. Returns -(1/K) sum_k mean_i mean_j(filtered_ij * mean(filtered_i)).
// Throws std::invalid_argument when no layer holds any node.
auto ndp_loss(const std::vector<std::vector<Tensor>>& scores_by_layer,
              double tau) -> Tensor;

}  // namespace sean::selector
