#include "sean/selector.hpp"

#include <cmath>
#include <stdexcept>

#include "sean/diff/ops.hpp"

namespace sean::selector {

using namespace sean::diff;

auto AttentionParams::init(std::size_t dim, std::size_t row_dim,
                           std::size_t heads, Rng& rng) -> AttentionParams {
  if (heads == 0 || dim % heads != 0) {
    throw std::invalid_argument("attention: dim " + std::to_string(dim) +
                                " not divisible by heads " +
                                std::to_string(heads));
  }
  AttentionParams p;
  p.query = Linear::init(dim, dim, rng);
  p.key = Linear::init(row_dim, dim, rng);
  p.value = Linear::init(row_dim, dim, rng);
  p.heads = heads;
  return p;
}

void AttentionParams::collect(const std::string& prefix,
                              std::vector<NamedTensor>& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
}

auto OccurrenceParams::init(std::size_t dim, Rng& rng) -> OccurrenceParams {
  OccurrenceParams p;
  p.hidden = Linear::init(1, dim, rng);
  p.output = Linear::init(dim, dim, rng);
  p.reshape = uniform_parameter({3 * dim}, 1.0 / std::sqrt(3.0 * dim), rng);
  return p;
}

void OccurrenceParams::collect(const std::string& prefix,
                               std::vector<NamedTensor>& out) const {
  hidden.collect(prefix + ".hidden", out);
  output.collect(prefix + ".output", out);
  out.push_back({prefix + ".reshape", reshape});
}

auto EdgeAdapter::init(std::size_t feat_dim, std::size_t dim, Rng& rng)
    -> EdgeAdapter {
  EdgeAdapter a;
  a.feat_dim = feat_dim;
  a.dim = dim;
  if (feat_dim > dim) {
    a.projection = Linear::init(feat_dim, dim, rng);
  }
  return a;
}

auto EdgeAdapter::apply(std::span<const std::span<const double>> rows) const
    -> Tensor {
  const std::size_t n = rows.size();
  for (const auto& r : rows) {
    if (r.size() != feat_dim) {
      throw ShapeError("edge adapter: feature of width " +
                       std::to_string(r.size()) + ", expected " +
                       std::to_string(feat_dim));
    }
  }
  if (projection) {
    std::vector<double> raw;
    raw.reserve(n * feat_dim);
    for (const auto& r : rows) raw.insert(raw.end(), r.begin(), r.end());
    return projection->forward(Tensor::from({n, feat_dim}, std::move(raw)));
  }
  std::vector<double> padded(n * dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(rows[i].begin(), rows[i].end(), padded.begin() + i * dim);
  }
  return Tensor::from({n, dim}, std::move(padded));
}

void EdgeAdapter::collect(const std::string& prefix,
                          std::vector<NamedTensor>& out) const {
  if (projection) projection->collect(prefix + ".projection", out);
}

auto semantic_attention_scores(const Tensor& h_target,
                               const Tensor& h_neighbors,
                               const AttentionParams& p) -> Tensor {
  if (h_neighbors.rank() != 2 || h_neighbors.dim(0) == 0) {
    throw ShapeError("semantic_attention_scores: need (N>=1, m) neighbours, got " +
                     shape_str(h_neighbors.shape()));
  }
  const auto q = p.query.forward(h_target);
  const auto k = p.key.forward(h_neighbors);
  // Averaging the H per-head dot products, each scaled by 1/sqrt(d/H), is the
  // full dot product scaled by 1/(H sqrt(d/H)).
  const double d = static_cast<double>(p.dim());
  const double h = static_cast<double>(p.heads);
  return scale(matmul(k, q), 1.0 / (h * std::sqrt(d / h)));
}

auto normalize_occurrence(std::span<const std::size_t> freq,
                          std::span<const std::size_t> degree)
    -> std::vector<double> {
  if (freq.size() != degree.size()) {
    throw std::invalid_argument("normalize_occurrence: length mismatch");
  }
  std::vector<double> out(freq.size());
  for (std::size_t j = 0; j < freq.size(); ++j) {
    if (degree[j] == 0) {
      throw std::invalid_argument(
          "normalize_occurrence: zero temporal degree at entry " +
          std::to_string(j));
    }
    out[j] = static_cast<double>(freq[j]) / static_cast<double>(degree[j]);
  }
  return out;
}

auto occurrence_encoding(const Tensor& normalized_freq,
                         const OccurrenceParams& p) -> Tensor {
  if (normalized_freq.rank() != 1 || normalized_freq.numel() == 0) {
    throw ShapeError("occurrence_encoding: need (N>=1), got " +
                     shape_str(normalized_freq.shape()));
  }
  const auto column = reshape(normalized_freq, {normalized_freq.numel(), 1});
  return p.output.forward(relu(p.hidden.forward(column)));
}

auto occurrence_attention_scores(const Tensor& encoding,
                                 const Tensor& edge_block,
                                 const Tensor& time_block,
                                 const OccurrenceParams& p) -> Tensor {
  const Tensor parts[] = {encoding, edge_block, time_block};
  return tanh(matmul(concat(parts), p.reshape));
}

auto occurrence_attention_scores(const Tensor& encoding,
                                 const Tensor& edge_block,
                                 std::span<const double> deltas,
                                 const OccurrenceParams& p,
                                 const TimeEncoderParams& time) -> Tensor {
  return occurrence_attention_scores(encoding, edge_block,
                                     time_encode(deltas, time), p);
}

auto combine_scores(const Tensor& semantic, const Tensor& occurrence)
    -> Tensor {
  return add(semantic, occurrence);
}

auto aggregate_neighborhood_info(const Tensor& scores, const Tensor& rows,
                                 const AttentionParams& p) -> Tensor {
  return matmul(softmax(scores), p.value.forward(rows));
}

auto filter_scores(const Tensor& scores, double tau) -> Tensor {
  std::vector<double> mask(scores.numel());
  for (std::size_t j = 0; j < mask.size(); ++j) {
    mask[j] = scores.data()[j] >= tau ? 1.0 : 0.0;
  }
  return mul(scores, Tensor::from(scores.shape(), std::move(mask)));
}

auto ndp_loss(const std::vector<std::vector<Tensor>>& scores_by_layer,
              double tau) -> Tensor {
  if (!(tau >= 0.0) || tau > 1.0) {
    throw std::invalid_argument("ndp_loss: tau must be in [0, 1]");
  }
  if (scores_by_layer.empty()) {
    throw std::invalid_argument("ndp_loss: no layers");
  }
  bool any = false;
  Tensor total = Tensor::scalar(0.0);
  for (const auto& layer : scores_by_layer) {
    if (layer.empty()) continue;
    std::vector<Tensor> similarity;
    similarity.reserve(layer.size());
    for (const auto& scores : layer) {
      const auto filtered = filter_scores(scores, tau);
      const auto avg = mean(filtered);
      similarity.push_back(mean(mul_scalar(filtered, avg)));
    }
    total = add(total, mean(concat(similarity)));
    any = true;
  }
  if (!any) {
    throw std::invalid_argument("ndp_loss: empty batch");
  }
  return scale(total, -1.0 / static_cast<double>(scores_by_layer.size()));
}

}  // namespace sean::selector
