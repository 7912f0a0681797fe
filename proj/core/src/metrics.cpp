#include "sean/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace sean {

namespace {

void check_labels(std::span<const ScoredLabel> scored) {
  for (const auto& s : scored) {
    if (s.label != 0 && s.label != 1) {
      throw MetricError("label must be 0 or 1, got " + std::to_string(s.label));
    }
  }
}

}  // namespace

auto average_precision(std::span<const ScoredLabel> scored) -> double {
  check_labels(scored);
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scored[a].score > scored[b].score;
  });
  std::size_t positives = 0;
  double total = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (scored[order[rank]].label == 1) {
      ++positives;
      total += static_cast<double>(positives) / static_cast<double>(rank + 1);
    }
  }
  if (positives == 0) {
    throw MetricError("average_precision: no positive labels");
  }
  return total / static_cast<double>(positives);
}

auto auroc(std::span<const ScoredLabel> scored) -> double {
  check_labels(scored);
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scored[a].score < scored[b].score;
  });
  // Average ranks over tie groups, then Mann-Whitney U.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scored[order[j]].score == scored[order[i]].score) {
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (scored[order[k]].label == 1) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scored.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricError("auroc: need both positive and negative labels");
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

}  // namespace sean
