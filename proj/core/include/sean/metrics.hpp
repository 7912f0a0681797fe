#pragma once

#include <span>
#include <stdexcept>

namespace sean {

struct ScoredLabel {
  double score = 0.0;
  int label = 0;  // 0 or 1
};

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Mean over positives of the precision at each positive's rank, ranking by
// descending score. Equal scores keep their input order.
auto average_precision(std::span<const ScoredLabel> scored) -> double;

// Probability that a random positive outranks a random negative; ties count
// one half.
auto auroc(std::span<const ScoredLabel> scored) -> double;

}  // namespace sean
