#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sean/training.hpp"

namespace sean {

auto mode_name(AggregatorMode mode) -> std::string;
// Accepts "sean" and "baseline".
auto parse_mode(const std::string& name) -> AggregatorMode;

struct RunResult {
  std::unique_ptr<SeanModel> model;
  std::vector<EpochStats> epochs;
  std::vector<double> val_ap;  // one per epoch when validation is requested
  EvalReport test;
  double runtime_s = 0.0;
};

struct RunOptions {
  bool validate_each_epoch = false;
  // Called after every epoch with the stats and the validation AP (if any).
  std::function<void(const EpochStats&, std::optional<double>)> on_epoch;
  // Test-split evaluation options; transductive with the config seed when unset.
  std::optional<EvalOptions> test_options;
};

// Builds a fresh model from `config`, fixes t_max on the training split,
// trains for config.epochs epochs and evaluates transductive AP on the test
// split.
auto fit_and_evaluate(const TemporalGraph& graph, const Splits& splits,
                      const TrainConfig& config, const RunOptions& options = {})
    -> RunResult;

struct SweepRow {
  double param = 0.0;
  AggregatorMode mode = AggregatorMode::kSeanLstm;
  double ap = 0.0;
  double runtime_s = 0.0;
};

struct AttentionSample {
  AggregatorMode mode = AggregatorMode::kSeanLstm;
  NodeId node = 0;
  std::size_t event = 0;
  double weight = 0.0;
};

struct NoiseSweepResult {
  std::vector<SweepRow> rows;  // rate-major, then mode
  // Softmax weights on perturbed neighbour entries at the largest rate.
  std::vector<AttentionSample> perturbed_weights;
};

struct SweepOptions {
  std::vector<AggregatorMode> modes = {AggregatorMode::kBaselineMlp,
                                       AggregatorMode::kSeanLstm};
  std::size_t jobs = 1;
  std::size_t attention_nodes = 50;
};

// For every rate, perturbs only the training split, trains and evaluates on
// the (clean) test events. Cells run on up to options.jobs threads; results
// do not depend on the thread count.
auto noise_robustness_sweep(const TemporalGraph& graph, const Splits& splits,
                            const TrainConfig& config,
                            const std::vector<double>& rates,
                            const SweepOptions& options = {})
    -> NoiseSweepResult;

// AP per aggregation depth and mode with config.sample_size as given.
auto layer_sweep(const TemporalGraph& graph, const Splits& splits,
                 const TrainConfig& config, const std::vector<std::size_t>& ks,
                 const SweepOptions& options = {}) -> std::vector<SweepRow>;

struct GradCheckReport {
  std::vector<double> per_seed;  // max relative error per seed
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coordinates = 0;
  double runtime_s = 0.0;
};

// Finite-difference check of the full two-layer SEAN stack (attention,
// occurrence scores, decay, LSTM, pruning update) and the link decoder on
// small random graphs. The rounded pruning gate is held constant.
auto gradcheck_sean(std::size_t seeds, double eps, std::uint64_t base_seed = 1)
    -> GradCheckReport;

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_attention_csv(std::ostream& out,
                         const std::vector<AttentionSample>& samples);

}  // namespace sean
