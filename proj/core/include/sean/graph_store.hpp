#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sean {

using NodeId = std::uint32_t;

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  auto line() const -> std::size_t { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Event {
  NodeId src = 0;
  NodeId dst = 0;
  double t = 0.0;
  std::vector<double> edge_feat;
  // Dynamic label attached to `src` at `t`, when the dataset has one.
  std::optional<int> label;

  auto operator==(const Event&) const -> bool = default;
};

struct AdjacencyEntry {
  std::size_t event = 0;
  NodeId other = 0;
  double t = 0.0;
};

struct NeighborEntry {
  NodeId neighbor = 0;
  std::size_t event = 0;
  double event_t = 0.0;
  // Points into the owning graph's storage.
  std::span<const double> edge_feat;
};

// Most recent history of `target` strictly before `query_t`, newest first.
struct NeighborView {
  NodeId target = 0;
  double query_t = 0.0;
  std::vector<NeighborEntry> entries;
  // Interactions between target and entries[j].neighbor before query_t.
  std::vector<std::size_t> freq;
  // Interactions of entries[j].neighbor with anyone before query_t.
  std::vector<std::size_t> neigh_degree;

  auto size() const -> std::size_t { return entries.size(); }
  auto empty() const -> bool { return entries.empty(); }
};

struct EventRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  auto size() const -> std::size_t { return end - begin; }
  auto empty() const -> bool { return begin == end; }
  auto operator==(const EventRange&) const -> bool = default;
};

struct SplitSpec {
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;

  void validate() const;
};

struct Splits {
  EventRange train;
  EventRange val;
  EventRange test;
};

// Immutable chronological event store with per-node, time-sorted adjacency.
// Safe for concurrent reads once built.
class TemporalGraph {
 public:
  TemporalGraph() = default;

  // Stable-sorts `events` by time and indexes them. `first_item` marks a
  // bipartite graph whose destinations are the ids in [first_item, num_nodes).
  static auto build(std::vector<Event> events, std::size_t num_nodes,
                    std::size_t feat_dim,
                    std::optional<NodeId> first_item = std::nullopt)
      -> TemporalGraph;

  auto events() const -> std::span<const Event> { return events_; }
  auto event(std::size_t i) const -> const Event& { return events_.at(i); }
  auto num_events() const -> std::size_t { return events_.size(); }
  auto num_nodes() const -> std::size_t { return num_nodes_; }
  auto feat_dim() const -> std::size_t { return feat_dim_; }
  auto first_item() const -> std::optional<NodeId> { return first_item_; }
  auto bipartite() const -> bool { return first_item_.has_value(); }
  auto max_time() const -> double;
  // True when at least one event carries a positive dynamic label.
  auto has_labels() const -> bool;

  auto adjacency(NodeId node) const -> std::span<const AdjacencyEntry>;
  auto temporal_degree(NodeId node, double t) const -> std::size_t;
  auto pair_count(NodeId a, NodeId b, double t) const -> std::size_t;
  auto neighbor_view(NodeId node, double t, std::size_t sample_size) const
      -> NeighborView;

 private:
  void check_node(NodeId node, const char* op) const;
  static auto pair_key(NodeId a, NodeId b) -> std::uint64_t;

  std::vector<Event> events_;
  std::size_t num_nodes_ = 0;
  std::size_t feat_dim_ = 0;
  std::optional<NodeId> first_item_;
  std::vector<std::vector<AdjacencyEntry>> adjacency_;
  std::unordered_map<std::uint64_t, std::vector<double>> pair_times_;
};

struct CsvOptions {
  // JODIE layout: user ids and item ids share no space; items are shifted
  // past the largest user id. When false, columns 1-2 are plain node ids.
  bool bipartite = true;
};

auto load_jodie_csv(const std::filesystem::path& path, CsvOptions options = {})
    -> TemporalGraph;
// Writes the JODIE layout (header + `user,item,timestamp,state_label,f...`).
void write_jodie_csv(const TemporalGraph& g, const std::filesystem::path& path);

auto chronological_split(const TemporalGraph& g, const SplitSpec& spec)
    -> Splits;

struct SynthConfig {
  std::size_t num_nodes = 500;
  std::size_t num_events = 20000;
  std::size_t feat_dim = 16;
  double recur_prob = 0.8;
  std::uint64_t seed = 0;
  // Standard deviation of the noise added to each item's feature signature.
  double feat_noise = 0.5;
};

// Bipartite user-item stream with planted recurrence. Users are
// [0, num_nodes/2), items the rest; timestamps are 1..num_events. Each edge
// feature is the destination item's fixed random +/-1 signature plus noise.
auto generate_synthetic(const SynthConfig& cfg) -> TemporalGraph;

struct PerturbedGraph {
  TemporalGraph graph;
  std::vector<std::size_t> perturbed_events;  // sorted
};

// Replaces the destination of floor(rate * |range|) events drawn without
// replacement from `range` (the whole stream by default). New destinations
// are uniform over the destination candidates minus the source.
auto perturb_links(const TemporalGraph& g, double rate, std::uint64_t seed,
                   std::optional<EventRange> range = std::nullopt)
    -> PerturbedGraph;

struct InductiveMask {
  TemporalGraph visible;
  Splits visible_splits;
  std::vector<NodeId> unseen;  // sorted

  auto is_unseen(NodeId node) const -> bool;
};

// Holds out floor(fraction * |V|) nodes and drops every training-split event
// touching them.
auto mask_inductive_nodes(const TemporalGraph& g, const Splits& splits,
                          double fraction, std::uint64_t seed) -> InductiveMask;

// Destination candidates for negative sampling and perturbation: items for a
// bipartite graph, every node otherwise.
auto destination_candidates(const TemporalGraph& g)
    -> std::pair<NodeId, NodeId>;

}  // namespace sean
