#include "sean/graph_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string_view>

namespace sean {

void SplitSpec::validate() const {
  if (train_frac < 0 || val_frac < 0 || test_frac < 0) {
    throw ValidationError("split fractions must be non-negative");
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-12) {
    throw ValidationError("split fractions must sum to 1");
  }
}

auto TemporalGraph::build(std::vector<Event> events, std::size_t num_nodes,
                          std::size_t feat_dim,
                          std::optional<NodeId> first_item) -> TemporalGraph {
  if (first_item && *first_item > num_nodes) {
    throw ValidationError("first item id exceeds node count");
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (!(e.t >= 0.0) || !std::isfinite(e.t)) {
      throw ValidationError("event " + std::to_string(i) +
                            ": timestamp must be finite and >= 0");
    }
    if (e.src >= num_nodes || e.dst >= num_nodes) {
      throw ValidationError("event " + std::to_string(i) +
                            ": node id out of range");
    }
    if (e.edge_feat.size() != feat_dim) {
      throw ValidationError("event " + std::to_string(i) + ": edge feature has " +
                            std::to_string(e.edge_feat.size()) +
                            " values, expected " + std::to_string(feat_dim));
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });

  TemporalGraph g;
  g.events_ = std::move(events);
  g.num_nodes_ = num_nodes;
  g.feat_dim_ = feat_dim;
  g.first_item_ = first_item;
  g.adjacency_.resize(num_nodes);
  for (std::size_t i = 0; i < g.events_.size(); ++i) {
    const auto& e = g.events_[i];
    g.adjacency_[e.src].push_back({i, e.dst, e.t});
    g.adjacency_[e.dst].push_back({i, e.src, e.t});
    g.pair_times_[pair_key(e.src, e.dst)].push_back(e.t);
  }
  return g;
}

auto TemporalGraph::max_time() const -> double {
  return events_.empty() ? 0.0 : events_.back().t;
}

auto TemporalGraph::has_labels() const -> bool {
  return std::any_of(events_.begin(), events_.end(), [](const Event& e) {
    return e.label.has_value() && *e.label == 1;
  });
}

void TemporalGraph::check_node(NodeId node, const char* op) const {
  if (node >= num_nodes_) {
    throw std::out_of_range(std::string(op) + ": node " + std::to_string(node) +
                            " out of range (num_nodes=" +
                            std::to_string(num_nodes_) + ")");
  }
}

auto TemporalGraph::pair_key(NodeId a, NodeId b) -> std::uint64_t {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

auto TemporalGraph::adjacency(NodeId node) const
    -> std::span<const AdjacencyEntry> {
  check_node(node, "adjacency");
  return adjacency_[node];
}

auto TemporalGraph::temporal_degree(NodeId node, double t) const
    -> std::size_t {
  check_node(node, "temporal_degree");
  const auto& adj = adjacency_[node];
  auto it = std::lower_bound(
      adj.begin(), adj.end(), t,
      [](const AdjacencyEntry& e, double value) { return e.t < value; });
  return static_cast<std::size_t>(it - adj.begin());
}

auto TemporalGraph::pair_count(NodeId a, NodeId b, double t) const
    -> std::size_t {
  check_node(a, "pair_count");
  check_node(b, "pair_count");
  auto it = pair_times_.find(pair_key(a, b));
  if (it == pair_times_.end()) return 0;
  const auto& times = it->second;
  return static_cast<std::size_t>(
      std::lower_bound(times.begin(), times.end(), t) - times.begin());
}

auto TemporalGraph::neighbor_view(NodeId node, double t,
                                  std::size_t sample_size) const
    -> NeighborView {
  check_node(node, "neighbor_view");
  NeighborView view;
  view.target = node;
  view.query_t = t;
  const auto& adj = adjacency_[node];
  const std::size_t before = temporal_degree(node, t);
  const std::size_t take = std::min(before, sample_size);
  view.entries.reserve(take);
  view.freq.reserve(take);
  view.neigh_degree.reserve(take);
  for (std::size_t k = 0; k < take; ++k) {
    const auto& a = adj[before - 1 - k];
    view.entries.push_back(
        {a.other, a.event, a.t, std::span<const double>(events_[a.event].edge_feat)});
    view.freq.push_back(pair_count(node, a.other, t));
    view.neigh_degree.push_back(temporal_degree(a.other, t));
  }
  return view;
}

namespace {

auto trim(std::string_view s) -> std::string_view {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

auto split_csv(std::string_view line) -> std::vector<std::string_view> {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

auto parse_double(std::string_view s, std::size_t line, const char* what)
    -> double {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) {
    throw ParseError(line, std::string("non-numeric ") + what + " '" +
                               std::string(s) + "'");
  }
  return v;
}

auto parse_id(std::string_view s, std::size_t line, const char* what)
    -> std::uint64_t {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) {
    // Accept integral values written as floats ("3.0").
    const double d = parse_double(s, line, what);
    if (d < 0 || d != std::floor(d) || d > 4e9) {
      throw ParseError(line, std::string("invalid ") + what + " '" +
                                 std::string(s) + "'");
    }
    return static_cast<std::uint64_t>(d);
  }
  return v;
}

}  // namespace

auto load_jodie_csv(const std::filesystem::path& path, CsvOptions options)
    -> TemporalGraph {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw ParseError(1, "missing header line");
  }
  line_no = 1;

  struct Row {
    std::uint64_t a, b;
    double t;
    int label;
    std::vector<double> feat;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::optional<std::size_t> columns;
  double last_t = -1.0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto fields = split_csv(trimmed);
    if (fields.size() < 4) {
      throw ParseError(line_no, "expected at least 4 columns, got " +
                                    std::to_string(fields.size()));
    }
    if (!columns) {
      columns = fields.size();
    } else if (fields.size() != *columns) {
      throw ParseError(line_no, "expected " + std::to_string(*columns) +
                                    " columns, got " +
                                    std::to_string(fields.size()));
    }
    Row r;
    r.a = parse_id(fields[0], line_no, "source id");
    r.b = parse_id(fields[1], line_no, "destination id");
    r.t = parse_double(fields[2], line_no, "timestamp");
    r.label = static_cast<int>(parse_double(fields[3], line_no, "label"));
    r.line = line_no;
    r.feat.reserve(fields.size() - 4);
    for (std::size_t c = 4; c < fields.size(); ++c) {
      r.feat.push_back(parse_double(fields[c], line_no, "feature"));
    }
    if (r.t < 0) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": negative timestamp");
    }
    if (r.t < last_t) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": timestamps must be non-decreasing");
    }
    last_t = r.t;
    rows.push_back(std::move(r));
  }

  std::uint64_t max_a = 0;
  std::uint64_t max_b = 0;
  for (const auto& r : rows) {
    max_a = std::max(max_a, r.a);
    max_b = std::max(max_b, r.b);
  }
  const std::size_t feat_dim = columns ? *columns - 4 : 0;
  std::size_t num_nodes = 0;
  std::optional<NodeId> first_item;
  std::uint64_t offset = 0;
  if (options.bipartite) {
    offset = rows.empty() ? 0 : max_a + 1;
    num_nodes = rows.empty() ? 0 : offset + max_b + 1;
    first_item = static_cast<NodeId>(offset);
  } else {
    num_nodes = rows.empty() ? 0 : std::max(max_a, max_b) + 1;
  }
  std::vector<Event> events;
  events.reserve(rows.size());
  for (auto& r : rows) {
    events.push_back({static_cast<NodeId>(r.a), static_cast<NodeId>(r.b + offset),
                      r.t, std::move(r.feat), r.label});
  }
  return TemporalGraph::build(std::move(events), num_nodes, feat_dim,
                              first_item);
}

void write_jodie_csv(const TemporalGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string());
  }
  out << "user_id,item_id,timestamp,state_label,comma_separated_list_of_features\n";
  const NodeId offset = g.first_item().value_or(0);
  char buf[64];
  const auto fmt = [&buf](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string_view(buf, static_cast<std::size_t>(ptr - buf));
  };
  for (const auto& e : g.events()) {
    out << e.src << ',' << (e.dst - offset) << ',' << fmt(e.t) << ','
        << e.label.value_or(0);
    for (double f : e.edge_feat) out << ',' << fmt(f);
    out << '\n';
  }
}

auto chronological_split(const TemporalGraph& g, const SplitSpec& spec)
    -> Splits {
  spec.validate();
  const std::size_t n = g.num_events();
  if (n == 0) {
    throw ValidationError("chronological_split: empty graph");
  }
  const auto nd = static_cast<double>(n);
  const auto a = std::min(
      n, static_cast<std::size_t>(std::floor(spec.train_frac * nd)));
  const auto b = std::clamp(
      static_cast<std::size_t>(std::floor((spec.train_frac + spec.val_frac) * nd)),
      a, n);
  return {{0, a}, {a, b}, {b, n}};
}

auto destination_candidates(const TemporalGraph& g)
    -> std::pair<NodeId, NodeId> {
  if (g.bipartite()) {
    return {*g.first_item(), static_cast<NodeId>(g.num_nodes())};
  }
  return {0, static_cast<NodeId>(g.num_nodes())};
}

auto generate_synthetic(const SynthConfig& cfg) -> TemporalGraph {
  if (cfg.num_nodes < 2 || cfg.num_events < 1 || !(cfg.recur_prob >= 0.0) ||
      cfg.recur_prob > 1.0 || cfg.feat_noise < 0.0) {
    throw ValidationError(
        "generate_synthetic: need num_nodes >= 2, num_events >= 1, "
        "0 <= recur_prob <= 1");
  }
  std::mt19937_64 rng(cfg.seed);
  const auto num_users = static_cast<NodeId>(cfg.num_nodes / 2);
  const auto num_items = static_cast<NodeId>(cfg.num_nodes - num_users);

  std::vector<std::vector<double>> signature(num_items);
  std::bernoulli_distribution coin(0.5);
  for (auto& s : signature) {
    s.resize(cfg.feat_dim);
    for (auto& v : s) v = coin(rng) ? 1.0 : -1.0;
  }

  std::uniform_int_distribution<NodeId> pick_user(0, num_users - 1);
  std::uniform_int_distribution<NodeId> pick_item(0, num_items - 1);
  std::bernoulli_distribution recur(cfg.recur_prob);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<NodeId>> history(num_users);

  std::vector<Event> events;
  events.reserve(cfg.num_events);
  for (std::size_t k = 0; k < cfg.num_events; ++k) {
    const NodeId user = pick_user(rng);
    auto& past = history[user];
    NodeId item = 0;
    if (!past.empty() && recur(rng)) {
      std::uniform_int_distribution<std::size_t> pick_past(0, past.size() - 1);
      item = past[pick_past(rng)];
    } else {
      item = pick_item(rng);
    }
    past.push_back(item);
    Event e;
    e.src = user;
    e.dst = num_users + item;
    e.t = static_cast<double>(k + 1);
    e.edge_feat = signature[item];
    for (auto& v : e.edge_feat) v += cfg.feat_noise * noise(rng);
    events.push_back(std::move(e));
  }
  return TemporalGraph::build(std::move(events), cfg.num_nodes, cfg.feat_dim,
                              num_users);
}

auto perturb_links(const TemporalGraph& g, double rate, std::uint64_t seed,
                   std::optional<EventRange> range) -> PerturbedGraph {
  if (!(rate >= 0.0) || rate > 1.0) {
    throw ValidationError("perturb_links: rate must be in [0, 1]");
  }
  const EventRange r = range.value_or(EventRange{0, g.num_events()});
  if (r.begin > r.end || r.end > g.num_events()) {
    throw ValidationError("perturb_links: range out of bounds");
  }
  const auto count = static_cast<std::size_t>(
      std::floor(rate * static_cast<double>(r.size())));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(r.size());
  std::iota(idx.begin(), idx.end(), r.begin);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());

  const auto [lo, hi] = destination_candidates(g);
  std::vector<Event> events(g.events().begin(), g.events().end());
  for (auto i : idx) {
    auto& e = events[i];
    const bool src_in_range = e.src >= lo && e.src < hi;
    const NodeId pool = hi - lo - (src_in_range ? 1 : 0);
    if (pool == 0) {
      throw ValidationError("perturb_links: no replacement destination exists");
    }
    std::uniform_int_distribution<NodeId> pick(0, pool - 1);
    NodeId d = lo + pick(rng);
    if (src_in_range && d >= e.src) d += 1;
    e.dst = d;
  }
  return {TemporalGraph::build(std::move(events), g.num_nodes(), g.feat_dim(),
                               g.first_item()),
          std::move(idx)};
}

auto InductiveMask::is_unseen(NodeId node) const -> bool {
  return std::binary_search(unseen.begin(), unseen.end(), node);
}

auto mask_inductive_nodes(const TemporalGraph& g, const Splits& splits,
                          double fraction, std::uint64_t seed)
    -> InductiveMask {
  if (!(fraction > 0.0) || !(fraction < 1.0)) {
    throw ValidationError("mask_inductive_nodes: fraction must be in (0, 1)");
  }
  const auto count = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(g.num_nodes())));
  if (count == 0) {
    throw ValidationError(
        "mask_inductive_nodes: fraction leaves no unseen nodes");
  }
  std::mt19937_64 rng(seed);
  std::vector<NodeId> nodes(g.num_nodes());
  std::iota(nodes.begin(), nodes.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, nodes.size() - 1);
    std::swap(nodes[i], nodes[pick(rng)]);
  }
  nodes.resize(count);
  std::sort(nodes.begin(), nodes.end());

  InductiveMask mask;
  mask.unseen = std::move(nodes);
  std::vector<Event> kept;
  kept.reserve(g.num_events());
  std::size_t removed = 0;
  for (std::size_t i = 0; i < g.num_events(); ++i) {
    const auto& e = g.event(i);
    const bool in_train = i >= splits.train.begin && i < splits.train.end;
    if (in_train && (mask.is_unseen(e.src) || mask.is_unseen(e.dst))) {
      ++removed;
      continue;
    }
    kept.push_back(e);
  }
  const auto shift = [removed](std::size_t i) { return i - removed; };
  mask.visible_splits.train = {splits.train.begin, shift(splits.train.end)};
  mask.visible_splits.val = {shift(splits.val.begin), shift(splits.val.end)};
  mask.visible_splits.test = {shift(splits.test.begin), shift(splits.test.end)};
  mask.visible = TemporalGraph::build(std::move(kept), g.num_nodes(),
                                      g.feat_dim(), g.first_item());
  return mask;
}

}  // namespace sean
