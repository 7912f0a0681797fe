#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sean/graph_store.hpp"

namespace sean {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("sean_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  auto file(const std::string& name, const std::string& body) const
      -> fs::path {
    const auto p = path_ / name;
    std::ofstream(p) << body;
    return p;
  }
  auto path() const -> const fs::path& { return path_; }

 private:
  fs::path path_;
};

auto toy_graph() -> TemporalGraph {
  // A=0, B=1, C=2, D=3 (isolated)
  std::vector<Event> events = {{0, 1, 1.0, {}, {}},
                               {0, 1, 2.0, {}, {}},
                               {0, 2, 3.0, {}, {}}};
  return TemporalGraph::build(std::move(events), 4, 0);
}

TEST(JodieCsv, ThreeRowsTwoUsersTwoItems) {
  TempDir dir;
  const auto p = dir.file("tiny.csv",
                          "user_id,item_id,timestamp,state_label,features\n"
                          "0,0,1.0,0,0.5,1.5\n"
                          "1,1,2.0,1,-0.5,2.5\r\n"
                          "0,1,3.0,0,0.0,0.0\n");
  const auto g = load_jodie_csv(p);
  EXPECT_EQ(g.num_nodes(), 4u);
  EXPECT_EQ(g.num_events(), 3u);
  EXPECT_EQ(g.feat_dim(), 2u);
  EXPECT_TRUE(g.bipartite());
  EXPECT_EQ(g.event(0).dst, 2u);
  EXPECT_EQ(g.event(1).dst, 3u);
  EXPECT_EQ(g.event(1).edge_feat, (std::vector<double>{-0.5, 2.5}));
  EXPECT_EQ(g.event(1).label, 1);
  EXPECT_TRUE(g.has_labels());
}

TEST(JodieCsv, UnipartiteIdsAreKept) {
  TempDir dir;
  const auto p = dir.file("uni.csv", "h\n0,3,1,0\n2,1,2,0\n");
  const auto g = load_jodie_csv(p, CsvOptions{false});
  EXPECT_EQ(g.num_nodes(), 4u);
  EXPECT_EQ(g.feat_dim(), 0u);
  EXPECT_FALSE(g.bipartite());
  EXPECT_EQ(g.event(0).dst, 3u);
}

TEST(JodieCsv, MissingFeatureColumnNamesTheLine) {
  TempDir dir;
  const auto p = dir.file("bad.csv", "h\n0,0,1,0,0.1,0.2\n1,0,2,0,0.3\n");
  try {
    load_jodie_csv(p);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(JodieCsv, NonNumericFieldIsAParseError) {
  TempDir dir;
  const auto p = dir.file("bad.csv", "h\n0,0,abc,0\n");
  EXPECT_THROW(load_jodie_csv(p), ParseError);
}

TEST(JodieCsv, DecreasingTimestampIsAValidationError) {
  TempDir dir;
  const auto p = dir.file("bad.csv", "h\n0,0,5,0\n1,0,4,0\n");
  EXPECT_THROW(load_jodie_csv(p), ValidationError);
}

TEST(JodieCsv, SyntheticRoundTrip) {
  TempDir dir;
  SynthConfig cfg;
  cfg.num_nodes = 40;
  cfg.num_events = 300;
  cfg.feat_dim = 3;
  cfg.seed = 5;
  const auto g = generate_synthetic(cfg);
  const auto p = dir.path() / "synth.csv";
  write_jodie_csv(g, p);
  const auto back = load_jodie_csv(p);
  ASSERT_EQ(back.num_events(), g.num_events());
  EXPECT_EQ(back.feat_dim(), g.feat_dim());
  for (std::size_t i = 0; i < g.num_events(); ++i) {
    EXPECT_EQ(back.event(i).src, g.event(i).src);
    EXPECT_EQ(back.event(i).dst, g.event(i).dst);
    EXPECT_EQ(back.event(i).t, g.event(i).t);
    EXPECT_EQ(back.event(i).edge_feat, g.event(i).edge_feat);
  }
}

TEST(Graph, BuildSortsStablyAndIndexesBothEndpoints) {
  std::vector<Event> events = {{0, 1, 2.0, {}, {}},
                               {2, 3, 1.0, {}, {}},
                               {1, 2, 2.0, {}, {}}};
  const auto g = TemporalGraph::build(std::move(events), 4, 0);
  EXPECT_EQ(g.event(0).src, 2u);
  EXPECT_EQ(g.event(1).src, 0u);
  EXPECT_EQ(g.event(2).src, 1u);
  std::size_t incidences = 0;
  for (NodeId v = 0; v < 4; ++v) incidences += g.adjacency(v).size();
  EXPECT_EQ(incidences, 2 * g.num_events());
}

TEST(Graph, RejectsInvalidEvents) {
  EXPECT_THROW(TemporalGraph::build({{0, 5, 1.0, {}, {}}}, 2, 0), ValidationError);
  EXPECT_THROW(TemporalGraph::build({{0, 1, -1.0, {}, {}}}, 2, 0),
               ValidationError);
  EXPECT_THROW(TemporalGraph::build({{0, 1, 1.0, {1.0}, {}}}, 2, 0),
               ValidationError);
}

TEST(Split, HundredEvents) {
  std::vector<Event> events;
  for (int i = 0; i < 100; ++i) events.push_back({0, 1, double(i), {}, {}});
  const auto s = chronological_split(TemporalGraph::build(events, 2, 0), {});
  EXPECT_EQ(s.train, (EventRange{0, 70}));
  EXPECT_EQ(s.val, (EventRange{70, 85}));
  EXPECT_EQ(s.test, (EventRange{85, 100}));
}

TEST(Split, TenEventsFloorRule) {
  std::vector<Event> events;
  for (int i = 0; i < 10; ++i) events.push_back({0, 1, double(i), {}, {}});
  const auto s = chronological_split(TemporalGraph::build(events, 2, 0), {});
  EXPECT_EQ(s.train, (EventRange{0, 7}));
  EXPECT_EQ(s.val, (EventRange{7, 8}));
  EXPECT_EQ(s.test, (EventRange{8, 10}));
}

TEST(Split, SingleEventGoesToTest) {
  const auto g = TemporalGraph::build({{0, 1, 1.0, {}, {}}}, 2, 0);
  const auto s = chronological_split(g, {});
  EXPECT_EQ(s.train, (EventRange{0, 0}));
  EXPECT_EQ(s.val, (EventRange{0, 0}));
  EXPECT_EQ(s.test, (EventRange{0, 1}));
}

TEST(Split, EmptyGraphAndBadFractionsAreErrors) {
  EXPECT_THROW(chronological_split(TemporalGraph::build({}, 2, 0), {}),
               ValidationError);
  const auto g = toy_graph();
  EXPECT_THROW(chronological_split(g, {0.5, 0.3, 0.3}), ValidationError);
  EXPECT_THROW(chronological_split(g, {1.2, -0.1, -0.1}), ValidationError);
}

TEST(NeighborView, ToyQueryNewestFirst) {
  const auto g = toy_graph();
  const auto v = g.neighbor_view(0, 4.0, 10);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v.entries[0].neighbor, 2u);
  EXPECT_EQ(v.entries[0].event_t, 3.0);
  EXPECT_EQ(v.entries[1].neighbor, 1u);
  EXPECT_EQ(v.entries[1].event_t, 2.0);
  EXPECT_EQ(v.entries[2].neighbor, 1u);
  EXPECT_EQ(v.entries[2].event_t, 1.0);
  EXPECT_EQ(v.freq, (std::vector<std::size_t>{1, 2, 2}));
  EXPECT_EQ(v.neigh_degree, (std::vector<std::size_t>{1, 2, 2}));
}

TEST(NeighborView, NoStrictlyEarlierEventsGivesEmptyView) {
  EXPECT_TRUE(toy_graph().neighbor_view(0, 1.0, 10).empty());
}

TEST(NeighborView, SampleSizeKeepsMostRecent) {
  const auto v = toy_graph().neighbor_view(0, 4.0, 1);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v.entries[0].neighbor, 2u);
  EXPECT_EQ(v.entries[0].event_t, 3.0);
}

TEST(NeighborView, OutOfRangeNodeIsAnError) {
  EXPECT_THROW(toy_graph().neighbor_view(9, 1.0, 10), std::out_of_range);
}

TEST(NeighborView, MatchesLinearScanOnRandomGraphs) {
  std::mt19937_64 rng(101);
  for (int query = 0; query < 1000; ++query) {
    const auto g = oracle::random_graph(rng, 200, 12);
    const auto node = std::uniform_int_distribution<NodeId>(
        0, static_cast<NodeId>(g.num_nodes() - 1))(rng);
    const double t = std::uniform_int_distribution<int>(0, 42)(rng);
    const std::size_t s = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    const auto view = g.neighbor_view(node, t, s);
    const auto expected = oracle::neighbor_scan(g.events(), node, t, s);
    ASSERT_EQ(view.size(), expected.size());
    for (std::size_t j = 0; j < expected.size(); ++j) {
      EXPECT_EQ(view.entries[j].neighbor, expected[j].neighbor);
      EXPECT_EQ(view.entries[j].event, expected[j].event);
      EXPECT_EQ(view.entries[j].event_t, expected[j].event_t);
      EXPECT_LT(view.entries[j].event_t, t);
      EXPECT_EQ(view.freq[j], expected[j].freq);
      EXPECT_EQ(view.neigh_degree[j], expected[j].degree);
      EXPECT_GE(view.freq[j], 1u);
      EXPECT_GE(view.neigh_degree[j], 1u);
    }
  }
}

TEST(TemporalDegree, CountsStrictlyEarlierIncidences) {
  std::vector<Event> events = {{0, 1, 1.0, {}, {}}, {0, 2, 3.0, {}, {}}};
  const auto g = TemporalGraph::build(std::move(events), 4, 0);
  EXPECT_EQ(g.temporal_degree(0, 4.0), 2u);
  EXPECT_EQ(g.temporal_degree(0, 3.0), 1u);
  EXPECT_EQ(g.temporal_degree(0, 0.0), 0u);
  EXPECT_EQ(g.temporal_degree(3, 100.0), 0u);
}

TEST(Synthetic, SeededRunsAreBitIdentical) {
  SynthConfig cfg;
  cfg.num_nodes = 50;
  cfg.num_events = 1000;
  cfg.feat_dim = 4;
  cfg.recur_prob = 0.8;
  cfg.seed = 7;
  const auto a = generate_synthetic(cfg);
  const auto b = generate_synthetic(cfg);
  ASSERT_EQ(a.num_events(), b.num_events());
  for (std::size_t i = 0; i < a.num_events(); ++i) {
    EXPECT_EQ(a.event(i), b.event(i));
  }
}

TEST(Synthetic, TimestampsAreOneToN) {
  SynthConfig cfg;
  cfg.num_nodes = 10;
  cfg.num_events = 50;
  const auto g = generate_synthetic(cfg);
  for (std::size_t i = 0; i < g.num_events(); ++i) {
    EXPECT_EQ(g.event(i).t, static_cast<double>(i + 1));
    EXPECT_LT(g.event(i).src, *g.first_item());
    EXPECT_GE(g.event(i).dst, *g.first_item());
  }
}

auto repeat_fraction(const TemporalGraph& g) -> double {
  std::set<std::pair<NodeId, NodeId>> seen;
  std::size_t repeats = 0;
  for (const auto& e : g.events()) {
    if (!seen.insert({e.src, e.dst}).second) ++repeats;
  }
  return static_cast<double>(repeats) / static_cast<double>(g.num_events());
}

TEST(Synthetic, NoRecurrenceMatchesUniformCollisionRate) {
  SynthConfig cfg;
  cfg.num_nodes = 100;
  cfg.num_events = 5000;
  cfg.recur_prob = 0.0;
  cfg.feat_dim = 0;
  cfg.seed = 3;
  const double observed = repeat_fraction(generate_synthetic(cfg));
  // Independent Monte Carlo estimate of the repeat rate of uniform
  // user/item draws with the same population sizes.
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> user(0, 49);
  std::uniform_int_distribution<int> item(0, 49);
  double expected = 0.0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    std::set<std::pair<int, int>> seen;
    std::size_t repeats = 0;
    for (int k = 0; k < 5000; ++k) {
      if (!seen.insert({user(rng), item(rng)}).second) ++repeats;
    }
    expected += static_cast<double>(repeats) / 5000.0;
  }
  expected /= reps;
  EXPECT_NEAR(observed, expected, 0.02);
  cfg.recur_prob = 0.8;
  EXPECT_GT(repeat_fraction(generate_synthetic(cfg)), observed + 0.2);
}

TEST(Synthetic, InvalidParametersAreRejected) {
  SynthConfig cfg;
  cfg.num_nodes = 1;
  EXPECT_THROW(generate_synthetic(cfg), ValidationError);
  cfg.num_nodes = 10;
  cfg.recur_prob = 1.5;
  EXPECT_THROW(generate_synthetic(cfg), ValidationError);
}

auto small_synth(std::size_t events = 100) -> TemporalGraph {
  SynthConfig cfg;
  cfg.num_nodes = 30;
  cfg.num_events = events;
  cfg.feat_dim = 2;
  cfg.seed = 1;
  return generate_synthetic(cfg);
}

TEST(Perturb, ZeroRateIsIdentity) {
  const auto g = small_synth();
  const auto p = perturb_links(g, 0.0, 4);
  EXPECT_TRUE(p.perturbed_events.empty());
  for (std::size_t i = 0; i < g.num_events(); ++i) {
    EXPECT_EQ(p.graph.event(i), g.event(i));
  }
}

TEST(Perturb, FullRateReplacesEveryDestination) {
  const auto g = small_synth(100);
  const auto p = perturb_links(g, 1.0, 4);
  EXPECT_EQ(p.perturbed_events.size(), 100u);
}

TEST(Perturb, PreservesTimesFeaturesAndSources) {
  const auto g = small_synth(400);
  const auto p = perturb_links(g, 0.3, 8);
  EXPECT_EQ(p.perturbed_events.size(), 120u);
  ASSERT_EQ(p.graph.num_events(), g.num_events());
  const auto [lo, hi] = destination_candidates(g);
  std::set<std::size_t> hit(p.perturbed_events.begin(), p.perturbed_events.end());
  for (std::size_t i = 0; i < g.num_events(); ++i) {
    EXPECT_EQ(p.graph.event(i).src, g.event(i).src);
    EXPECT_EQ(p.graph.event(i).t, g.event(i).t);
    EXPECT_EQ(p.graph.event(i).edge_feat, g.event(i).edge_feat);
    if (hit.count(i) == 0) {
      EXPECT_EQ(p.graph.event(i).dst, g.event(i).dst);
    } else {
      EXPECT_GE(p.graph.event(i).dst, lo);
      EXPECT_LT(p.graph.event(i).dst, hi);
    }
  }
}

TEST(Perturb, SeededAndRangeRestricted) {
  const auto g = small_synth(200);
  const auto a = perturb_links(g, 0.3, 8, EventRange{0, 100});
  const auto b = perturb_links(g, 0.3, 8, EventRange{0, 100});
  EXPECT_EQ(a.perturbed_events, b.perturbed_events);
  EXPECT_EQ(a.perturbed_events.size(), 30u);
  for (auto i : a.perturbed_events) EXPECT_LT(i, 100u);
  for (std::size_t i = 0; i < g.num_events(); ++i) {
    EXPECT_EQ(a.graph.event(i), b.graph.event(i));
  }
}

TEST(Inductive, FloorFractionAndDeterminism) {
  SynthConfig cfg;
  cfg.num_nodes = 100;
  cfg.num_events = 600;
  cfg.feat_dim = 0;
  const auto g = generate_synthetic(cfg);
  const auto splits = chronological_split(g, {});
  const auto a = mask_inductive_nodes(g, splits, 0.1, 5);
  const auto b = mask_inductive_nodes(g, splits, 0.1, 5);
  EXPECT_EQ(a.unseen.size(), 10u);
  EXPECT_EQ(a.unseen, b.unseen);
  for (std::size_t i = a.visible_splits.train.begin;
       i < a.visible_splits.train.end; ++i) {
    EXPECT_FALSE(a.is_unseen(a.visible.event(i).src));
    EXPECT_FALSE(a.is_unseen(a.visible.event(i).dst));
  }
  EXPECT_EQ(a.visible_splits.test.size(), splits.test.size());
  EXPECT_EQ(a.visible_splits.val.size(), splits.val.size());
  EXPECT_EQ(a.visible_splits.test.end, a.visible.num_events());
}

TEST(Inductive, FractionWithNoUnseenNodesIsAnError) {
  const auto g = toy_graph();
  const auto splits = chronological_split(g, {});
  EXPECT_THROW(mask_inductive_nodes(g, splits, 0.1, 1), ValidationError);
}

}  // namespace
}  // namespace sean
