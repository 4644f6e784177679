#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "mps/errors.hpp"
#include "mps/graph.hpp"
#include "oracles.hpp"

namespace mps {
namespace {

using testing::clinic_fixture;
using testing::oracle_count_occurrences;
using testing::oracle_induced_subgraph;
using testing::oracle_walks;
using testing::random_test_graph;

TEST_CASE("builder dedups edges and sorts neighbor lists") {
  GraphBuilder b(1);
  const TypeId t = b.add_type("t");
  const RelationId r = b.add_relation("r");
  for (int i = 0; i < 4; ++i) b.add_node(t, {1.0});
  b.add_edge(0, r, 3);
  b.add_edge(0, r, 1);
  b.add_edge(0, r, 3);  // duplicate
  b.add_edge(0, r, 2);
  const HeteroGraph g = std::move(b).build();

  const auto succ = g.neighbors(0, r);
  CHECK(std::vector<NodeId>(succ.begin(), succ.end()) ==
        std::vector<NodeId>{1, 2, 3});
  CHECK(g.num_edges() == 3);
  CHECK(g.out_degree(0, r) == 3);
  CHECK(g.out_degree(1, r) == 0);
  CHECK(g.has_edge(0, r, 2));
  CHECK(!g.has_edge(2, r, 0));
}

TEST_CASE("clinic fixture walk counts") {
  const auto fx = clinic_fixture();
  const MetaPath two_hop{{fx.prescribed, fx.contains}};

  // Patient 0: prescriptions {2,3,4} carry 4 + 0 + 2 medications; walks
  // multiply through shared structure, so the count is 6 even though only
  // 4 distinct medications are reachable.
  CHECK(fx.graph.count_occurrences(0, two_hop) == 6);
  CHECK(fx.graph.count_occurrences(1, two_hop) == 7);
  CHECK(oracle_count_occurrences(fx.graph, 0, two_hop) == 6);
  CHECK(oracle_count_occurrences(fx.graph, 1, two_hop) == 7);

  // The trivial meta-path has exactly one occurrence everywhere.
  CHECK(fx.graph.count_occurrences(0, MetaPath{}) == 1);
  CHECK(fx.graph.count_occurrences(12, MetaPath{}) == 1);

  const MetaPath to_doctor{{fx.consulted}};
  CHECK(fx.graph.count_occurrences(0, to_doctor) == 1);
  CHECK(fx.graph.count_occurrences(0, MetaPath{{fx.contains}}) == 0);
}

TEST_CASE("walk counts match the DFS oracle on random graphs") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const HeteroGraph g = random_test_graph(seed, 25, 3, 0.12, 2);
    Rng rng(seed + 100);
    for (int trial = 0; trial < 20; ++trial) {
      MetaPath mp;
      const int len = static_cast<int>(rng.below(4));
      for (int i = 0; i < len; ++i) {
        mp.relations.push_back(static_cast<RelationId>(rng.below(3)));
      }
      const NodeId v = static_cast<NodeId>(rng.below(g.num_nodes()));
      REQUIRE(g.count_occurrences(v, mp) == oracle_count_occurrences(g, v, mp));
    }
  }
}

TEST_CASE("walk counting saturates instead of wrapping") {
  // Complete 2-node digraph with self-loops: walks of length L from node 0
  // number exactly 2^L, which overflows uint64 at L = 64.
  GraphBuilder b(1);
  const TypeId t = b.add_type("t");
  const RelationId r = b.add_relation("r");
  b.add_node(t, {0.0});
  b.add_node(t, {0.0});
  for (NodeId u : {0u, 1u})
    for (NodeId v : {0u, 1u}) b.add_edge(u, r, v);
  const HeteroGraph g = std::move(b).build();

  MetaPath mp;
  mp.relations.assign(63, r);
  CHECK(g.count_occurrences(0, mp) == (1ULL << 63));
  mp.relations.assign(70, r);
  CHECK(g.count_occurrences(0, mp) == std::numeric_limits<std::uint64_t>::max());
}

TEST_CASE("metapath layers match their definition") {
  const HeteroGraph g = random_test_graph(9, 20, 2, 0.15, 2);
  const std::vector<NodeId> targets{0, 1, 2};
  const MetaPath mp{{0, 1, 0}};
  const auto layers = metapath_layers(g, targets, mp);

  REQUIRE(layers.forward.size() == mp.length() + 1);
  REQUIRE(layers.completable.size() == mp.length() + 1);

  for (std::size_t j = 0; j <= mp.length(); ++j) {
    // forward[j]: endpoints of prefix walks from any target.
    const MetaPath prefix{{mp.relations.begin(), mp.relations.begin() + j}};
    std::vector<char> expect_fwd(g.num_nodes(), 0);
    for (NodeId t : targets) {
      for (const auto& walk : oracle_walks(g, t, prefix)) expect_fwd[walk.back()] = 1;
    }
    // completable[j]: nodes with at least one suffix walk.
    const MetaPath suffix{{mp.relations.begin() + j, mp.relations.end()}};
    std::vector<char> expect_comp(g.num_nodes(), 0);
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      expect_comp[v] = oracle_count_occurrences(g, v, suffix) > 0 ? 1 : 0;
    }
    CHECK(layers.forward[j] == expect_fwd);
    CHECK(layers.completable[j] == expect_comp);
  }
}

TEST_CASE("induced subgraph matches the walk-enumeration oracle") {
  const auto fx = clinic_fixture();
  const std::vector<NodeId> targets{0, 1};
  const std::vector<MetaPath> mps{MetaPath{{fx.prescribed, fx.contains}}};
  const auto got = induced_subgraph(fx.graph, targets, mps);
  const auto want = oracle_induced_subgraph(fx.graph, targets, mps);
  CHECK(got == want);

  // Prescription 3 carries no medications, so it supports no complete
  // occurrence and must stay out even though an edge reaches it.
  CHECK(!std::binary_search(got.nodes.begin(), got.nodes.end(), NodeId{3}));
  CHECK(!got.contains_edge({0, fx.prescribed, 3}));
  CHECK(got.contains_edge({0, fx.prescribed, 2}));

  for (std::uint64_t seed : {4ULL, 5ULL}) {
    const HeteroGraph g = random_test_graph(seed, 18, 3, 0.12, 2);
    const std::vector<NodeId> t{0, 1, 2, 3};
    const std::vector<MetaPath> paths{MetaPath{{0, 1}}, MetaPath{{2, 2, 0}}};
    CHECK(induced_subgraph(g, t, paths) == oracle_induced_subgraph(g, t, paths));
  }
}

TEST_CASE("induced subgraph of the empty meta-path is just the targets") {
  const auto fx = clinic_fixture();
  const std::vector<NodeId> targets{0, 1};
  const std::vector<MetaPath> mps{MetaPath{}};
  const auto got = induced_subgraph(fx.graph, targets, mps);
  CHECK(got.nodes == targets);
  CHECK(got.edges.empty());
}

TEST_CASE("edge removal and insertion round-trip") {
  const auto fx = clinic_fixture();
  const std::vector<Edge> victims{{0, fx.prescribed, 2}, {4, fx.contains, 8}};
  const HeteroGraph reduced = remove_edges(fx.graph, victims);
  CHECK(reduced.num_edges() == fx.graph.num_edges() - 2);
  CHECK(!reduced.has_edge(0, fx.prescribed, 2));
  CHECK(reduced.has_edge(0, fx.prescribed, 3));
  // Patient 0 keeps prescriptions {3, 4}; 3 is empty and 4 lost medication
  // 8, leaving the single walk 0 -> 4 -> 9.
  CHECK(reduced.count_occurrences(0, MetaPath{{fx.prescribed, fx.contains}}) == 1);

  const HeteroGraph restored = add_edges(reduced, victims);
  CHECK(restored.all_edges() == fx.graph.all_edges());

  // Removing an absent edge and re-adding a present one are no-ops.
  const std::vector<Edge> absent{{3, fx.contains, 8}};
  CHECK(remove_edges(fx.graph, absent).num_edges() == fx.graph.num_edges());
  const std::vector<Edge> present{{0, fx.prescribed, 2}};
  CHECK(add_edges(fx.graph, present).num_edges() == fx.graph.num_edges());
}

TEST_CASE("meta-path formatting round-trips by relation name") {
  const auto fx = clinic_fixture();
  const MetaPath mp{{fx.prescribed, fx.contains}};
  const std::string text = format_metapath(fx.graph, mp);
  CHECK(text == "prescribed,contains");
  CHECK(parse_metapath(fx.graph, text) == mp);
  CHECK(parse_metapath(fx.graph, " prescribed , contains ") == mp);
  CHECK(parse_metapath(fx.graph, "") == MetaPath{});
  CHECK_THROWS_AS((void)parse_metapath(fx.graph, "prescribed,unknown"),
                  DataError);
}

TEST_CASE("type and relation lookups") {
  const auto fx = clinic_fixture();
  REQUIRE(fx.graph.find_type("patient").has_value());
  CHECK(fx.graph.type_name(*fx.graph.find_type("patient")) == "patient");
  CHECK(!fx.graph.find_type("starship").has_value());
  REQUIRE(fx.graph.find_relation("contains").has_value());
  CHECK(*fx.graph.find_relation("contains") == fx.contains);
  CHECK(fx.graph.node_type(0) == *fx.graph.find_type("patient"));
  CHECK(fx.graph.feature_dim() == 2);
  const auto x = fx.graph.features(3);
  CHECK(x[0] == 0.0);
  CHECK(x[1] == 1.0);
}

}  // namespace
}  // namespace mps
