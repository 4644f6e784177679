#pragma once

// Hand-built graphs shared by the unit and acceptance suites. The clinic
// fixtures are small medical-records toys (patients, prescriptions, doctors,
// medications) whose scoring behavior is worked out in closed form in the
// tests that use them; their exact shapes are load-bearing, so change nothing
// here without re-deriving those expectations.

#include <vector>

#include "mps/bags.hpp"
#include "mps/graph.hpp"
#include "mps/rng.hpp"

namespace mps::testing {

struct ClinicFixture {
  HeteroGraph graph;
  std::vector<NodeId> targets;  // the two patients
  std::vector<int> labels;      // parallel to targets
  RelationId consulted = 0;     // patient -> doctor
  RelationId prescribed = 0;    // patient -> prescription
  RelationId issued_by = 0;     // prescription -> doctor
  RelationId contains = 0;      // prescription -> medication
};

// Two patients with identical features, one positive and one negative.
// Both consult the same doctor and share prescription 4; all prescriptions
// are issued by that doctor. The only label-relevant structure is which
// medications hang off each patient's prescriptions, two hops out:
//
//   patient 0 (+): prescribed -> {2, 3, 4}; contains: 2 -> {8,9,10,11},
//                  3 -> {}, 4 -> {8,9}                (6 two-hop walks)
//   patient 1 (-): prescribed -> {4, 5, 6}; contains: 4 -> {8,9},
//                  5 -> {10,11}, 6 -> {8,9,12}        (7 two-hop walks)
//
// Closed forms (alpha = 1 singleton bags; T = theta . (1,0), U = theta . (0,1)):
//   consulted:  F+ = F- = T * w7                 -> loss pinned at 1/2
//   issued_by:  no successors from patients      -> loss pinned at 1/2
//   contains:   no successors from patients      -> loss pinned at 1/2
//   prescribed: F- - F+ = T * (w5 + w6 - w2 - w3) -> drivable to ~0
// and after propagating along `prescribed`, `contains` is the only relation
// that separates the resulting prescription bags.
inline ClinicFixture clinic_fixture() {
  GraphBuilder b(2);
  const TypeId patient = b.add_type("patient");
  const TypeId prescription = b.add_type("prescription");
  const TypeId doctor = b.add_type("doctor");
  const TypeId medication = b.add_type("medication");

  ClinicFixture fx;
  fx.consulted = b.add_relation("consulted");
  fx.prescribed = b.add_relation("prescribed");
  fx.issued_by = b.add_relation("issued_by");
  fx.contains = b.add_relation("contains");

  b.add_node(patient, {1, 0});       // 0  (+)
  b.add_node(patient, {1, 0});       // 1  (-)
  b.add_node(prescription, {1, 0});  // 2
  b.add_node(prescription, {0, 1});  // 3
  b.add_node(prescription, {1, 0});  // 4
  b.add_node(prescription, {0, 1});  // 5
  b.add_node(prescription, {1, 0});  // 6
  b.add_node(doctor, {0, 1});        // 7
  for (int i = 0; i < 5; ++i) b.add_node(medication, {0, 1});  // 8..12

  b.add_edge(0, fx.consulted, 7);
  b.add_edge(1, fx.consulted, 7);

  b.add_edge(0, fx.prescribed, 2);
  b.add_edge(0, fx.prescribed, 3);
  b.add_edge(0, fx.prescribed, 4);
  b.add_edge(1, fx.prescribed, 4);
  b.add_edge(1, fx.prescribed, 5);
  b.add_edge(1, fx.prescribed, 6);

  for (NodeId p = 2; p <= 6; ++p) b.add_edge(p, fx.issued_by, 7);

  b.add_edge(2, fx.contains, 8);
  b.add_edge(2, fx.contains, 9);
  b.add_edge(2, fx.contains, 10);
  b.add_edge(2, fx.contains, 11);
  b.add_edge(4, fx.contains, 8);
  b.add_edge(4, fx.contains, 9);
  b.add_edge(5, fx.contains, 10);
  b.add_edge(5, fx.contains, 11);
  b.add_edge(6, fx.contains, 8);
  b.add_edge(6, fx.contains, 9);
  b.add_edge(6, fx.contains, 12);

  fx.graph = std::move(b).build();
  fx.targets = {0, 1};
  fx.labels = {1, 0};
  return fx;
}

struct ClinicTwoHopFixture {
  HeteroGraph graph;
  RelationId prescribed = 0;  // patient -> prescription
  RelationId issued_by = 0;   // prescription -> doctor
  RelationId contains = 0;    // prescription -> medication

  // Prescription bags as they stand after one propagation step along
  // `prescribed`, with a uniform positive weight z on every member.
  BagSets hop_bags(double z) const {
    BagSets bags;
    bags.iteration = 1;
    bags.positives.push_back(Bag{{2, 3, 4, 5}, {z, z, z, z}});
    bags.negatives.push_back(Bag{{2, 3, 6, 7}, {z, z, z, z}});
    return bags;
  }
};

// A second clinic toy exercising scoring one hop deeper, on prescription
// bags that share members 2 and 3 across the classes. Feature dim is 3
// (two category indicators plus a dosage-like numeric column). With
// A = theta . (1,0,70) and B = theta . (0,1,20), and bag weights z:
//
//   issued_by: F- - F+ cancels exactly               -> loss pinned at 1/2
//   contains:  F- - F+ = z * (B * (w10 + w11 - 1) + A * (w12 - w10 - w11))
//
// so `contains` is drivable to ~0 (e.g. A = 0, B large positive, w10, w11
// near 0) while `issued_by` is not.
inline ClinicTwoHopFixture clinic_two_hop_fixture() {
  GraphBuilder b(3);
  const TypeId patient = b.add_type("patient");
  const TypeId prescription = b.add_type("prescription");
  const TypeId medication = b.add_type("medication");
  const TypeId doctor = b.add_type("doctor");

  ClinicTwoHopFixture fx;
  fx.prescribed = b.add_relation("prescribed");
  fx.issued_by = b.add_relation("issued_by");
  fx.contains = b.add_relation("contains");

  b.add_node(patient, {1, 0, 50});       // 0 (+)
  b.add_node(patient, {1, 0, 50});       // 1 (-)
  b.add_node(prescription, {1, 0, 60});  // 2 (shared)
  b.add_node(prescription, {1, 0, 60});  // 3 (shared)
  b.add_node(prescription, {1, 0, 70});  // 4 (+ only)
  b.add_node(prescription, {0, 1, 20});  // 5 (+ only)
  b.add_node(prescription, {0, 1, 20});  // 6 (- only)
  b.add_node(prescription, {1, 0, 70});  // 7 (- only)
  for (int i = 0; i < 5; ++i) b.add_node(medication, {0, 0, 1});  // 8..12
  b.add_node(doctor, {0, 1, 0});         // 13

  b.add_edge(0, fx.prescribed, 2);
  b.add_edge(0, fx.prescribed, 3);
  b.add_edge(0, fx.prescribed, 4);
  b.add_edge(0, fx.prescribed, 5);
  b.add_edge(1, fx.prescribed, 2);
  b.add_edge(1, fx.prescribed, 3);
  b.add_edge(1, fx.prescribed, 6);
  b.add_edge(1, fx.prescribed, 7);

  b.add_edge(4, fx.issued_by, 13);
  b.add_edge(7, fx.issued_by, 13);

  b.add_edge(2, fx.contains, 8);
  b.add_edge(2, fx.contains, 9);
  b.add_edge(3, fx.contains, 8);
  b.add_edge(3, fx.contains, 9);
  b.add_edge(4, fx.contains, 10);
  b.add_edge(4, fx.contains, 11);
  b.add_edge(6, fx.contains, 10);
  b.add_edge(6, fx.contains, 11);
  b.add_edge(7, fx.contains, 12);

  fx.graph = std::move(b).build();
  return fx;
}

// Random typed graph for property tests. Every node gets a random type and
// features in [-1, 1); each relation adds edges independently with the given
// probability. Deterministic in the seed.
inline HeteroGraph random_test_graph(std::uint64_t seed, std::size_t num_nodes,
                                     std::size_t num_relations,
                                     double edge_prob, std::size_t dim) {
  Rng rng(seed);
  GraphBuilder b(dim);
  std::vector<TypeId> types;
  for (int t = 0; t < 3; ++t) types.push_back(b.add_type("t" + std::to_string(t)));
  std::vector<RelationId> rels;
  for (std::size_t r = 0; r < num_relations; ++r) {
    rels.push_back(b.add_relation("r" + std::to_string(r)));
  }
  for (std::size_t v = 0; v < num_nodes; ++v) {
    std::vector<double> x(dim);
    for (double& xi : x) xi = rng.uniform(-1.0, 1.0);
    b.add_node(types[rng.below(types.size())], std::move(x));
  }
  for (RelationId r : rels) {
    for (std::size_t u = 0; u < num_nodes; ++u) {
      for (std::size_t v = 0; v < num_nodes; ++v) {
        if (u != v && rng.bernoulli(edge_prob)) {
          b.add_edge(static_cast<NodeId>(u), r, static_cast<NodeId>(v));
        }
      }
    }
  }
  return std::move(b).build();
}

}  // namespace mps::testing
