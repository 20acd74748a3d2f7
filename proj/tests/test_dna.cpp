#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "evonet/dna.hpp"
#include "evonet/mutation.hpp"
#include "test_util.hpp"

using namespace evonet;

namespace {

int conv_count(const Dna& dna) {
  int n = 0;
  for (const auto& [id, e] : dna.edges)
    if (e.type == EdgeType::kConv) ++n;
  return n;
}

}  // namespace

TEST_CASE("initial dna: single-layer model with no convolutions") {
  Rng rng(1);
  const Dna dna = new_initial_dna(10, rng);
  CHECK(dna.learning_rate == doctest::Approx(0.1));
  CHECK(dna.weight_decay_rate == doctest::Approx(0.0001));
  CHECK(conv_count(dna) == 0);
  CHECK(dna.vertices.size() == 2);
  CHECK(dna.edges.size() == 1);
  CHECK(validate(dna).ok());

  const Vertex& input = dna.vertices.at(dna.input_vertex_id);
  CHECK_FALSE(input.properties_mutable);
  CHECK_FALSE(input.inputs_mutable);
  const Vertex& output = dna.vertices.at(dna.output_vertex_id);
  CHECK_FALSE(output.properties_mutable);
  CHECK_FALSE(output.outputs_mutable);

  // Only the classifier width changes with the class count; topology is
  // identical.
  Rng rng2(2);
  const Dna dna100 = new_initial_dna(100, rng2);
  CHECK(dna100.vertices.size() == dna.vertices.size());
  CHECK(dna100.edges.size() == dna.edges.size());
  CHECK(validate(dna100).ok());

  CHECK_THROWS_AS(new_initial_dna(1, rng), std::invalid_argument);
}

TEST_CASE("validate flags cycles, bad references and bad parameters") {
  Rng rng(3);
  Dna dna = new_initial_dna(10, rng);

  SUBCASE("cycle") {
    Dna bad = dna;
    Edge back;
    back.from_vertex = bad.output_vertex_id;
    back.to_vertex = bad.input_vertex_id;
    back.type = EdgeType::kIdentity;
    bad.edges.emplace("backedge", back);
    bad.vertices.at(bad.output_vertex_id).edges_out.insert("backedge");
    bad.vertices.at(bad.input_vertex_id).edges_in.insert("backedge");
    const auto result = validate(bad);
    CHECK_FALSE(result.ok());
    bool found_cycle = false;
    for (const auto& v : result.violations)
      if (v.find("cycle") != std::string::npos) found_cycle = true;
    CHECK(found_cycle);
  }

  SUBCASE("negative filter half width breaks the odd>=1 realization") {
    Dna bad = dna;
    while (conv_count(bad) == 0) {
      auto out = reproduce(bad, 1, rng);
      bad = out.child;
    }
    for (auto& [id, e] : bad.edges)
      if (e.type == EdgeType::kConv) e.filter_half_width = -0.75;
    CHECK_FALSE(validate(bad).ok());
  }

  SUBCASE("dangling edge reference") {
    Dna bad = dna;
    bad.vertices.at(bad.input_vertex_id).edges_out.insert("ghost");
    CHECK_FALSE(validate(bad).ok());
  }

  SUBCASE("non-positive learning rate") {
    Dna bad = dna;
    bad.learning_rate = 0.0;
    CHECK_FALSE(validate(bad).ok());
  }
}

TEST_CASE("add_edge: skips forward, rejects back-connections and duplicates") {
  Rng rng(4);
  Dna dna = new_initial_dna(10, rng);
  Edge conv;
  conv.type = EdgeType::kConv;
  insert_vertex_pair(dna, backbone_edge_ids(dna)[0], VertexType::kBnRelu, conv,
                     rng);
  REQUIRE(validate(dna).ok());
  const auto path = backbone_path(dna);
  REQUIRE(path.size() == 3);

  Edge skip;
  skip.type = EdgeType::kIdentity;
  SUBCASE("valid forward skip") {
    CHECK(add_edge(dna, path[0], path[2], skip, "skip1") == AddEdgeResult::kOk);
    CHECK(validate(dna).ok());
    CHECK(dna.edges.count("skip1") == 1);
  }
  SUBCASE("back-connection rejected") {
    CHECK(add_edge(dna, path[2], path[0], skip, "skip2") ==
          AddEdgeResult::kWouldCycle);
    CHECK(dna.edges.count("skip2") == 0);
    CHECK(validate(dna).ok());
  }
  SUBCASE("duplicate rejected") {
    REQUIRE(add_edge(dna, path[0], path[2], skip, "skip3") ==
            AddEdgeResult::kOk);
    CHECK(add_edge(dna, path[0], path[2], skip, "skip4") ==
          AddEdgeResult::kDuplicate);
    CHECK(dna.edges.count("skip4") == 0);
  }
}

TEST_CASE("insert and excise vertex pairs keep the graph valid") {
  Rng rng(5);
  Dna dna = new_initial_dna(10, rng);
  const size_t initial_vertices = dna.vertices.size();

  Edge conv;
  conv.type = EdgeType::kConv;
  conv.stride_scale = 0.0;
  const std::string vertex_id = insert_vertex_pair(
      dna, backbone_edge_ids(dna)[0], VertexType::kLinear, conv, rng);
  CHECK(dna.vertices.size() == initial_vertices + 1);
  CHECK(validate(dna).ok());
  CHECK(backbone_path(dna).size() == 3);

  // Excising the only convolution returns to the initial topology.
  excise_vertex_pair(dna, vertex_id);
  CHECK(dna.vertices.size() == initial_vertices);
  CHECK(conv_count(dna) == 0);
  CHECK(validate(dna).ok());
  CHECK(backbone_path(dna).size() == 2);

  // Input/output stages are not mutable locations.
  CHECK_THROWS_AS(excise_vertex_pair(dna, dna.input_vertex_id),
                  NoMutableLocationError);
  CHECK_THROWS_AS(excise_vertex_pair(dna, dna.output_vertex_id),
                  NoMutableLocationError);
}

TEST_CASE("excise drops skips touching the removed vertex") {
  Rng rng(6);
  Dna dna = new_initial_dna(10, rng);
  Edge conv;
  conv.type = EdgeType::kConv;
  const std::string v1 = insert_vertex_pair(dna, backbone_edge_ids(dna)[0],
                                            VertexType::kBnRelu, conv, rng);
  insert_vertex_pair(dna, backbone_edge_ids(dna)[0], VertexType::kLinear, conv,
                     rng);
  REQUIRE(validate(dna).ok());
  Edge skip;
  REQUIRE(add_edge(dna, dna.input_vertex_id, v1, skip, "s1") ==
          AddEdgeResult::kOk);
  REQUIRE(validate(dna).ok());
  excise_vertex_pair(dna, v1);
  CHECK(dna.edges.count("s1") == 0);
  CHECK(validate(dna).ok());
}

TEST_CASE("topological order is deterministic and edge-consistent") {
  Rng rng(7);
  Dna dna = new_initial_dna(10, rng);
  Edge conv;
  conv.type = EdgeType::kConv;
  insert_vertex_pair(dna, backbone_edge_ids(dna)[0], VertexType::kBnRelu, conv,
                     rng);
  insert_vertex_pair(dna, backbone_edge_ids(dna)[0], VertexType::kLinear, conv,
                     rng);
  const auto path = backbone_path(dna);
  const auto chain_order = topological_order(dna);

  Edge skip;
  REQUIRE(add_edge(dna, path[0], path[2], skip, "skip") == AddEdgeResult::kOk);

  const auto order = topological_order(dna);
  CHECK(order == chain_order);  // the skip does not change the order
  CHECK(order.size() == dna.vertices.size());
  std::map<std::string, size_t> position;
  for (size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
  for (const auto& [id, e] : dna.edges)
    CHECK(position.at(e.from_vertex) < position.at(e.to_vertex));

  Dna cyclic = dna;
  Edge back;
  back.from_vertex = path[2];
  back.to_vertex = path[0];
  cyclic.edges.emplace("back", back);
  cyclic.vertices.at(path[2]).edges_out.insert("back");
  cyclic.vertices.at(path[0]).edges_in.insert("back");
  CHECK_THROWS_AS(topological_order(cyclic), GraphCycleError);
  CHECK_FALSE(try_topological_order(cyclic).has_value());
}

TEST_CASE("serialization round-trips bit-exactly") {
  Rng rng(8);
  const Dna initial = new_initial_dna(10, rng);
  CHECK(structurally_equal(deserialize(serialize(initial)), initial));

  // 1000 random mutated DNAs round-trip structurally identical, stored
  // reals included.
  for (int i = 0; i < 1000; ++i) {
    const Dna dna = testutil::random_evolved_dna(i % 12, rng);
    const Dna back = deserialize(serialize(dna));
    REQUIRE(structurally_equal(back, dna));
  }

  const std::string bytes = serialize(initial);
  CHECK_THROWS_AS(deserialize(bytes.substr(0, bytes.size() / 2)),
                  MalformedDnaError);
  CHECK_THROWS_AS(deserialize("not json at all"), MalformedDnaError);
  CHECK_THROWS_AS(deserialize("{}"), MalformedDnaError);
}

TEST_CASE("property: random edge-add sequences never create cycles") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    Dna dna = testutil::random_evolved_dna(6, rng);
    for (int i = 0; i < 20; ++i) {
      const auto path = backbone_path(dna);
      const size_t a = size_t(rng.index(path.size()));
      const size_t b = size_t(rng.index(path.size()));
      Edge skip;
      add_edge(dna, path[a], path[b], skip, rng.hex_id());
      REQUIRE(try_topological_order(dna).has_value());
    }
  }
}

TEST_CASE("realization rules") {
  CHECK(realized_filter_dim(1.0) == 3);
  CHECK(realized_filter_dim(0.4) == 1);
  CHECK(realized_filter_dim(1.6) == 5);
  CHECK(realized_stride(0.0) == 1);
  CHECK(realized_stride(1.0) == 2);
  CHECK(realized_stride(1.49) == 2);
  CHECK(realized_stride(2.0) == 4);
  CHECK(realized_depth(1.0, 16) == 16);
  CHECK(realized_depth(0.01, 16) == 1);  // floor at one channel
  CHECK(realized_depth(2.0, 5) == 10);
  // Round half to even.
  CHECK(round_half_even(2.5) == 2);
  CHECK(round_half_even(3.5) == 4);
  CHECK(round_half_even(-2.5) == -2);
}
