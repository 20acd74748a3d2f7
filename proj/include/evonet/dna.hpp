#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "evonet/rng.hpp"

namespace evonet {

// The genotype: a directed acyclic graph whose vertices are activations and
// whose edges are convolutions or identity connections, plus the learning
// rate. Values are immutable by convention once published; edits copy.

enum class VertexType { kLinear, kBnRelu };
enum class EdgeType { kConv, kIdentity };

const char* to_string(VertexType t);
const char* to_string(EdgeType t);

// Backbone edges take precedence over skips when resolving shape conflicts
// at multi-input vertices.
constexpr int kBackbonePrecedence = 1;
constexpr int kSkipPrecedence = 0;

struct Vertex {
  std::set<std::string> edges_in;
  std::set<std::string> edges_out;
  VertexType type = VertexType::kLinear;
  double leakiness = 0.0;
  // Mutations never touch a flag that is off.
  bool inputs_mutable = true;
  bool outputs_mutable = true;
  bool properties_mutable = true;
};

struct Edge {
  std::string from_vertex;
  std::string to_vertex;
  EdgeType type = EdgeType::kIdentity;
  // Numeric parameters are stored as reals so that several small mutations
  // can accumulate across integer round-off. Realized values:
  //   output depth  = max(1, round(depth_factor * input depth))
  //   filter dim    = 2 * round(half) + 1   (always odd)
  //   stride        = 2 ^ round(stride_scale)
  double depth_factor = 1.0;
  double filter_half_width = 1.0;
  double filter_half_height = 1.0;
  double stride_scale = 0.0;
  int depth_precedence = kSkipPrecedence;
  int scale_precedence = kSkipPrecedence;

  bool is_backbone() const { return scale_precedence >= kBackbonePrecedence; }
};

struct Dna {
  double learning_rate = 0.1;
  double weight_decay_rate = 0.0001;
  std::map<std::string, Vertex> vertices;
  std::map<std::string, Edge> edges;
  std::string input_vertex_id;
  std::string output_vertex_id;
};

/// Spatial size 2^scale x 2^scale with `depth` channels.
struct ResolvedShape {
  int scale = 0;
  int depth = 1;
  bool operator==(const ResolvedShape&) const = default;
};

// Round half to even, like the default FP environment.
int round_half_even(double x);
int realized_filter_dim(double half);
int realized_stride(double stride_scale);
int realized_depth(double depth_factor, int input_depth);

/// The single-layer starting point: an immutable input vertex joined to an
/// immutable classifier vertex by one identity edge. learning_rate 0.1,
/// weight_decay_rate 0.0001, no convolutions.
Dna new_initial_dna(int num_classes, Rng& rng);

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};
ValidationResult validate(const Dna& dna);

enum class AddEdgeResult { kOk, kWouldCycle, kDuplicate };
/// Registers the edge in the edge map and both endpoint vertices; rejects
/// (without modifying the graph) edges that would create a cycle or
/// duplicate an existing from->to pair.
AddEdgeResult add_edge(Dna& dna, const std::string& from_id,
                       const std::string& to_id, Edge edge,
                       const std::string& edge_id);

struct NoMutableLocationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Splices (new edge, new vertex) into the backbone at `location_edge_id`:
/// the new edge runs from the location's source to the new vertex, and the
/// existing edge is re-rooted at the new vertex. Returns the new vertex id.
std::string insert_vertex_pair(Dna& dna, const std::string& location_edge_id,
                               VertexType vertex_type, Edge new_edge,
                               Rng& rng);

/// Removes an interior backbone vertex together with its incoming backbone
/// edge, re-rooting its outgoing backbone edge at the predecessor. Skip
/// edges touching the vertex are removed with it.
void excise_vertex_pair(Dna& dna, const std::string& vertex_id);

struct GraphCycleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic topological order (Kahn, lexicographic tie-break).
std::vector<std::string> topological_order(const Dna& dna);
std::optional<std::vector<std::string>> try_topological_order(const Dna& dna);

/// Input-to-output walk along backbone edges.
std::vector<std::string> backbone_path(const Dna& dna);
std::vector<std::string> backbone_edge_ids(const Dna& dna);

bool has_edge_between(const Dna& dna, const std::string& from,
                      const std::string& to);

struct MalformedDnaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// JSON document with top-level keys learning_rate, weight_decay_rate,
// input_vertex, output_vertex, vertices, edges. Reals round-trip exactly.
std::string serialize(const Dna& dna);
Dna deserialize(const std::string& bytes);

bool structurally_equal(const Dna& a, const Dna& b);

}  // namespace evonet
