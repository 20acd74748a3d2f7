#include "evonet/mutation.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace evonet {

namespace {

constexpr std::array<const char*, kMutationKindCount> kKindNames = {
    "ALTER_LEARNING_RATE", "IDENTITY",       "RESET_WEIGHTS",
    "INSERT_CONVOLUTION",  "REMOVE_CONVOLUTION", "ALTER_STRIDE",
    "ALTER_CHANNELS",      "FILTER_SIZE",    "INSERT_ONE_TO_ONE",
    "ADD_SKIP",            "REMOVE_SKIP"};

std::vector<std::string> conv_edge_ids(const Dna& dna) {
  std::vector<std::string> ids;
  for (const auto& [id, e] : dna.edges)
    if (e.type == EdgeType::kConv) ids.push_back(id);
  return ids;
}

const std::string& pick(const std::vector<std::string>& ids, Rng& rng) {
  return ids[size_t(rng.index(ids.size()))];
}

Dna insert_backbone_vertex(const Dna& parent, EdgeType edge_type, Rng& rng) {
  Dna child = parent;
  const auto locations = backbone_edge_ids(child);
  const std::string& location = pick(locations, rng);

  Edge edge;
  edge.type = edge_type;
  if (edge_type == EdgeType::kConv) {
    // 3x3 filters, stride 1 or 2 at random, output depth equal to input.
    edge.filter_half_width = 1.0;
    edge.filter_half_height = 1.0;
    edge.depth_factor = 1.0;
    edge.stride_scale = rng.coin() ? 1.0 : 0.0;
  }
  const VertexType vtype =
      rng.coin() ? VertexType::kBnRelu : VertexType::kLinear;
  insert_vertex_pair(child, location, vtype, edge, rng);
  return child;
}

}  // namespace

const char* to_string(MutationKind kind) {
  return kKindNames[size_t(kind)];
}

MutationKind mutation_kind_from_string(const std::string& name) {
  for (int i = 0; i < kMutationKindCount; ++i)
    if (name == kKindNames[size_t(i)]) return MutationKind(i);
  throw std::invalid_argument("unknown mutation kind " + name);
}

const char* to_string(WeightAction action) {
  switch (action) {
    case WeightAction::kInheritAll:
      return "INHERIT_ALL";
    case WeightAction::kInheritNone:
      return "INHERIT_NONE";
    default:
      return "INHERIT_MATCHING";
  }
}

WeightAction weight_action_from_string(const std::string& name) {
  if (name == "INHERIT_ALL") return WeightAction::kInheritAll;
  if (name == "INHERIT_NONE") return WeightAction::kInheritNone;
  if (name == "INHERIT_MATCHING") return WeightAction::kInheritMatching;
  throw std::invalid_argument("unknown weight action " + name);
}

MutationKind sample_mutation_kind(Rng& rng) {
  return MutationKind(rng.index(kMutationKindCount));
}

double sample_half_to_twice(double value, Rng& rng) {
  if (value == 0.0) return 0.0;
  return rng.uniform(value / 2.0, 2.0 * value);
}

namespace {

WeightAction action_for(MutationKind kind) {
  switch (kind) {
    case MutationKind::kIdentity:
    case MutationKind::kAlterLearningRate:
      return WeightAction::kInheritAll;
    case MutationKind::kResetWeights:
      return WeightAction::kInheritNone;
    default:
      return WeightAction::kInheritMatching;
  }
}

}  // namespace

MutationOutcome apply_mutation(const Dna& parent, MutationKind kind,
                               Rng& rng) {
  MutationOutcome outcome;
  outcome.kind = kind;
  outcome.weight_action = action_for(kind);

  switch (kind) {
    case MutationKind::kAlterLearningRate: {
      outcome.child = parent;
      // Factor between 0.5 and 2.0, uniform in log scale.
      const double factor = std::pow(2.0, rng.uniform(-1.0, 1.0));
      outcome.child.learning_rate = parent.learning_rate * factor;
      break;
    }
    case MutationKind::kIdentity:
    case MutationKind::kResetWeights: {
      outcome.child = parent;
      break;
    }
    case MutationKind::kInsertConvolution: {
      outcome.child = insert_backbone_vertex(parent, EdgeType::kConv, rng);
      break;
    }
    case MutationKind::kInsertOneToOne: {
      outcome.child = insert_backbone_vertex(parent, EdgeType::kIdentity, rng);
      break;
    }
    case MutationKind::kRemoveConvolution: {
      std::vector<std::string> candidates;
      for (const auto& [id, e] : parent.edges) {
        if (e.type != EdgeType::kConv || !e.is_backbone()) continue;
        const Vertex& v = parent.vertices.at(e.to_vertex);
        if (v.properties_mutable) candidates.push_back(id);
      }
      if (candidates.empty())
        throw MutationInapplicable("no removable convolution");
      outcome.child = parent;
      const std::string& edge_id = pick(candidates, rng);
      excise_vertex_pair(outcome.child,
                         outcome.child.edges.at(edge_id).to_vertex);
      break;
    }
    case MutationKind::kAlterStride: {
      const auto convs = conv_edge_ids(parent);
      if (convs.empty()) throw MutationInapplicable("no convolution");
      outcome.child = parent;
      Edge& e = outcome.child.edges.at(pick(convs, rng));
      // The stored value is already the log-base-2 of the stride.
      e.stride_scale = sample_half_to_twice(e.stride_scale, rng);
      break;
    }
    case MutationKind::kAlterChannels: {
      const auto convs = conv_edge_ids(parent);
      if (convs.empty()) throw MutationInapplicable("no convolution");
      outcome.child = parent;
      Edge& e = outcome.child.edges.at(pick(convs, rng));
      e.depth_factor = sample_half_to_twice(e.depth_factor, rng);
      break;
    }
    case MutationKind::kFilterSize: {
      const auto convs = conv_edge_ids(parent);
      if (convs.empty()) throw MutationInapplicable("no convolution");
      outcome.child = parent;
      Edge& e = outcome.child.edges.at(pick(convs, rng));
      if (rng.coin())
        e.filter_half_width = sample_half_to_twice(e.filter_half_width, rng);
      else
        e.filter_half_height = sample_half_to_twice(e.filter_half_height, rng);
      break;
    }
    case MutationKind::kAddSkip: {
      const auto path = backbone_path(parent);
      // Forward-only pairs along the backbone can never create a cycle.
      std::vector<std::pair<size_t, size_t>> pairs;
      for (size_t i = 0; i < path.size(); ++i) {
        if (!parent.vertices.at(path[i]).outputs_mutable) continue;
        for (size_t j = i + 1; j < path.size(); ++j) {
          if (!parent.vertices.at(path[j]).inputs_mutable) continue;
          if (has_edge_between(parent, path[i], path[j])) continue;
          pairs.emplace_back(i, j);
        }
      }
      if (pairs.empty()) throw MutationInapplicable("no legal skip pair");
      const auto [i, j] = pairs[size_t(rng.index(pairs.size()))];
      outcome.child = parent;
      Edge skip;
      skip.type = EdgeType::kIdentity;
      skip.depth_precedence = kSkipPrecedence;
      skip.scale_precedence = kSkipPrecedence;
      const auto result =
          add_edge(outcome.child, path[i], path[j], skip, rng.hex_id());
      if (result != AddEdgeResult::kOk)
        throw MutationInapplicable("skip rejected");
      break;
    }
    case MutationKind::kRemoveSkip: {
      std::vector<std::string> skips;
      for (const auto& [id, e] : parent.edges)
        if (!e.is_backbone()) skips.push_back(id);
      if (skips.empty()) throw MutationInapplicable("no skip edges");
      outcome.child = parent;
      const std::string& edge_id = pick(skips, rng);
      const Edge& e = outcome.child.edges.at(edge_id);
      outcome.child.vertices.at(e.from_vertex).edges_out.erase(edge_id);
      outcome.child.vertices.at(e.to_vertex).edges_in.erase(edge_id);
      outcome.child.edges.erase(edge_id);
      break;
    }
  }
  return outcome;
}

WeightAction compose_weight_actions(const std::vector<MutationKind>& kinds) {
  bool all_preserve = true;
  for (const auto kind : kinds) {
    const WeightAction a = action_for(kind);
    if (a == WeightAction::kInheritNone) return WeightAction::kInheritNone;
    if (a != WeightAction::kInheritAll) all_preserve = false;
  }
  return all_preserve ? WeightAction::kInheritAll
                      : WeightAction::kInheritMatching;
}

ReproduceResult reproduce(const Dna& parent, int mutation_count, Rng& rng) {
  if (mutation_count < 1)
    throw std::invalid_argument("mutation_count must be >= 1");
  ReproduceResult result;
  result.child = parent;
  int consecutive_failures = 0;
  while (int(result.kinds.size()) < mutation_count) {
    const MutationKind kind = sample_mutation_kind(rng);
    try {
      MutationOutcome outcome = apply_mutation(result.child, kind, rng);
      result.child = std::move(outcome.child);
      result.kinds.push_back(kind);
      consecutive_failures = 0;
    } catch (const MutationInapplicable&) {
      if (++consecutive_failures >= 100)
        throw RetriesExhausted("100 consecutive inapplicable mutations");
    }
  }
  result.weight_action = compose_weight_actions(result.kinds);
  return result;
}

}  // namespace evonet
