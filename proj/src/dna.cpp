#include "evonet/dna.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "json.hpp"

namespace evonet {

using json = nlohmann::ordered_json;

const char* to_string(VertexType t) {
  return t == VertexType::kLinear ? "LINEAR" : "BN_RELU";
}
const char* to_string(EdgeType t) {
  return t == EdgeType::kConv ? "CONV" : "IDENTITY";
}

int round_half_even(double x) {
  // remainder(x, 1) = x - n with n the nearest integer, ties to even.
  return int(std::llround(x - std::remainder(x, 1.0)));
}

int realized_filter_dim(double half) { return 2 * round_half_even(half) + 1; }

int realized_stride(double stride_scale) {
  return 1 << round_half_even(stride_scale);
}

int realized_depth(double depth_factor, int input_depth) {
  return std::max(1, round_half_even(depth_factor * double(input_depth)));
}

Dna new_initial_dna(int num_classes, Rng& rng) {
  if (num_classes < 2)
    throw std::invalid_argument("new_initial_dna: need at least 2 classes");
  Dna dna;
  dna.learning_rate = 0.1;
  dna.weight_decay_rate = 0.0001;

  const std::string input_id = rng.hex_id();
  const std::string output_id = rng.hex_id();
  const std::string edge_id = rng.hex_id();

  Vertex input;
  input.type = VertexType::kLinear;
  input.inputs_mutable = false;
  input.outputs_mutable = true;
  input.properties_mutable = false;
  input.edges_out.insert(edge_id);

  // The classifier stage: a global flatten plus one fully-connected map to
  // the class logits, realized by the compiler. Mutations may route new
  // inputs into it but never alter the stage itself.
  Vertex output;
  output.type = VertexType::kLinear;
  output.inputs_mutable = true;
  output.outputs_mutable = false;
  output.properties_mutable = false;
  output.edges_in.insert(edge_id);

  Edge spine;
  spine.from_vertex = input_id;
  spine.to_vertex = output_id;
  spine.type = EdgeType::kIdentity;
  spine.depth_precedence = kBackbonePrecedence;
  spine.scale_precedence = kBackbonePrecedence;

  dna.vertices.emplace(input_id, std::move(input));
  dna.vertices.emplace(output_id, std::move(output));
  dna.edges.emplace(edge_id, std::move(spine));
  dna.input_vertex_id = input_id;
  dna.output_vertex_id = output_id;
  return dna;
}

std::optional<std::vector<std::string>> try_topological_order(const Dna& dna) {
  std::map<std::string, int> indegree;
  for (const auto& [id, v] : dna.vertices) indegree[id] = int(v.edges_in.size());
  std::set<std::string> ready;  // ordered: lexicographic tie-break
  for (const auto& [id, deg] : indegree)
    if (deg == 0) ready.insert(id);

  std::vector<std::string> order;
  order.reserve(dna.vertices.size());
  while (!ready.empty()) {
    const std::string id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (const auto& eid : dna.vertices.at(id).edges_out) {
      auto it = dna.edges.find(eid);
      if (it == dna.edges.end()) continue;
      if (--indegree[it->second.to_vertex] == 0)
        ready.insert(it->second.to_vertex);
    }
  }
  if (order.size() != dna.vertices.size()) return std::nullopt;
  return order;
}

std::vector<std::string> topological_order(const Dna& dna) {
  auto order = try_topological_order(dna);
  if (!order) throw GraphCycleError("cycle detected");
  return *order;
}

namespace {

bool path_exists(const Dna& dna, const std::string& from,
                 const std::string& to) {
  std::deque<std::string> queue{from};
  std::set<std::string> seen{from};
  while (!queue.empty()) {
    const std::string id = queue.front();
    queue.pop_front();
    if (id == to) return true;
    auto it = dna.vertices.find(id);
    if (it == dna.vertices.end()) continue;
    for (const auto& eid : it->second.edges_out) {
      auto e = dna.edges.find(eid);
      if (e == dna.edges.end()) continue;
      if (seen.insert(e->second.to_vertex).second)
        queue.push_back(e->second.to_vertex);
    }
  }
  return false;
}

}  // namespace

ValidationResult validate(const Dna& dna) {
  ValidationResult result;
  auto flag = [&](std::string msg) { result.violations.push_back(std::move(msg)); };

  if (!(dna.learning_rate > 0)) flag("learning_rate must be positive");
  if (dna.weight_decay_rate < 0) flag("weight_decay_rate must be non-negative");
  if (!dna.vertices.count(dna.input_vertex_id)) flag("missing input vertex");
  if (!dna.vertices.count(dna.output_vertex_id)) flag("missing output vertex");

  for (const auto& [id, v] : dna.vertices) {
    if (v.leakiness < 0 || v.leakiness > 1)
      flag("vertex " + id + ": leakiness outside [0,1]");
    for (const auto& eid : v.edges_in) {
      auto it = dna.edges.find(eid);
      if (it == dna.edges.end())
        flag("vertex " + id + ": edges_in references unknown edge " + eid);
      else if (it->second.to_vertex != id)
        flag("vertex " + id + ": edges_in does not mirror edge " + eid);
    }
    for (const auto& eid : v.edges_out) {
      auto it = dna.edges.find(eid);
      if (it == dna.edges.end())
        flag("vertex " + id + ": edges_out references unknown edge " + eid);
      else if (it->second.from_vertex != id)
        flag("vertex " + id + ": edges_out does not mirror edge " + eid);
    }
  }

  for (const auto& [id, e] : dna.edges) {
    auto from = dna.vertices.find(e.from_vertex);
    auto to = dna.vertices.find(e.to_vertex);
    if (from == dna.vertices.end() || to == dna.vertices.end()) {
      flag("edge " + id + ": endpoint vertex missing");
      continue;
    }
    if (!from->second.edges_out.count(id))
      flag("edge " + id + ": missing from from-vertex edges_out");
    if (!to->second.edges_in.count(id))
      flag("edge " + id + ": missing from to-vertex edges_in");
    if (e.type == EdgeType::kConv) {
      if (!(e.depth_factor > 0)) flag("edge " + id + ": depth_factor <= 0");
      if (e.filter_half_width < 0 || e.filter_half_height < 0)
        flag("edge " + id + ": negative filter half size");
      if (e.stride_scale < 0) flag("edge " + id + ": negative stride_scale");
      const int fw = realized_filter_dim(e.filter_half_width);
      const int fh = realized_filter_dim(e.filter_half_height);
      if (fw < 1 || fw % 2 == 0 || fh < 1 || fh % 2 == 0)
        flag("edge " + id + ": realized filter dims must be odd and >= 1");
      const int stride = realized_stride(e.stride_scale);
      if (stride < 1 || (stride & (stride - 1)) != 0)
        flag("edge " + id + ": realized stride must be a power of 2");
    }
  }

  if (!try_topological_order(dna)) flag("graph contains a cycle");

  // Every vertex must sit on some input-to-output path.
  if (dna.vertices.count(dna.input_vertex_id) &&
      dna.vertices.count(dna.output_vertex_id)) {
    for (const auto& [id, v] : dna.vertices) {
      if (!path_exists(dna, dna.input_vertex_id, id) ||
          !path_exists(dna, id, dna.output_vertex_id))
        flag("vertex " + id + ": not on an input-to-output path");
    }
    // Backbone structure: one backbone out-edge per non-output vertex, one
    // backbone in-edge per non-input vertex.
    for (const auto& [id, v] : dna.vertices) {
      int bb_out = 0, bb_in = 0;
      for (const auto& eid : v.edges_out) {
        auto it = dna.edges.find(eid);
        if (it != dna.edges.end() && it->second.is_backbone()) ++bb_out;
      }
      for (const auto& eid : v.edges_in) {
        auto it = dna.edges.find(eid);
        if (it != dna.edges.end() && it->second.is_backbone()) ++bb_in;
      }
      if (id != dna.output_vertex_id && bb_out != 1)
        flag("vertex " + id + ": expected exactly one outgoing backbone edge");
      if (id != dna.input_vertex_id && bb_in != 1)
        flag("vertex " + id + ": expected exactly one incoming backbone edge");
      if (id == dna.output_vertex_id && !v.edges_out.empty())
        flag("output vertex must not have outgoing edges");
      if (id == dna.input_vertex_id && !v.edges_in.empty())
        flag("input vertex must not have incoming edges");
    }
  }

  return result;
}

bool has_edge_between(const Dna& dna, const std::string& from,
                      const std::string& to) {
  auto it = dna.vertices.find(from);
  if (it == dna.vertices.end()) return false;
  for (const auto& eid : it->second.edges_out) {
    auto e = dna.edges.find(eid);
    if (e != dna.edges.end() && e->second.to_vertex == to) return true;
  }
  return false;
}

AddEdgeResult add_edge(Dna& dna, const std::string& from_id,
                       const std::string& to_id, Edge edge,
                       const std::string& edge_id) {
  if (!dna.vertices.count(from_id) || !dna.vertices.count(to_id))
    throw std::invalid_argument("add_edge: unknown vertex");
  if (has_edge_between(dna, from_id, to_id)) return AddEdgeResult::kDuplicate;
  // A back-connection exists iff `to` already reaches `from`.
  if (from_id == to_id || path_exists(dna, to_id, from_id))
    return AddEdgeResult::kWouldCycle;
  edge.from_vertex = from_id;
  edge.to_vertex = to_id;
  dna.edges.emplace(edge_id, std::move(edge));
  dna.vertices.at(from_id).edges_out.insert(edge_id);
  dna.vertices.at(to_id).edges_in.insert(edge_id);
  return AddEdgeResult::kOk;
}

std::vector<std::string> backbone_path(const Dna& dna) {
  std::vector<std::string> path{dna.input_vertex_id};
  std::string current = dna.input_vertex_id;
  while (current != dna.output_vertex_id) {
    const Vertex& v = dna.vertices.at(current);
    std::string next;
    for (const auto& eid : v.edges_out) {
      const Edge& e = dna.edges.at(eid);
      if (e.is_backbone()) {
        next = e.to_vertex;
        break;
      }
    }
    if (next.empty()) throw std::runtime_error("broken backbone");
    path.push_back(next);
    current = next;
    if (path.size() > dna.vertices.size())
      throw std::runtime_error("backbone walk does not terminate");
  }
  return path;
}

std::vector<std::string> backbone_edge_ids(const Dna& dna) {
  std::vector<std::string> ids;
  std::string current = dna.input_vertex_id;
  while (current != dna.output_vertex_id) {
    const Vertex& v = dna.vertices.at(current);
    bool found = false;
    for (const auto& eid : v.edges_out) {
      const Edge& e = dna.edges.at(eid);
      if (e.is_backbone()) {
        ids.push_back(eid);
        current = e.to_vertex;
        found = true;
        break;
      }
    }
    if (!found) throw std::runtime_error("broken backbone");
    if (ids.size() > dna.edges.size())
      throw std::runtime_error("backbone walk does not terminate");
  }
  return ids;
}

std::string insert_vertex_pair(Dna& dna, const std::string& location_edge_id,
                               VertexType vertex_type, Edge new_edge,
                               Rng& rng) {
  auto it = dna.edges.find(location_edge_id);
  if (it == dna.edges.end() || !it->second.is_backbone())
    throw NoMutableLocationError("insert location is not a backbone edge");
  Edge& old_edge = it->second;
  const std::string from_id = old_edge.from_vertex;

  const std::string vertex_id = rng.hex_id();
  const std::string edge_id = rng.hex_id();

  Vertex v;
  v.type = vertex_type;
  v.inputs_mutable = true;
  v.outputs_mutable = true;
  v.properties_mutable = true;
  v.edges_in.insert(edge_id);
  v.edges_out.insert(location_edge_id);

  new_edge.from_vertex = from_id;
  new_edge.to_vertex = vertex_id;
  new_edge.depth_precedence = kBackbonePrecedence;
  new_edge.scale_precedence = kBackbonePrecedence;

  dna.vertices.at(from_id).edges_out.erase(location_edge_id);
  dna.vertices.at(from_id).edges_out.insert(edge_id);
  old_edge.from_vertex = vertex_id;

  dna.vertices.emplace(vertex_id, std::move(v));
  dna.edges.emplace(edge_id, std::move(new_edge));
  return vertex_id;
}

void excise_vertex_pair(Dna& dna, const std::string& vertex_id) {
  auto vit = dna.vertices.find(vertex_id);
  if (vit == dna.vertices.end())
    throw NoMutableLocationError("unknown vertex");
  const Vertex& v = vit->second;
  if (vertex_id == dna.input_vertex_id || vertex_id == dna.output_vertex_id ||
      !v.properties_mutable)
    throw NoMutableLocationError("vertex is not a mutable backbone location");

  std::string in_edge_id, out_edge_id;
  std::vector<std::string> skip_edges;
  for (const auto& eid : v.edges_in) {
    if (dna.edges.at(eid).is_backbone())
      in_edge_id = eid;
    else
      skip_edges.push_back(eid);
  }
  for (const auto& eid : v.edges_out) {
    if (dna.edges.at(eid).is_backbone())
      out_edge_id = eid;
    else
      skip_edges.push_back(eid);
  }
  if (in_edge_id.empty() || out_edge_id.empty())
    throw NoMutableLocationError("vertex is not on the backbone");

  const std::string predecessor = dna.edges.at(in_edge_id).from_vertex;

  // Skips lose an endpoint with the vertex; drop them entirely.
  for (const auto& eid : skip_edges) {
    const Edge& e = dna.edges.at(eid);
    dna.vertices.at(e.from_vertex).edges_out.erase(eid);
    dna.vertices.at(e.to_vertex).edges_in.erase(eid);
    dna.edges.erase(eid);
  }

  dna.vertices.at(predecessor).edges_out.erase(in_edge_id);
  dna.vertices.at(predecessor).edges_out.insert(out_edge_id);
  dna.edges.at(out_edge_id).from_vertex = predecessor;
  dna.edges.erase(in_edge_id);
  dna.vertices.erase(vertex_id);
}

namespace {

json vertex_to_json(const Vertex& v) {
  json j;
  j["type"] = to_string(v.type);
  j["leakiness"] = v.leakiness;
  j["edges_in"] = std::vector<std::string>(v.edges_in.begin(), v.edges_in.end());
  j["edges_out"] =
      std::vector<std::string>(v.edges_out.begin(), v.edges_out.end());
  j["inputs_mutable"] = v.inputs_mutable;
  j["outputs_mutable"] = v.outputs_mutable;
  j["properties_mutable"] = v.properties_mutable;
  return j;
}

json edge_to_json(const Edge& e) {
  json j;
  j["from"] = e.from_vertex;
  j["to"] = e.to_vertex;
  j["type"] = to_string(e.type);
  if (e.type == EdgeType::kConv) {
    j["depth_factor"] = e.depth_factor;
    j["filter_half_width"] = e.filter_half_width;
    j["filter_half_height"] = e.filter_half_height;
    j["stride_scale"] = e.stride_scale;
  }
  j["depth_precedence"] = e.depth_precedence;
  j["scale_precedence"] = e.scale_precedence;
  return j;
}

}  // namespace

std::string serialize(const Dna& dna) {
  json j;
  j["learning_rate"] = dna.learning_rate;
  j["weight_decay_rate"] = dna.weight_decay_rate;
  j["input_vertex"] = dna.input_vertex_id;
  j["output_vertex"] = dna.output_vertex_id;
  json vs = json::object();
  for (const auto& [id, v] : dna.vertices) vs[id] = vertex_to_json(v);
  j["vertices"] = std::move(vs);
  json es = json::object();
  for (const auto& [id, e] : dna.edges) es[id] = edge_to_json(e);
  j["edges"] = std::move(es);
  return j.dump();
}

Dna deserialize(const std::string& bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw MalformedDnaError(std::string("bad json: ") + e.what());
  }
  try {
    Dna dna;
    dna.learning_rate = j.at("learning_rate").get<double>();
    dna.weight_decay_rate = j.at("weight_decay_rate").get<double>();
    dna.input_vertex_id = j.at("input_vertex").get<std::string>();
    dna.output_vertex_id = j.at("output_vertex").get<std::string>();
    for (const auto& [id, jv] : j.at("vertices").items()) {
      Vertex v;
      const std::string type = jv.at("type").get<std::string>();
      if (type == "LINEAR")
        v.type = VertexType::kLinear;
      else if (type == "BN_RELU")
        v.type = VertexType::kBnRelu;
      else
        throw MalformedDnaError("unknown vertex type " + type);
      v.leakiness = jv.at("leakiness").get<double>();
      for (const auto& e : jv.at("edges_in"))
        v.edges_in.insert(e.get<std::string>());
      for (const auto& e : jv.at("edges_out"))
        v.edges_out.insert(e.get<std::string>());
      v.inputs_mutable = jv.at("inputs_mutable").get<bool>();
      v.outputs_mutable = jv.at("outputs_mutable").get<bool>();
      v.properties_mutable = jv.at("properties_mutable").get<bool>();
      dna.vertices.emplace(id, std::move(v));
    }
    for (const auto& [id, je] : j.at("edges").items()) {
      Edge e;
      e.from_vertex = je.at("from").get<std::string>();
      e.to_vertex = je.at("to").get<std::string>();
      const std::string type = je.at("type").get<std::string>();
      if (type == "CONV") {
        e.type = EdgeType::kConv;
        e.depth_factor = je.at("depth_factor").get<double>();
        e.filter_half_width = je.at("filter_half_width").get<double>();
        e.filter_half_height = je.at("filter_half_height").get<double>();
        e.stride_scale = je.at("stride_scale").get<double>();
      } else if (type == "IDENTITY") {
        e.type = EdgeType::kIdentity;
      } else {
        throw MalformedDnaError("unknown edge type " + type);
      }
      e.depth_precedence = je.at("depth_precedence").get<int>();
      e.scale_precedence = je.at("scale_precedence").get<int>();
      dna.edges.emplace(id, std::move(e));
    }
    return dna;
  } catch (const json::exception& e) {
    throw MalformedDnaError(std::string("bad dna document: ") + e.what());
  }
}

bool structurally_equal(const Dna& a, const Dna& b) {
  if (a.learning_rate != b.learning_rate ||
      a.weight_decay_rate != b.weight_decay_rate ||
      a.input_vertex_id != b.input_vertex_id ||
      a.output_vertex_id != b.output_vertex_id ||
      a.vertices.size() != b.vertices.size() || a.edges.size() != b.edges.size())
    return false;
  for (const auto& [id, va] : a.vertices) {
    auto it = b.vertices.find(id);
    if (it == b.vertices.end()) return false;
    const Vertex& vb = it->second;
    if (va.edges_in != vb.edges_in || va.edges_out != vb.edges_out ||
        va.type != vb.type || va.leakiness != vb.leakiness ||
        va.inputs_mutable != vb.inputs_mutable ||
        va.outputs_mutable != vb.outputs_mutable ||
        va.properties_mutable != vb.properties_mutable)
      return false;
  }
  for (const auto& [id, ea] : a.edges) {
    auto it = b.edges.find(id);
    if (it == b.edges.end()) return false;
    const Edge& eb = it->second;
    if (ea.from_vertex != eb.from_vertex || ea.to_vertex != eb.to_vertex ||
        ea.type != eb.type || ea.depth_precedence != eb.depth_precedence ||
        ea.scale_precedence != eb.scale_precedence)
      return false;
    if (ea.type == EdgeType::kConv &&
        (ea.depth_factor != eb.depth_factor ||
         ea.filter_half_width != eb.filter_half_width ||
         ea.filter_half_height != eb.filter_half_height ||
         ea.stride_scale != eb.stride_scale))
      return false;
  }
  return true;
}

}  // namespace evonet
