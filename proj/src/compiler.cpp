#include "evonet/compiler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace evonet {

namespace {

int side_of(const ResolvedShape& s) { return 1 << s.scale; }

size_t elements_of(const ResolvedShape& s) {
  return size_t(side_of(s)) * size_t(side_of(s)) * size_t(s.depth);
}

}  // namespace

Tensor apply_reshape_batch(const Tensor& activations,
                           const ReshapeDirective& d) {
  const int n = activations.dim(0);
  const int from_side = side_of(d.from);
  const int to_side = side_of(d.to);
  if (activations.dim(1) != from_side || activations.dim(2) != from_side ||
      activations.dim(3) != d.from.depth)
    throw std::invalid_argument("apply_reshape: source shape mismatch");

  Tensor out({n, to_side, to_side, d.to.depth});
  const int copy_c = std::min(d.from.depth, d.to.depth);
  for (int b = 0; b < n; ++b) {
    for (int y = 0; y < to_side; ++y) {
      // Zeroth-order spatial map: replicate up, take the block's top-left
      // element down.
      const int sy = d.to.scale >= d.from.scale
                         ? y >> (d.to.scale - d.from.scale)
                         : y << (d.from.scale - d.to.scale);
      for (int x = 0; x < to_side; ++x) {
        const int sx = d.to.scale >= d.from.scale
                           ? x >> (d.to.scale - d.from.scale)
                           : x << (d.from.scale - d.to.scale);
        for (int c = 0; c < copy_c; ++c)
          out.at4(b, y, x, c) = activations.at4(b, sy, sx, c);
      }
    }
  }
  return out;
}

Tensor apply_reshape_batch_adjoint(const Tensor& gout,
                                   const ReshapeDirective& d) {
  const int n = gout.dim(0);
  const int from_side = side_of(d.from);
  const int to_side = side_of(d.to);
  Tensor gin({n, from_side, from_side, d.from.depth});
  const int copy_c = std::min(d.from.depth, d.to.depth);
  for (int b = 0; b < n; ++b) {
    for (int y = 0; y < to_side; ++y) {
      const int sy = d.to.scale >= d.from.scale
                         ? y >> (d.to.scale - d.from.scale)
                         : y << (d.from.scale - d.to.scale);
      for (int x = 0; x < to_side; ++x) {
        const int sx = d.to.scale >= d.from.scale
                           ? x >> (d.to.scale - d.from.scale)
                           : x << (d.from.scale - d.to.scale);
        for (int c = 0; c < copy_c; ++c)
          gin.at4(b, sy, sx, c) += gout.at4(b, y, x, c);
      }
    }
  }
  return gin;
}

Tensor apply_reshape(const Tensor& activations, const ReshapeDirective& d) {
  Tensor batched({1, activations.dim(0), activations.dim(1),
                  activations.dim(2)});
  std::copy(activations.data(), activations.data() + activations.numel(),
            batched.data());
  Tensor out = apply_reshape_batch(batched, d);
  Tensor squeezed({out.dim(1), out.dim(2), out.dim(3)});
  std::copy(out.data(), out.data() + out.numel(), squeezed.data());
  return squeezed;
}

std::map<std::string, ResolvedShape> resolve_shapes(
    const Dna& dna, const ResolvedShape& input_shape) {
  const auto order = topological_order(dna);
  std::map<std::string, ResolvedShape> shapes;

  for (const auto& vid : order) {
    const Vertex& v = dna.vertices.at(vid);
    if (vid == dna.input_vertex_id) {
      shapes[vid] = input_shape;
      continue;
    }
    // Shape comes from the primary (highest-precedence) incoming edge:
    // the backbone one.
    const std::string* primary = nullptr;
    auto rank_of = [&](const std::string& eid) {
      const Edge& e = dna.edges.at(eid);
      return std::make_tuple(e.scale_precedence, e.depth_precedence, eid);
    };
    for (const auto& eid : v.edges_in) {
      if (!primary || rank_of(eid) > rank_of(*primary)) primary = &eid;
    }
    if (!primary) throw UnresolvableShapeError("vertex with no inputs: " + vid);
    const Edge& e = dna.edges.at(*primary);
    const ResolvedShape src = shapes.at(e.from_vertex);
    ResolvedShape shape = src;
    if (e.type == EdgeType::kConv) {
      const int stride_log2 = round_half_even(e.stride_scale);
      shape.scale = src.scale - stride_log2;
      shape.depth = realized_depth(e.depth_factor, src.depth);
      if (shape.scale < 0)
        throw UnresolvableShapeError("stride reduces spatial size below 1x1");
    }
    shapes[vid] = shape;
  }
  return shapes;
}

CompiledModel compile(const Dna& dna, const ResolvedShape& input_shape,
                      int num_classes, const CompileOptions& options) {
  if (num_classes < 2) throw CompileError("need at least 2 classes");
  const auto order = topological_order(dna);
  const auto shapes = resolve_shapes(dna, input_shape);

  CompiledModel model;
  model.input_shape = input_shape;
  model.num_classes = num_classes;

  std::map<std::string, int> vertex_index;
  for (const auto& vid : order) vertex_index[vid] = int(vertex_index.size());

  auto add_slot = [&](WeightSlot slot) {
    size_t total = 1;
    for (int d : slot.dims) total *= size_t(d);
    if (total > options.element_cap)
      throw ModelTooLargeError("weight slot " + slot.id + " exceeds cap");
    model.slot_index[slot.id] = model.slots.size();
    model.slots.push_back(std::move(slot));
  };

  for (const auto& vid : order) {
    const Vertex& v = dna.vertices.at(vid);
    VertexPlan plan;
    plan.vertex_id = vid;
    plan.shape = shapes.at(vid);
    plan.type = v.type;
    plan.leakiness = v.leakiness;
    if (elements_of(plan.shape) > options.element_cap)
      throw ModelTooLargeError("activation at " + vid + " exceeds cap");

    if (vid != dna.input_vertex_id) {
      // Primary edge first, then the rest in id order, so the merge sums in
      // a deterministic order.
      std::vector<std::string> in_edges(v.edges_in.begin(), v.edges_in.end());
      std::stable_sort(in_edges.begin(), in_edges.end(),
                       [&](const std::string& a, const std::string& b) {
                         const Edge& ea = dna.edges.at(a);
                         const Edge& eb = dna.edges.at(b);
                         return std::make_tuple(-ea.scale_precedence,
                                                -ea.depth_precedence, a) <
                                std::make_tuple(-eb.scale_precedence,
                                                -eb.depth_precedence, b);
                       });
      const double init_scale = 1.0 / std::sqrt(double(in_edges.size()));
      for (const auto& eid : in_edges) {
        const Edge& e = dna.edges.at(eid);
        EdgePlan ep;
        ep.edge_id = eid;
        ep.src_vertex = vertex_index.at(e.from_vertex);
        ep.init_scale = init_scale;
        const ResolvedShape src = shapes.at(e.from_vertex);
        ResolvedShape produced = src;
        if (e.type == EdgeType::kConv) {
          ep.is_conv = true;
          ep.kh = realized_filter_dim(e.filter_half_height);
          ep.kw = realized_filter_dim(e.filter_half_width);
          ep.cin = src.depth;
          ep.cout = realized_depth(e.depth_factor, src.depth);
          ep.stride = realized_stride(e.stride_scale);
          ep.filters_slot = "conv_filters:" + eid;
          produced.scale = src.scale - round_half_even(e.stride_scale);
          produced.depth = ep.cout;
          add_slot({ep.filters_slot,
                    SlotKind::kConvFilters,
                    {ep.kh, ep.kw, ep.cin, ep.cout},
                    init_scale,
                    true});
        }
        if (!(produced == plan.shape))
          ep.reshape = ReshapeDirective{produced, plan.shape};
        plan.inputs.push_back(std::move(ep));
      }
    }

    if (v.type == VertexType::kBnRelu) {
      const int c = plan.shape.depth;
      plan.bn_scale_slot = "bn_scale:" + vid;
      plan.bn_shift_slot = "bn_shift:" + vid;
      plan.bn_mean_slot = "bn_moving_mean:" + vid;
      plan.bn_var_slot = "bn_moving_var:" + vid;
      add_slot({plan.bn_scale_slot, SlotKind::kBnScale, {c}, 1.0, true});
      add_slot({plan.bn_shift_slot, SlotKind::kBnShift, {c}, 1.0, true});
      add_slot({plan.bn_mean_slot, SlotKind::kBnMovingMean, {c}, 1.0, false});
      add_slot({plan.bn_var_slot, SlotKind::kBnMovingVar, {c}, 1.0, false});
    }
    model.vertices.push_back(std::move(plan));
  }

  // Immutable classifier stage: flatten the output vertex and map to logits.
  const ResolvedShape out_shape = shapes.at(dna.output_vertex_id);
  ClassifierPlan& cls = model.classifier;
  cls.flat_dim = int(elements_of(out_shape));
  cls.num_classes = num_classes;
  cls.weights_slot = "fc_weights:" + dna.output_vertex_id;
  cls.bias_slot = "fc_bias:" + dna.output_vertex_id;
  cls.init_scale = 1.0;
  add_slot({cls.weights_slot,
            SlotKind::kFcWeights,
            {cls.flat_dim, num_classes},
            cls.init_scale,
            true});
  add_slot({cls.bias_slot, SlotKind::kFcBias, {num_classes}, 1.0, true});
  return model;
}

size_t CompiledModel::weight_elements() const {
  size_t total = 0;
  for (const auto& slot : slots) total += Tensor::numel_of(slot.dims);
  return total;
}

std::string describe(const CompiledModel& model) {
  std::ostringstream out;
  auto shape_str = [](const ResolvedShape& s) {
    std::ostringstream ss;
    ss << (1 << s.scale) << "x" << (1 << s.scale) << "x" << s.depth;
    return ss.str();
  };
  for (size_t i = 0; i < model.vertices.size(); ++i) {
    const VertexPlan& v = model.vertices[i];
    for (const auto& e : v.inputs) {
      out << "  edge " << e.edge_id.substr(0, 8) << " from v" << e.src_vertex
          << ": ";
      if (e.is_conv)
        out << "conv " << e.kh << "x" << e.kw << "x" << e.cin << "->" << e.cout
            << " stride " << e.stride;
      else
        out << "identity";
      if (e.reshape && !e.reshape->is_noop())
        out << " reshape " << shape_str(e.reshape->from) << "->"
            << shape_str(e.reshape->to);
      out << "\n";
    }
    out << "v" << i << " " << v.vertex_id.substr(0, 8) << " "
        << shape_str(v.shape) << " " << to_string(v.type) << "\n";
  }
  out << "classifier: flatten " << model.classifier.flat_dim << " -> fc "
      << model.classifier.num_classes << "\n";
  return out.str();
}

}  // namespace evonet
