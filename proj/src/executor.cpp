#include "evonet/executor.hpp"

#include <stdexcept>

namespace evonet {

namespace {

uint64_t shape_elems(const ResolvedShape& s, int batch) {
  const uint64_t side = uint64_t(1) << s.scale;
  return uint64_t(batch) * side * side * uint64_t(s.depth);
}

void check_shape(const Tensor& t, const ResolvedShape& s,
                 const std::string& where) {
  const int side = 1 << s.scale;
  if (t.rank() != 4 || t.dim(1) != side || t.dim(2) != side ||
      t.dim(3) != s.depth)
    throw std::logic_error("activation shape mismatch at " + where + ": got " +
                           Tensor::shape_string(t.dims()));
}

void trace_op(OpTrace* trace, OpSpec spec, bool gradient) {
  if (trace) trace->push_back({spec, gradient});
}

OpSpec unary_spec(uint64_t elems) {
  OpSpec s;
  s.kind = OpKind::kUnary;
  s.out_elements = elems;
  return s;
}

OpSpec binary_spec(uint64_t elems) {
  OpSpec s;
  s.kind = OpKind::kElementwiseBinary;
  s.out_elements = elems;
  return s;
}

OpSpec reduction_spec(uint64_t elems) {
  OpSpec s;
  s.kind = OpKind::kReduction;
  s.in_elements = elems;
  return s;
}

OpSpec conv_spec(const EdgePlan& e, uint64_t out_elems) {
  OpSpec s;
  s.kind = OpKind::kConv;
  s.kh = e.kh;
  s.kw = e.kw;
  s.cin = e.cin;
  s.out_elements = out_elems;
  return s;
}

OpSpec matmul_spec(uint64_t m, uint64_t k, uint64_t n) {
  OpSpec s;
  s.kind = OpKind::kMatmul;
  s.m = m;
  s.k = k;
  s.n = n;
  return s;
}

}  // namespace

Tensor Executor::forward(const Tensor& images, WeightBundle& weights,
                         bool training, OpTrace* trace) {
  batch_ = images.dim(0);
  states_.assign(model_.vertices.size(), VertexState{});
  check_shape(images, model_.input_shape, "input");

  for (size_t vi = 0; vi < model_.vertices.size(); ++vi) {
    const VertexPlan& plan = model_.vertices[vi];
    VertexState& state = states_[vi];
    const int side = 1 << plan.shape.scale;

    if (plan.inputs.empty()) {
      state.merged = images;
    } else {
      state.merged = Tensor({batch_, side, side, plan.shape.depth});
      bool first = true;
      for (const auto& e : plan.inputs) {
        const Tensor& src = states_[size_t(e.src_vertex)].out;
        Tensor produced;
        if (e.is_conv) {
          const Tensor& filters = weights.at(e.filters_slot);
          produced = ops::conv2d_forward(src, filters, e.stride);
          trace_op(trace, conv_spec(e, produced.numel()), false);
        } else {
          produced = src;
        }
        if (e.reshape && !e.reshape->is_noop()) {
          produced = apply_reshape_batch(produced, *e.reshape);
          trace_op(trace, unary_spec(produced.numel()), false);
        }
        if (first) {
          state.merged = std::move(produced);
          first = false;
        } else {
          ops::add_in_place(state.merged, produced);
          trace_op(trace, binary_spec(state.merged.numel()), false);
        }
      }
    }
    check_shape(state.merged, plan.shape, "vertex " + plan.vertex_id);

    if (plan.type == VertexType::kBnRelu) {
      state.bn_out = ops::batch_norm_forward(
          state.merged, weights.at(plan.bn_scale_slot),
          weights.at(plan.bn_shift_slot), weights.at(plan.bn_mean_slot),
          weights.at(plan.bn_var_slot), training, &state.bn_state);
      trace_op(trace, [&] {
        OpSpec s;
        s.kind = OpKind::kBatchNorm;
        s.out_elements = state.bn_out.numel();
        return s;
      }(), false);
      state.out = ops::relu_forward(state.bn_out, float(plan.leakiness));
      trace_op(trace, unary_spec(state.out.numel()), false);
      trace_op(trace, binary_spec(state.out.numel()), false);
    } else {
      state.out = state.merged;
    }
  }

  // Classifier: flatten then one fully-connected map.
  const Tensor& last = states_.back().out;
  flat_input_ = Tensor({batch_, model_.classifier.flat_dim});
  std::copy(last.data(), last.data() + last.numel(), flat_input_.data());
  Tensor logits =
      ops::fc_forward(flat_input_, weights.at(model_.classifier.weights_slot),
                      weights.at(model_.classifier.bias_slot));
  trace_op(trace,
           matmul_spec(uint64_t(batch_), uint64_t(model_.classifier.flat_dim),
                       uint64_t(model_.classifier.num_classes)),
           false);
  trace_op(trace, binary_spec(logits.numel()), false);

  const uint64_t logit_elems = logits.numel();
  if (training) {
    // The loss that follows: softmax then the cross-entropy reduction.
    trace_op(trace, unary_spec(logit_elems), false);
    trace_op(trace, reduction_spec(logit_elems), false);
  } else {
    trace_op(trace, reduction_spec(logit_elems), false);
  }
  return logits;
}

std::map<std::string, Tensor> Executor::backward(const Tensor& dlogits,
                                                 const WeightBundle& weights,
                                                 OpTrace* trace) {
  std::map<std::string, Tensor> grads;
  const uint64_t logit_elems = dlogits.numel();
  // Loss gradient ops, mirroring the forward's softmax + reduction.
  trace_op(trace, reduction_spec(logit_elems), true);
  trace_op(trace, unary_spec(logit_elems), true);

  // Classifier.
  auto fc = ops::fc_backward(
      flat_input_, weights.at(model_.classifier.weights_slot), dlogits);
  trace_op(trace, binary_spec(logit_elems), true);
  trace_op(trace,
           matmul_spec(uint64_t(batch_), uint64_t(model_.classifier.flat_dim),
                       uint64_t(model_.classifier.num_classes)),
           true);
  grads[model_.classifier.weights_slot] = std::move(fc.weights);
  grads[model_.classifier.bias_slot] = std::move(fc.bias);

  std::vector<Tensor> gout(model_.vertices.size());
  {
    const VertexPlan& last = model_.vertices.back();
    const int side = 1 << last.shape.scale;
    Tensor g({batch_, side, side, last.shape.depth});
    std::copy(fc.input.data(), fc.input.data() + fc.input.numel(), g.data());
    gout.back() = std::move(g);
  }

  for (size_t vi = model_.vertices.size(); vi-- > 0;) {
    const VertexPlan& plan = model_.vertices[vi];
    if (plan.inputs.empty()) continue;  // input vertex: nothing upstream
    VertexState& state = states_[vi];
    Tensor g_merged;
    if (plan.type == VertexType::kBnRelu) {
      // relu backward (mirrors the unary + binary forward pair).
      Tensor g_bn = ops::relu_backward(state.bn_out, gout[vi],
                                       float(plan.leakiness));
      trace_op(trace, binary_spec(g_bn.numel()), true);
      trace_op(trace, unary_spec(g_bn.numel()), true);
      auto bn = ops::batch_norm_backward(state.bn_state,
                                         weights.at(plan.bn_scale_slot), g_bn);
      trace_op(trace, [&] {
        OpSpec s;
        s.kind = OpKind::kBatchNorm;
        s.out_elements = g_bn.numel();
        return s;
      }(), true);
      grads[plan.bn_scale_slot] = std::move(bn.scale);
      grads[plan.bn_shift_slot] = std::move(bn.shift);
      g_merged = std::move(bn.input);
    } else {
      g_merged = std::move(gout[vi]);
    }

    // Walk the edges in reverse so the trace mirrors the forward order.
    for (size_t ei = plan.inputs.size(); ei-- > 0;) {
      const EdgePlan& e = plan.inputs[ei];
      if (ei > 0) trace_op(trace, binary_spec(g_merged.numel()), true);
      Tensor g_produced = g_merged;  // every summand gets the full gradient
      if (e.reshape && !e.reshape->is_noop()) {
        g_produced = apply_reshape_batch_adjoint(g_produced, *e.reshape);
        trace_op(trace,
                 unary_spec(shape_elems(e.reshape->to, batch_)), true);
      }
      Tensor& src_g = gout[size_t(e.src_vertex)];
      const Tensor& src_out = states_[size_t(e.src_vertex)].out;
      if (src_g.numel() == 0) src_g = Tensor(src_out.dims());
      if (e.is_conv) {
        const ResolvedShape produced_shape =
            e.reshape ? e.reshape->from : plan.shape;
        auto conv = ops::conv2d_backward(src_out, weights.at(e.filters_slot),
                                         e.stride, g_produced);
        trace_op(trace, conv_spec(e, shape_elems(produced_shape, batch_)),
                 true);
        grads[e.filters_slot] = std::move(conv.filters);
        ops::add_in_place(src_g, conv.input);
      } else {
        ops::add_in_place(src_g, g_produced);
      }
    }
  }
  return grads;
}

double loss_forward(const Tensor& logits, const std::vector<int>& labels,
                    Tensor* dlogits) {
  return ops::softmax_cross_entropy(logits, labels, dlogits);
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const int n = logits.dim(0);
  const int k = logits.dim(1);
  std::vector<int> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const float* row = logits.data() + size_t(i) * k;
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (row[j] > row[best]) best = j;
    out[size_t(i)] = best;
  }
  return out;
}

}  // namespace evonet
