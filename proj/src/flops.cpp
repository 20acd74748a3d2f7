#include "evonet/flops.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace evonet {

u128 op_forward_flops(const OpSpec& spec) {
  switch (spec.kind) {
    case OpKind::kElementwiseBinary:
    case OpKind::kUnary:
      return spec.out_elements;
    case OpKind::kReduction:
      return spec.in_elements;
    case OpKind::kConv:
      return u128(2) * spec.kh * spec.kw * spec.cin * spec.out_elements;
    case OpKind::kMatmul:
      return u128(2) * spec.m * spec.n * spec.k;
    case OpKind::kPooling:
      return u128(spec.window) * spec.out_elements;
    case OpKind::kBatchNorm:
      return u128(10) * spec.out_elements;
  }
  throw std::invalid_argument("unknown op kind");
}

u128 op_gradient_flops(const OpSpec& spec) {
  const int multiplier =
      (spec.kind == OpKind::kConv || spec.kind == OpKind::kMatmul) ? 2 : 1;
  return u128(multiplier) * op_forward_flops(spec);
}

u128 op_flops(const OpSpec& spec, bool include_gradient) {
  return op_forward_flops(spec) +
         (include_gradient ? op_gradient_flops(spec) : u128(0));
}

namespace {

uint64_t vertex_elements(const VertexPlan& v, int batch) {
  const uint64_t side = uint64_t(1) << v.shape.scale;
  return uint64_t(batch) * side * side * uint64_t(v.shape.depth);
}

uint64_t shape_elements(const ResolvedShape& s, int batch) {
  const uint64_t side = uint64_t(1) << s.scale;
  return uint64_t(batch) * side * side * uint64_t(s.depth);
}

}  // namespace

std::vector<TraceEntry> enumerate_model_ops(const CompiledModel& model,
                                            int batch_size, CostMode mode) {
  std::vector<TraceEntry> ops;
  auto emit = [&](OpSpec spec) { ops.push_back({spec, false}); };

  for (const auto& v : model.vertices) {
    if (v.inputs.empty()) continue;  // the input vertex
    const uint64_t elems = vertex_elements(v, batch_size);
    for (size_t ei = 0; ei < v.inputs.size(); ++ei) {
      const EdgePlan& e = v.inputs[ei];
      ResolvedShape produced = model.vertices[size_t(e.src_vertex)].shape;
      if (e.is_conv) {
        produced = e.reshape ? e.reshape->from : v.shape;
        OpSpec conv;
        conv.kind = OpKind::kConv;
        conv.kh = e.kh;
        conv.kw = e.kw;
        conv.cin = e.cin;
        conv.out_elements = shape_elements(produced, batch_size);
        emit(conv);
      }
      if (e.reshape && !e.reshape->is_noop()) {
        OpSpec reshape;
        reshape.kind = OpKind::kUnary;
        reshape.out_elements = shape_elements(e.reshape->to, batch_size);
        emit(reshape);
      }
      if (ei > 0) {
        OpSpec add;
        add.kind = OpKind::kElementwiseBinary;
        add.out_elements = elems;
        emit(add);
      }
    }
    if (v.type == VertexType::kBnRelu) {
      OpSpec bn;
      bn.kind = OpKind::kBatchNorm;
      bn.out_elements = elems;
      emit(bn);
      // relu = scale-by-leakiness then elementwise max.
      OpSpec scale;
      scale.kind = OpKind::kUnary;
      scale.out_elements = elems;
      emit(scale);
      OpSpec max_op;
      max_op.kind = OpKind::kElementwiseBinary;
      max_op.out_elements = elems;
      emit(max_op);
    }
  }

  OpSpec matmul;
  matmul.kind = OpKind::kMatmul;
  matmul.m = uint64_t(batch_size);
  matmul.k = uint64_t(model.classifier.flat_dim);
  matmul.n = uint64_t(model.classifier.num_classes);
  emit(matmul);
  OpSpec bias;
  bias.kind = OpKind::kElementwiseBinary;
  bias.out_elements = uint64_t(batch_size) * model.classifier.num_classes;
  emit(bias);

  const uint64_t logit_elems =
      uint64_t(batch_size) * model.classifier.num_classes;
  if (mode == CostMode::kTrain) {
    OpSpec softmax;
    softmax.kind = OpKind::kUnary;
    softmax.out_elements = logit_elems;
    emit(softmax);
    OpSpec loss;
    loss.kind = OpKind::kReduction;
    loss.in_elements = logit_elems;
    emit(loss);
    // Every forward op is differentiated on the way back.
    const size_t forward_count = ops.size();
    for (size_t i = forward_count; i-- > 0;)
      ops.push_back({ops[i].spec, true});
  } else {
    OpSpec argmax;
    argmax.kind = OpKind::kReduction;
    argmax.in_elements = logit_elems;
    emit(argmax);
  }
  return ops;
}

u128 model_flops(const CompiledModel& model, int batch_size, CostMode mode) {
  u128 total = 0;
  for (const auto& entry : enumerate_model_ops(model, batch_size, mode))
    total += entry.gradient ? op_gradient_flops(entry.spec)
                            : op_forward_flops(entry.spec);
  if (mode == CostMode::kTrain) {
    // Momentum update: 3 FLOPs per trainable weight element per step.
    uint64_t trainable = 0;
    for (const auto& slot : model.slots)
      if (slot.trainable) trainable += Tensor::numel_of(slot.dims);
    total += u128(3) * trainable;
  }
  return total;
}

u128 experiment_cost(const std::vector<FlopsEstimate>& ledger) {
  u128 total = 0;
  for (const auto& e : ledger) total += e.individual_cost();
  return total;
}

std::string u128_to_string(u128 v) {
  if (v == 0) return "0";
  std::string digits;
  while (v > 0) {
    digits.push_back(char('0' + int(v % 10)));
    v /= 10;
  }
  std::reverse(digits.begin(), digits.end());
  return digits;
}

u128 u128_from_string(const std::string& s) {
  u128 v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') throw std::invalid_argument("bad u128: " + s);
    v = v * 10 + u128(c - '0');
  }
  return v;
}

std::string format_scientific(u128 v) {
  const std::string digits = u128_to_string(v);
  if (digits == "0") return "0.0e0";
  int exponent = int(digits.size()) - 1;
  int d0 = digits[0] - '0';
  int d1 = digits.size() > 1 ? digits[1] - '0' : 0;
  // Round the second digit using the third.
  const int d2 = digits.size() > 2 ? digits[2] - '0' : 0;
  if (d2 >= 5) {
    if (++d1 == 10) {
      d1 = 0;
      if (++d0 == 10) {
        d0 = 1;
        ++exponent;
      }
    }
  }
  return std::to_string(d0) + "." + std::to_string(d1) + "e" +
         std::to_string(exponent);
}

std::string ledger_csv_header() {
  return "individual_id,f_t,n_t,f_v,n_v,individual_cost";
}

std::string to_csv_line(const FlopsEstimate& e) {
  std::ostringstream out;
  out << e.individual_id << "," << u128_to_string(e.f_t) << "," << e.n_t << ","
      << u128_to_string(e.f_v) << "," << e.n_v << ","
      << u128_to_string(e.individual_cost());
  return out.str();
}

FlopsEstimate ledger_from_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (fields.size() != 6) throw std::invalid_argument("bad ledger line");
  FlopsEstimate e;
  e.individual_id = fields[0];
  e.f_t = u128_from_string(fields[1]);
  e.n_t = std::stoull(fields[2]);
  e.f_v = u128_from_string(fields[3]);
  e.n_v = std::stoull(fields[4]);
  return e;
}

}  // namespace evonet
