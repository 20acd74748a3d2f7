#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evonet/dna.hpp"
#include "evonet/tensor.hpp"

namespace evonet {

struct CompileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Strides reduced the spatial size below 1x1: the architecture cannot train.
struct UnresolvableShapeError : CompileError {
  using CompileError::CompileError;
};
/// An activation or weight tensor exceeds the element cap.
struct ModelTooLargeError : CompileError {
  using CompileError::CompileError;
};

/// Maps a non-primary input onto the vertex's resolved shape: zeroth-order
/// interpolation spatially, zero-padding or truncation on channels.
struct ReshapeDirective {
  ResolvedShape from;
  ResolvedShape to;
  bool is_noop() const { return from == to; }
};

/// Nearest-neighbor up, top-left strided subsample down; channels pad with
/// trailing zeros or drop trailing. Input is a rank-3 (h, w, c) tensor.
Tensor apply_reshape(const Tensor& activations, const ReshapeDirective& d);
/// Batched variant over rank-4 (n, h, w, c).
Tensor apply_reshape_batch(const Tensor& activations,
                           const ReshapeDirective& d);
Tensor apply_reshape_batch_adjoint(const Tensor& gout,
                                   const ReshapeDirective& d);

enum class SlotKind {
  kConvFilters,
  kBnScale,
  kBnShift,
  kBnMovingMean,
  kBnMovingVar,
  kFcWeights,
  kFcBias,
};

struct WeightSlot {
  std::string id;
  SlotKind kind;
  std::vector<int> dims;
  double init_scale = 1.0;
  bool trainable = true;  // moving stats are updated, not trained
};

struct EdgePlan {
  std::string edge_id;
  int src_vertex = 0;  // index into CompiledModel::vertices
  bool is_conv = false;
  int kh = 0, kw = 0, cin = 0, cout = 0, stride = 1;
  std::string filters_slot;
  double init_scale = 1.0;
  std::optional<ReshapeDirective> reshape;
};

struct VertexPlan {
  std::string vertex_id;
  ResolvedShape shape;
  VertexType type = VertexType::kLinear;
  double leakiness = 0.0;
  std::vector<EdgePlan> inputs;  // primary edge first; empty for the input
  std::string bn_scale_slot, bn_shift_slot, bn_mean_slot, bn_var_slot;
};

struct ClassifierPlan {
  int flat_dim = 0;
  int num_classes = 0;
  std::string weights_slot;
  std::string bias_slot;
  double init_scale = 1.0;
};

/// Executable layer plan in topological order with resolved shapes and
/// stable weight ids.
struct CompiledModel {
  std::vector<VertexPlan> vertices;
  ClassifierPlan classifier;
  ResolvedShape input_shape;
  int num_classes = 0;
  std::vector<WeightSlot> slots;
  std::map<std::string, size_t> slot_index;

  const WeightSlot& slot(const std::string& id) const {
    return slots[slot_index.at(id)];
  }
  size_t weight_elements() const;
};

struct CompileOptions {
  // Per-example activations and weight slots above this are untrainable.
  size_t element_cap = size_t(1) << 24;
};

std::map<std::string, ResolvedShape> resolve_shapes(
    const Dna& dna, const ResolvedShape& input_shape);

CompiledModel compile(const Dna& dna, const ResolvedShape& input_shape,
                      int num_classes, const CompileOptions& options = {});

/// One line per vertex and edge with resolved shapes; used for the CLI's
/// architecture dumps.
std::string describe(const CompiledModel& model);

}  // namespace evonet
