#pragma once

#include <map>
#include <string>
#include <vector>

#include "evonet/backend.hpp"
#include "evonet/compiler.hpp"
#include "evonet/flops.hpp"

namespace evonet {

/// Runs a CompiledModel forward and backward. One instance per training run;
/// holds the activations needed by the backward pass. The optional trace
/// records every op (and gradient op) executed, mirroring
/// enumerate_model_ops entry for entry.
class Executor {
 public:
  explicit Executor(const CompiledModel& model) : model_(model) {}

  /// Returns logits (batch, num_classes). Training mode uses batch statistics
  /// for batch-norm and updates the moving averages in `weights`.
  Tensor forward(const Tensor& images, WeightBundle& weights, bool training,
                 OpTrace* trace = nullptr);

  /// Gradients for every trainable slot, given d(loss)/d(logits). Must
  /// follow a training-mode forward on the same batch.
  std::map<std::string, Tensor> backward(const Tensor& dlogits,
                                         const WeightBundle& weights,
                                         OpTrace* trace = nullptr);

  const CompiledModel& model() const { return model_; }

 private:
  struct VertexState {
    Tensor merged;   // sum of incoming edge outputs
    Tensor bn_out;   // after batch-norm, before relu
    Tensor out;      // post-activation
    ops::BatchNormState bn_state;
  };

  const CompiledModel& model_;
  std::vector<VertexState> states_;
  Tensor flat_input_;  // classifier input, (batch, flat_dim)
  int batch_ = 0;
};

/// Stabilized mean cross-entropy and its logit gradient.
double loss_forward(const Tensor& logits, const std::vector<int>& labels,
                    Tensor* dlogits);

std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace evonet
