#pragma once

#include <optional>

#include "evonet/backend.hpp"
#include "evonet/compiler.hpp"
#include "evonet/data.hpp"
#include "evonet/executor.hpp"
#include "evonet/rng.hpp"

namespace evonet {

struct TrainingConfig {
  int steps = 256;         // N_t
  int batch_size = 50;
  double momentum = 0.9;
  int eval_batch_size = 100;
};

/// Fitness is accuracy on the held-out validation split, never the test
/// split.
struct Fitness {
  double validation_accuracy = 0.0;
};

struct TrainResult {
  WeightBundle weights;
  Fitness fitness;
  double final_loss = 0.0;
  bool numeric_failure = false;
  int steps_run = 0;
};

/// Fresh slot values: He-init for convolution filters and the classifier
/// matrix, ones/zeros for batch-norm parameters and statistics, zero bias.
Tensor default_slot_value(const WeightSlot& slot, Rng& rng);

/// Copies each parent tensor whose id exists in the child model with an
/// equal shape; everything else is left for fresh initialization.
WeightBundle inherit_weights(const WeightBundle& parent,
                             const CompiledModel& child_model);

/// Runs exactly `config.steps` SGD steps at the given learning rate on
/// augmented training batches, then evaluates validation accuracy. A
/// non-finite loss aborts with fitness 0.
TrainResult train_individual(const CompiledModel& model,
                             const WeightBundle* inherited,
                             const Dataset& data, const TrainingConfig& config,
                             double learning_rate, double weight_decay,
                             Rng& rng);

/// Deterministic top-1 accuracy over the whole split, no augmentation.
double evaluate(const CompiledModel& model, const WeightBundle& weights,
                const Dataset& data, Split split, int eval_batch_size = 100);

/// Per-example top-1 predictions over a split.
std::vector<int> predict(const CompiledModel& model,
                         const WeightBundle& weights, const Dataset& data,
                         Split split, int eval_batch_size = 100);

}  // namespace evonet
