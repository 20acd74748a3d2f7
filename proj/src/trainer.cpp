#include "evonet/trainer.hpp"

#include <cmath>

namespace evonet {

Tensor default_slot_value(const WeightSlot& slot, Rng& rng) {
  switch (slot.kind) {
    case SlotKind::kConvFilters:
    case SlotKind::kFcWeights:
      return he_initialize(slot.dims, slot.init_scale, rng);
    case SlotKind::kBnScale:
    case SlotKind::kBnMovingVar:
      return Tensor(slot.dims, 1.0f);
    case SlotKind::kBnShift:
    case SlotKind::kBnMovingMean:
    case SlotKind::kFcBias:
      return Tensor(slot.dims, 0.0f);
  }
  return Tensor(slot.dims, 0.0f);
}

WeightBundle inherit_weights(const WeightBundle& parent,
                             const CompiledModel& child_model) {
  WeightBundle inherited;
  for (const auto& slot : child_model.slots) {
    auto it = parent.tensors.find(slot.id);
    if (it == parent.tensors.end()) continue;
    if (it->second.dims() != slot.dims) continue;
    inherited.tensors.emplace(slot.id, it->second);
  }
  return inherited;
}

namespace {

WeightBundle materialize(const CompiledModel& model,
                         const WeightBundle* inherited, Rng& rng) {
  WeightBundle weights;
  for (const auto& slot : model.slots) {
    if (inherited) {
      auto it = inherited->tensors.find(slot.id);
      if (it != inherited->tensors.end() && it->second.dims() == slot.dims) {
        weights.tensors.emplace(slot.id, it->second);
        continue;
      }
    }
    weights.tensors.emplace(slot.id, default_slot_value(slot, rng));
  }
  return weights;
}

}  // namespace

TrainResult train_individual(const CompiledModel& model,
                             const WeightBundle* inherited,
                             const Dataset& data, const TrainingConfig& config,
                             double learning_rate, double weight_decay,
                             Rng& rng) {
  TrainResult result;
  result.weights = materialize(model, inherited, rng);

  Executor executor(model);
  SgdMomentum optimizer;
  optimizer.momentum = config.momentum;
  optimizer.weight_decay = weight_decay;

  const size_t train_size = data.size(Split::kTrain);
  const bool augment_enabled = data.spec().augment_enabled;
  std::vector<size_t> indices(size_t(config.batch_size));

  for (int step = 0; step < config.steps; ++step) {
    for (auto& idx : indices) idx = size_t(rng.index(train_size));
    Batch batch = data.gather(Split::kTrain, indices);
    if (augment_enabled) batch = augment(batch, rng);

    Tensor logits = executor.forward(batch.images, result.weights, true);
    Tensor dlogits;
    const double loss = loss_forward(logits, batch.labels, &dlogits);
    result.final_loss = loss;
    result.steps_run = step + 1;
    if (!std::isfinite(loss)) {
      // Untrainable individual; tournament selection will see fitness 0.
      result.numeric_failure = true;
      result.fitness.validation_accuracy = 0.0;
      return result;
    }
    auto grads = executor.backward(dlogits, result.weights);
    optimizer.step(result.weights, grads, learning_rate);
  }

  result.fitness.validation_accuracy =
      evaluate(model, result.weights, data, Split::kValidation,
               config.eval_batch_size);
  return result;
}

std::vector<int> predict(const CompiledModel& model,
                         const WeightBundle& weights, const Dataset& data,
                         Split split, int eval_batch_size) {
  Executor executor(model);
  WeightBundle eval_weights = weights;  // moving stats stay untouched
  const size_t total = data.size(split);
  std::vector<int> predictions;
  predictions.reserve(total);
  size_t done = 0;
  while (done < total) {
    const size_t n = std::min(size_t(eval_batch_size), total - done);
    std::vector<size_t> indices(n);
    for (size_t i = 0; i < n; ++i) indices[i] = done + i;
    const Batch batch = data.gather(split, indices);
    const Tensor logits = executor.forward(batch.images, eval_weights, false);
    for (int p : argmax_rows(logits)) predictions.push_back(p);
    done += n;
  }
  return predictions;
}

double evaluate(const CompiledModel& model, const WeightBundle& weights,
                const Dataset& data, Split split, int eval_batch_size) {
  Executor executor(model);
  WeightBundle eval_weights = weights;
  const size_t total = data.size(split);
  size_t correct = 0;
  size_t done = 0;
  while (done < total) {
    const size_t n = std::min(size_t(eval_batch_size), total - done);
    std::vector<size_t> indices(n);
    for (size_t i = 0; i < n; ++i) indices[i] = done + i;
    const Batch batch = data.gather(split, indices);
    const Tensor logits = executor.forward(batch.images, eval_weights, false);
    const auto predictions = argmax_rows(logits);
    for (size_t i = 0; i < n; ++i)
      if (predictions[i] == batch.labels[i]) ++correct;
    done += n;
  }
  return total == 0 ? 0.0 : double(correct) / double(total);
}

}  // namespace evonet
