#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "evonet/dna.hpp"
#include "evonet/rng.hpp"

namespace evonet {

// The predetermined mutation set. Kinds are sampled uniformly; the
// probabilities are deliberately untuned.
enum class MutationKind {
  kAlterLearningRate,
  kIdentity,
  kResetWeights,
  kInsertConvolution,
  kRemoveConvolution,
  kAlterStride,
  kAlterChannels,
  kFilterSize,
  kInsertOneToOne,
  kAddSkip,
  kRemoveSkip,
};
constexpr int kMutationKindCount = 11;

/// Log/report name, e.g. "ALTER_LEARNING_RATE".
const char* to_string(MutationKind kind);
MutationKind mutation_kind_from_string(const std::string& name);

enum class WeightAction { kInheritAll, kInheritNone, kInheritMatching };
const char* to_string(WeightAction action);
WeightAction weight_action_from_string(const std::string& name);

struct MutationOutcome {
  Dna child;
  MutationKind kind;
  WeightAction weight_action;
};

/// Raised when a kind cannot apply to the given parent (e.g. removing a
/// convolution from a convolution-free graph); the caller samples another
/// kind and retries.
struct MutationInapplicable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RetriesExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

MutationKind sample_mutation_kind(Rng& rng);

/// Uniform on [value/2, 2*value]. For strides the caller applies this to the
/// stored log-base-2 value.
double sample_half_to_twice(double value, Rng& rng);

MutationOutcome apply_mutation(const Dna& parent, MutationKind kind, Rng& rng);

struct ReproduceResult {
  Dna child;
  std::vector<MutationKind> kinds;
  WeightAction weight_action;
};

/// Applies `mutation_count` successful mutations in sequence, resampling
/// kinds on inapplicability; gives up after 100 consecutive failures.
ReproduceResult reproduce(const Dna& parent, int mutation_count, Rng& rng);

WeightAction compose_weight_actions(const std::vector<MutationKind>& kinds);

}  // namespace evonet
