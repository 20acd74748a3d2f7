#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evonet/compiler.hpp"

namespace evonet {

// Analytical FLOPs ledger. Costs are a coarse estimate by design: every
// op kind has one declared rule, applied uniformly.
using u128 = unsigned __int128;

enum class OpKind {
  kConv,
  kMatmul,
  kElementwiseBinary,
  kUnary,
  kReduction,
  kPooling,
  kBatchNorm,
};

/// One executed operation with fully defined shapes. Cost rules:
///   elementwise-binary, unary: out_elements
///   reduction:                 in_elements
///   conv:                      2 * kh * kw * cin * out_elements
///   matmul:                    2 * m * n * k
///   pooling:                   window * out_elements
///   batch-norm:                10 * out_elements
/// Gradients cost 2x the forward for conv/matmul (input grad + weight grad)
/// and 1x for everything else.
struct OpSpec {
  OpKind kind = OpKind::kUnary;
  uint64_t out_elements = 0;
  uint64_t in_elements = 0;
  int kh = 0, kw = 0, cin = 0;
  uint64_t m = 0, n = 0, k = 0;
  int window = 0;
};

u128 op_forward_flops(const OpSpec& spec);
u128 op_gradient_flops(const OpSpec& spec);
/// Forward cost, plus the gradient cost when include_gradient is set.
u128 op_flops(const OpSpec& spec, bool include_gradient);

/// Execution trace hook: the executor records every op it runs (and, in
/// training, the matching gradient ops) so tests can audit the analytical
/// model against what actually executed.
struct TraceEntry {
  OpSpec spec;
  bool gradient = false;
};
using OpTrace = std::vector<TraceEntry>;

enum class CostMode { kTrain, kValidate };

/// Sum of op costs over one batch. Training includes the loss, all
/// gradients, and the optimizer update (3 FLOPs per trainable weight
/// element per step); validation is forward plus the argmax.
u128 model_flops(const CompiledModel& model, int batch_size, CostMode mode);

/// Enumerates the per-batch ops of a model in execution order; the basis of
/// model_flops and mirrored by the executor's trace.
std::vector<TraceEntry> enumerate_model_ops(const CompiledModel& model,
                                            int batch_size, CostMode mode);

struct FlopsEstimate {
  std::string individual_id;
  u128 f_t = 0;  // FLOPs per training step
  u128 f_v = 0;  // FLOPs per validation batch
  uint64_t n_t = 0;
  uint64_t n_v = 0;
  u128 individual_cost() const { return f_t * n_t + f_v * n_v; }
};

u128 experiment_cost(const std::vector<FlopsEstimate>& ledger);

std::string u128_to_string(u128 v);
u128 u128_from_string(const std::string& s);
/// Two significant digits, paper-style: 93460000000000000000 -> "9.3e19".
std::string format_scientific(u128 v);

/// Ledger CSV line: individual-id, F_t, N_t, F_v, N_v, individual_cost.
std::string ledger_csv_header();
std::string to_csv_line(const FlopsEstimate& e);
FlopsEstimate ledger_from_csv_line(const std::string& line);

}  // namespace evonet
