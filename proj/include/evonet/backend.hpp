#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "evonet/rng.hpp"
#include "evonet/tensor.hpp"

namespace evonet {

constexpr float kBatchNormEpsilon = 1e-5f;
constexpr float kBatchNormDecay = 0.9f;

/// Named trainable arrays. Ids embed the originating vertex/edge id so that
/// children can inherit matching-shape weights from their parent.
struct WeightBundle {
  std::map<std::string, Tensor> tensors;

  bool has(const std::string& id) const { return tensors.count(id) != 0; }
  Tensor& at(const std::string& id) { return tensors.at(id); }
  const Tensor& at(const std::string& id) const { return tensors.at(id); }
  size_t size() const { return tensors.size(); }
};

struct MalformedWeightsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binary container: magic "EVOW", version u32, count u32, then per weight:
// id length u16, id bytes, rank u8, dims u32 each, raw little-endian f32 data.
void save_weight_bundle(const WeightBundle& bundle,
                        const std::filesystem::path& path);
WeightBundle load_weight_bundle(const std::filesystem::path& path);
std::string weight_bundle_to_bytes(const WeightBundle& bundle);
WeightBundle weight_bundle_from_bytes(const std::string& bytes);

namespace ops {

/// Same-padding convolution, no bias; filters are (kh, kw, cin, cout).
Tensor conv2d_forward(const Tensor& input, const Tensor& filters, int stride);
struct Conv2dGrads {
  Tensor input;
  Tensor filters;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& filters,
                            int stride, const Tensor& gout);

struct BatchNormState {
  Tensor xhat;
  Tensor inv_std;  // per channel, from batch statistics
};
/// Training mode normalizes by batch statistics and updates the moving
/// averages in place (decay 0.9); inference mode uses the moving averages.
Tensor batch_norm_forward(const Tensor& input, const Tensor& scale,
                          const Tensor& shift, Tensor& moving_mean,
                          Tensor& moving_var, bool training,
                          BatchNormState* save);
struct BatchNormGrads {
  Tensor input;
  Tensor scale;
  Tensor shift;
};
BatchNormGrads batch_norm_backward(const BatchNormState& state,
                                   const Tensor& scale, const Tensor& gout);

/// max(x, leakiness * x) with 0 <= leakiness <= 1.
Tensor relu_forward(const Tensor& input, float leakiness);
Tensor relu_backward(const Tensor& input, const Tensor& gout, float leakiness);

/// Mean over the batch of -log softmax(logits)[label]; writes the gradient
/// (softmax - one_hot) / batch into *grad when non-null. Log-sum-exp
/// stabilized.
double softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels, Tensor* grad);

Tensor fc_forward(const Tensor& input2d, const Tensor& weights,
                  const Tensor& bias);
struct FcGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};
FcGrads fc_backward(const Tensor& input2d, const Tensor& weights,
                    const Tensor& gout);

Tensor add(const Tensor& a, const Tensor& b);
void add_in_place(Tensor& acc, const Tensor& t);

}  // namespace ops

/// SGD with momentum 0.9: v <- 0.9 v + (g + weight_decay * w); w <- w - lr v.
struct SgdMomentum {
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::map<std::string, Tensor> velocity;

  void step(WeightBundle& weights,
            const std::map<std::string, Tensor>& gradients, double lr);
};

/// Gaussian init with variance 2 * init_scale^2 / fan_in. Fan-in is derived
/// from the slot shape: kh*kw*cin for rank-4 filters, the input dim for
/// rank-2 matrices, the length for rank 1.
Tensor he_initialize(const std::vector<int>& dims, double init_scale, Rng& rng);
int fan_in_of(const std::vector<int>& dims);

}  // namespace evonet
