#include "evonet/backend.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "evonet/kernels.hpp"

namespace evonet {

namespace {

void append_raw(std::string& out, const void* p, size_t n) {
  out.append(reinterpret_cast<const char*>(p), n);
}

template <typename T>
T read_raw(const std::string& b, size_t& pos) {
  if (pos + sizeof(T) > b.size())
    throw MalformedWeightsError("truncated weight bundle");
  T v;
  std::memcpy(&v, b.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string weight_bundle_to_bytes(const WeightBundle& bundle) {
  std::string out;
  out += "EVOW";
  const uint32_t version = 1;
  append_raw(out, &version, 4);
  const uint32_t count = uint32_t(bundle.tensors.size());
  append_raw(out, &count, 4);
  for (const auto& [id, t] : bundle.tensors) {
    const uint16_t id_len = uint16_t(id.size());
    append_raw(out, &id_len, 2);
    out += id;
    const uint8_t rank = uint8_t(t.rank());
    append_raw(out, &rank, 1);
    for (int i = 0; i < t.rank(); ++i) {
      const uint32_t d = uint32_t(t.dim(i));
      append_raw(out, &d, 4);
    }
    append_raw(out, t.data(), t.numel() * 4);
  }
  return out;
}

WeightBundle weight_bundle_from_bytes(const std::string& bytes) {
  size_t pos = 0;
  if (bytes.size() < 12 || bytes.compare(0, 4, "EVOW") != 0)
    throw MalformedWeightsError("bad magic");
  pos = 4;
  const uint32_t version = read_raw<uint32_t>(bytes, pos);
  if (version != 1) throw MalformedWeightsError("unsupported version");
  const uint32_t count = read_raw<uint32_t>(bytes, pos);
  WeightBundle bundle;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t id_len = read_raw<uint16_t>(bytes, pos);
    if (pos + id_len > bytes.size())
      throw MalformedWeightsError("truncated id");
    std::string id = bytes.substr(pos, id_len);
    pos += id_len;
    const uint8_t rank = read_raw<uint8_t>(bytes, pos);
    if (rank == 0 || rank > 4) throw MalformedWeightsError("bad rank");
    std::vector<int> dims(rank);
    size_t numel = 1;
    for (auto& d : dims) {
      const uint32_t v = read_raw<uint32_t>(bytes, pos);
      if (v == 0 || v > (1u << 28)) throw MalformedWeightsError("bad dim");
      d = int(v);
      numel *= v;
    }
    if (pos + numel * 4 > bytes.size())
      throw MalformedWeightsError("truncated data");
    Tensor t(dims);
    std::memcpy(t.data(), bytes.data() + pos, numel * 4);
    pos += numel * 4;
    bundle.tensors.emplace(std::move(id), std::move(t));
  }
  return bundle;
}

void save_weight_bundle(const WeightBundle& bundle,
                        const std::filesystem::path& path) {
  const std::string bytes = weight_bundle_to_bytes(bundle);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f.write(bytes.data(), std::streamsize(bytes.size()));
  if (!f) throw std::runtime_error("short write to " + path.string());
}

WeightBundle load_weight_bundle(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MalformedWeightsError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return weight_bundle_from_bytes(ss.str());
}

namespace ops {

Tensor conv2d_forward(const Tensor& input, const Tensor& filters, int stride) {
  const auto g = kernels::conv_geom(input.dim(0), input.dim(1), input.dim(2),
                                    input.dim(3), filters.dim(0),
                                    filters.dim(1), filters.dim(3), stride);
  if (filters.dim(2) != g.cin)
    throw std::invalid_argument("conv2d: channel mismatch");
  if (filters.dim(0) % 2 == 0 || filters.dim(1) % 2 == 0)
    throw std::invalid_argument("conv2d: filter dims must be odd");
  Tensor out({g.n, g.oh, g.ow, g.cout});
  kernels::conv2d_forward(g, input.data(), filters.data(), out.data());
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& filters,
                            int stride, const Tensor& gout) {
  const auto g = kernels::conv_geom(input.dim(0), input.dim(1), input.dim(2),
                                    input.dim(3), filters.dim(0),
                                    filters.dim(1), filters.dim(3), stride);
  Conv2dGrads grads;
  grads.input = Tensor(input.dims());
  grads.filters = Tensor(filters.dims());
  kernels::conv2d_backward_input(g, filters.data(), gout.data(),
                                 grads.input.data());
  kernels::conv2d_backward_filters(g, input.data(), gout.data(),
                                   grads.filters.data());
  return grads;
}

Tensor batch_norm_forward(const Tensor& input, const Tensor& scale,
                          const Tensor& shift, Tensor& moving_mean,
                          Tensor& moving_var, bool training,
                          BatchNormState* save) {
  const int c = input.dim(input.rank() - 1);
  const size_t rows = input.numel() / size_t(c);
  if (scale.numel() != size_t(c) || shift.numel() != size_t(c))
    throw std::invalid_argument("batch_norm: parameter shape mismatch");

  Tensor mean({c}), var({c});
  if (training) {
    kernels::channel_moments(rows, c, input.data(), mean.data(), var.data());
    for (int ch = 0; ch < c; ++ch) {
      moving_mean[size_t(ch)] = kBatchNormDecay * moving_mean[size_t(ch)] +
                                (1.0f - kBatchNormDecay) * mean[size_t(ch)];
      moving_var[size_t(ch)] = kBatchNormDecay * moving_var[size_t(ch)] +
                               (1.0f - kBatchNormDecay) * var[size_t(ch)];
    }
  } else {
    mean = moving_mean;
    var = moving_var;
  }

  Tensor inv_std({c});
  for (int ch = 0; ch < c; ++ch)
    inv_std[size_t(ch)] =
        1.0f / std::sqrt(var[size_t(ch)] + kBatchNormEpsilon);

  Tensor xhat(input.dims());
  Tensor out(input.dims());
  kernels::bn_normalize(rows, c, input.data(), mean.data(), inv_std.data(),
                        scale.data(), shift.data(), xhat.data(), out.data());
  if (save) {
    save->xhat = std::move(xhat);
    save->inv_std = std::move(inv_std);
  }
  return out;
}

BatchNormGrads batch_norm_backward(const BatchNormState& state,
                                   const Tensor& scale, const Tensor& gout) {
  const int c = gout.dim(gout.rank() - 1);
  const size_t rows = gout.numel() / size_t(c);
  BatchNormGrads grads;
  grads.scale = Tensor({c});
  grads.shift = Tensor({c});
  // Per-channel reductions; row-ascending order keeps this deterministic.
  for (size_t r = 0; r < rows; ++r) {
    const float* g_row = gout.data() + r * size_t(c);
    const float* xh_row = state.xhat.data() + r * size_t(c);
    for (int ch = 0; ch < c; ++ch) {
      grads.scale[size_t(ch)] += g_row[ch] * xh_row[ch];
      grads.shift[size_t(ch)] += g_row[ch];
    }
  }
  grads.input = Tensor(gout.dims());
  kernels::bn_backward_input(rows, c, state.xhat.data(), gout.data(),
                             state.inv_std.data(), scale.data(),
                             grads.scale.data(), grads.shift.data(),
                             grads.input.data());
  return grads;
}

Tensor relu_forward(const Tensor& input, float leakiness) {
  Tensor out(input.dims());
  for (size_t i = 0; i < input.numel(); ++i) {
    const float x = input[i];
    out[i] = std::max(x, leakiness * x);
  }
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& gout,
                     float leakiness) {
  Tensor gin(input.dims());
  for (size_t i = 0; i < input.numel(); ++i)
    gin[i] = input[i] >= 0.0f ? gout[i] : leakiness * gout[i];
  return gin;
}

double softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels, Tensor* grad) {
  const int n = logits.dim(0);
  const int k = logits.dim(1);
  if (grad) *grad = Tensor(logits.dims());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const float* row = logits.data() + size_t(i) * k;
    float m = row[0];
    for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(double(row[j]) - m);
    const double lse = double(m) + std::log(sum);
    total += lse - double(row[labels[size_t(i)]]);
    if (grad) {
      float* g_row = grad->data() + size_t(i) * k;
      for (int j = 0; j < k; ++j) {
        const double p = std::exp(double(row[j]) - lse);
        g_row[j] = float((p - (j == labels[size_t(i)] ? 1.0 : 0.0)) / n);
      }
    }
  }
  return total / n;
}

Tensor fc_forward(const Tensor& input2d, const Tensor& weights,
                  const Tensor& bias) {
  const int n = input2d.dim(0);
  const int in_dim = input2d.dim(1);
  const int out_dim = weights.dim(1);
  if (weights.dim(0) != in_dim || bias.dim(0) != out_dim)
    throw std::invalid_argument("fc: shape mismatch");
  Tensor out({n, out_dim});
  kernels::fc_forward(n, in_dim, out_dim, input2d.data(), weights.data(),
                      bias.data(), out.data());
  return out;
}

FcGrads fc_backward(const Tensor& input2d, const Tensor& weights,
                    const Tensor& gout) {
  const int n = input2d.dim(0);
  const int in_dim = input2d.dim(1);
  const int out_dim = weights.dim(1);
  FcGrads grads;
  grads.input = Tensor({n, in_dim});
  grads.weights = Tensor({in_dim, out_dim});
  grads.bias = Tensor({out_dim});
  kernels::fc_backward_input(n, in_dim, out_dim, weights.data(), gout.data(),
                             grads.input.data());
  kernels::fc_backward_weights(n, in_dim, out_dim, input2d.data(), gout.data(),
                               grads.weights.data(), grads.bias.data());
  return grads;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out(a.dims());
  for (size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

void add_in_place(Tensor& acc, const Tensor& t) {
  for (size_t i = 0; i < acc.numel(); ++i) acc[i] += t[i];
}

}  // namespace ops

void SgdMomentum::step(WeightBundle& weights,
                       const std::map<std::string, Tensor>& gradients,
                       double lr) {
  const float m = float(momentum);
  const float wd = float(weight_decay);
  const float flr = float(lr);
  for (const auto& [id, g] : gradients) {
    Tensor& w = weights.at(id);
    auto [it, fresh] = velocity.try_emplace(id, Tensor(w.dims()));
    Tensor& v = it->second;
    for (size_t i = 0; i < w.numel(); ++i) {
      v[i] = m * v[i] + (g[i] + wd * w[i]);
      w[i] -= flr * v[i];
    }
  }
}

int fan_in_of(const std::vector<int>& dims) {
  if (dims.size() == 4) return dims[0] * dims[1] * dims[2];
  if (dims.size() == 2) return dims[0];
  return dims[0];
}

Tensor he_initialize(const std::vector<int>& dims, double init_scale,
                     Rng& rng) {
  Tensor t(dims);
  const double stddev =
      std::sqrt(2.0 * init_scale * init_scale / double(fan_in_of(dims)));
  for (size_t i = 0; i < t.numel(); ++i) t[i] = float(stddev * rng.normal());
  return t;
}

}  // namespace evonet
