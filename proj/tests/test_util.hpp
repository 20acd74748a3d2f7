#pragma once

// Shared test helpers: independent double-precision reference ops and a
// central finite-difference gradient checker. These deliberately do not call
// into the production kernels; they are the oracles the kernels are checked
// against.

#include <cmath>
#include <functional>
#include <vector>

#include "evonet/dna.hpp"
#include "evonet/mutation.hpp"
#include "evonet/rng.hpp"
#include "evonet/tensor.hpp"

namespace testutil {

using evonet::Dna;
using evonet::Rng;
using evonet::Tensor;

inline Tensor random_tensor(const std::vector<int>& dims, Rng& rng,
                            double lo = -1.0, double hi = 1.0) {
  Tensor t(dims);
  for (size_t i = 0; i < t.numel(); ++i) t[i] = float(rng.uniform(lo, hi));
  return t;
}

/// Reference same-padding convolution in double precision, full windows
/// (out-of-bounds taps contribute zero).
inline std::vector<double> ref_conv2d(const std::vector<double>& in, int n,
                                      int h, int w, int cin,
                                      const std::vector<double>& filt, int kh,
                                      int kw, int cout, int stride) {
  const int oh = (h + stride - 1) / stride;
  const int ow = (w + stride - 1) / stride;
  const int pad_h = std::max((oh - 1) * stride + kh - h, 0);
  const int pad_w = std::max((ow - 1) * stride + kw - w, 0);
  const int pad_top = pad_h / 2;
  const int pad_left = pad_w / 2;
  std::vector<double> out(size_t(n) * oh * ow * cout, 0.0);
  for (int b = 0; b < n; ++b)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        for (int co = 0; co < cout; ++co) {
          double acc = 0.0;
          for (int fy = 0; fy < kh; ++fy)
            for (int fx = 0; fx < kw; ++fx) {
              const int iy = y * stride + fy - pad_top;
              const int ix = x * stride + fx - pad_left;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              for (int ci = 0; ci < cin; ++ci)
                acc += in[((size_t(b) * h + iy) * w + ix) * cin + ci] *
                       filt[((size_t(fy) * kw + fx) * cin + ci) * cout + co];
            }
          out[((size_t(b) * oh + y) * ow + x) * cout + co] = acc;
        }
  return out;
}

inline std::vector<double> to_double(const Tensor& t) {
  std::vector<double> out(t.numel());
  for (size_t i = 0; i < t.numel(); ++i) out[i] = double(t[i]);
  return out;
}

/// Central finite differences of a double-valued scalar function with
/// respect to one float tensor, checked against an analytic gradient.
/// Returns the worst relative error.
inline double gradient_check(
    Tensor& param, const Tensor& analytic_grad,
    const std::function<double()>& scalar_fn, double perturbation = 1e-3) {
  double worst = 0.0;
  for (size_t i = 0; i < param.numel(); ++i) {
    const float saved = param[i];
    param[i] = float(double(saved) + perturbation);
    const double up = scalar_fn();
    param[i] = float(double(saved) - perturbation);
    const double down = scalar_fn();
    param[i] = saved;
    const double fd = (up - down) / (2.0 * perturbation);
    const double an = double(analytic_grad[i]);
    const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-3});
    worst = std::max(worst, std::fabs(fd - an) / denom);
  }
  return worst;
}

/// A Dna evolved by `steps` random successful mutations from the initial
/// graph; used by serialization round-trip and property tests.
inline Dna random_evolved_dna(int mutation_steps, Rng& rng,
                              int num_classes = 10) {
  Dna dna = evonet::new_initial_dna(num_classes, rng);
  for (int i = 0; i < mutation_steps; ++i) {
    const auto result = evonet::reproduce(dna, 1, rng);
    dna = result.child;
  }
  return dna;
}

}  // namespace testutil
