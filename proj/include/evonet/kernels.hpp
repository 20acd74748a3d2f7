#pragma once

#include <atomic>
#include <cstddef>

namespace evonet::kernels {

/// Same-padding geometry shared by the conv kernels, matching the usual
/// "SAME" convention: out = ceil(in / stride), total padding split with the
/// smaller half in front.
struct ConvGeom {
  int n, h, w, cin;
  int kh, kw, cout;
  int stride;
  int oh, ow;
  int pad_top, pad_left;
};

ConvGeom conv_geom(int n, int h, int w, int cin, int kh, int kw, int cout,
                   int stride);

// The parallel kernels split work only across independent output elements,
// so serial and parallel results are bit-identical. Tests assert exact
// equality; bench_kernels compares throughput.

namespace serial {
void conv2d_forward(const ConvGeom& g, const float* in, const float* filt,
                    float* out);
void conv2d_backward_input(const ConvGeom& g, const float* filt,
                           const float* gout, float* gin);
void conv2d_backward_filters(const ConvGeom& g, const float* in,
                             const float* gout, float* gfilt);
void fc_forward(int n, int in_dim, int out_dim, const float* in,
                const float* w, const float* b, float* out);
void fc_backward_input(int n, int in_dim, int out_dim, const float* w,
                       const float* gout, float* gin);
void fc_backward_weights(int n, int in_dim, int out_dim, const float* in,
                         const float* gout, float* gw, float* gb);
// Per-channel reductions over an (n*h*w, c) view.
void channel_moments(size_t rows, int c, const float* in, float* mean,
                     float* var);
void bn_normalize(size_t rows, int c, const float* in, const float* mean,
                  const float* inv_std, const float* scale, const float* shift,
                  float* xhat, float* out);
void bn_backward_input(size_t rows, int c, const float* xhat, const float* g,
                       const float* inv_std, const float* scale,
                       const float* gscale, const float* gshift, float* gin);
}  // namespace serial

namespace parallel {
void conv2d_forward(const ConvGeom& g, const float* in, const float* filt,
                    float* out);
void conv2d_backward_input(const ConvGeom& g, const float* filt,
                           const float* gout, float* gin);
void conv2d_backward_filters(const ConvGeom& g, const float* in,
                             const float* gout, float* gfilt);
void fc_forward(int n, int in_dim, int out_dim, const float* in,
                const float* w, const float* b, float* out);
void fc_backward_input(int n, int in_dim, int out_dim, const float* w,
                       const float* gout, float* gin);
void fc_backward_weights(int n, int in_dim, int out_dim, const float* in,
                         const float* gout, float* gw, float* gb);
void channel_moments(size_t rows, int c, const float* in, float* mean,
                     float* var);
void bn_normalize(size_t rows, int c, const float* in, const float* mean,
                  const float* inv_std, const float* scale, const float* shift,
                  float* xhat, float* out);
void bn_backward_input(size_t rows, int c, const float* xhat, const float* g,
                       const float* inv_std, const float* scale,
                       const float* gscale, const float* gshift, float* gin);
}  // namespace parallel

/// Process-wide switch. Experiments with many concurrent workers disable
/// intra-op threading; single-run tools enable it.
void set_parallel(bool enabled);
bool parallel_enabled();

// Dispatching entry points used by the backend.
void conv2d_forward(const ConvGeom& g, const float* in, const float* filt,
                    float* out);
void conv2d_backward_input(const ConvGeom& g, const float* filt,
                           const float* gout, float* gin);
void conv2d_backward_filters(const ConvGeom& g, const float* in,
                             const float* gout, float* gfilt);
void fc_forward(int n, int in_dim, int out_dim, const float* in, const float* w,
                const float* b, float* out);
void fc_backward_input(int n, int in_dim, int out_dim, const float* w,
                       const float* gout, float* gin);
void fc_backward_weights(int n, int in_dim, int out_dim, const float* in,
                         const float* gout, float* gw, float* gb);
void channel_moments(size_t rows, int c, const float* in, float* mean,
                     float* var);
void bn_normalize(size_t rows, int c, const float* in, const float* mean,
                  const float* inv_std, const float* scale, const float* shift,
                  float* xhat, float* out);
void bn_backward_input(size_t rows, int c, const float* xhat, const float* g,
                       const float* inv_std, const float* scale,
                       const float* gscale, const float* gshift, float* gin);

}  // namespace evonet::kernels
