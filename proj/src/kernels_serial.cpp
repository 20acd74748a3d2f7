#include "evonet/kernels.hpp"

#include <algorithm>
#include <vector>

// Reference implementations: straightforward loops, no threading. The
// parallel kernels must produce bit-identical results; keep accumulation
// order (innermost-first, ascending indices) in sync with kernels_parallel.

namespace evonet::kernels {

ConvGeom conv_geom(int n, int h, int w, int cin, int kh, int kw, int cout,
                   int stride) {
  ConvGeom g;
  g.n = n;
  g.h = h;
  g.w = w;
  g.cin = cin;
  g.kh = kh;
  g.kw = kw;
  g.cout = cout;
  g.stride = stride;
  g.oh = (h + stride - 1) / stride;
  g.ow = (w + stride - 1) / stride;
  const int pad_h = std::max((g.oh - 1) * stride + kh - h, 0);
  const int pad_w = std::max((g.ow - 1) * stride + kw - w, 0);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

namespace serial {

void conv2d_forward(const ConvGeom& g, const float* in, const float* filt,
                    float* out) {
  std::vector<float> acc(size_t(g.cout));
  for (int n = 0; n < g.n; ++n) {
    for (int oh = 0; oh < g.oh; ++oh) {
      for (int ow = 0; ow < g.ow; ++ow) {
        std::fill(acc.begin(), acc.end(), 0.0f);
        for (int kh = 0; kh < g.kh; ++kh) {
          const int ih = oh * g.stride + kh - g.pad_top;
          if (ih < 0 || ih >= g.h) continue;
          for (int kw = 0; kw < g.kw; ++kw) {
            const int iw = ow * g.stride + kw - g.pad_left;
            if (iw < 0 || iw >= g.w) continue;
            const float* in_px =
                in + ((size_t(n) * g.h + ih) * g.w + iw) * g.cin;
            const float* f_px =
                filt + (size_t(kh) * g.kw + kw) * g.cin * g.cout;
            for (int ci = 0; ci < g.cin; ++ci) {
              const float v = in_px[ci];
              const float* f_row = f_px + size_t(ci) * g.cout;
              for (int co = 0; co < g.cout; ++co) acc[size_t(co)] += v * f_row[co];
            }
          }
        }
        float* out_px = out + ((size_t(n) * g.oh + oh) * g.ow + ow) * g.cout;
        std::copy(acc.begin(), acc.end(), out_px);
      }
    }
  }
}

void conv2d_backward_input(const ConvGeom& g, const float* filt,
                           const float* gout, float* gin) {
  for (int n = 0; n < g.n; ++n) {
    for (int ih = 0; ih < g.h; ++ih) {
      for (int iw = 0; iw < g.w; ++iw) {
        float* gin_px = gin + ((size_t(n) * g.h + ih) * g.w + iw) * g.cin;
        std::fill(gin_px, gin_px + g.cin, 0.0f);
        for (int kh = 0; kh < g.kh; ++kh) {
          const int oh_num = ih + g.pad_top - kh;
          if (oh_num < 0 || oh_num % g.stride != 0) continue;
          const int oh = oh_num / g.stride;
          if (oh >= g.oh) continue;
          for (int kw = 0; kw < g.kw; ++kw) {
            const int ow_num = iw + g.pad_left - kw;
            if (ow_num < 0 || ow_num % g.stride != 0) continue;
            const int ow = ow_num / g.stride;
            if (ow >= g.ow) continue;
            const float* g_px =
                gout + ((size_t(n) * g.oh + oh) * g.ow + ow) * g.cout;
            const float* f_px =
                filt + (size_t(kh) * g.kw + kw) * g.cin * g.cout;
            for (int ci = 0; ci < g.cin; ++ci) {
              const float* f_row = f_px + size_t(ci) * g.cout;
              float acc = 0.0f;
              for (int co = 0; co < g.cout; ++co) acc += f_row[co] * g_px[co];
              gin_px[ci] += acc;
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_filters(const ConvGeom& g, const float* in,
                             const float* gout, float* gfilt) {
  for (int kh = 0; kh < g.kh; ++kh) {
    for (int kw = 0; kw < g.kw; ++kw) {
      float* gf_px = gfilt + (size_t(kh) * g.kw + kw) * g.cin * g.cout;
      std::fill(gf_px, gf_px + size_t(g.cin) * g.cout, 0.0f);
      for (int n = 0; n < g.n; ++n) {
        for (int oh = 0; oh < g.oh; ++oh) {
          const int ih = oh * g.stride + kh - g.pad_top;
          if (ih < 0 || ih >= g.h) continue;
          for (int ow = 0; ow < g.ow; ++ow) {
            const int iw = ow * g.stride + kw - g.pad_left;
            if (iw < 0 || iw >= g.w) continue;
            const float* in_px =
                in + ((size_t(n) * g.h + ih) * g.w + iw) * g.cin;
            const float* g_px =
                gout + ((size_t(n) * g.oh + oh) * g.ow + ow) * g.cout;
            for (int ci = 0; ci < g.cin; ++ci) {
              const float v = in_px[ci];
              float* gf_row = gf_px + size_t(ci) * g.cout;
              for (int co = 0; co < g.cout; ++co) gf_row[co] += v * g_px[co];
            }
          }
        }
      }
    }
  }
}

void fc_forward(int n, int in_dim, int out_dim, const float* in, const float* w,
                const float* b, float* out) {
  for (int i = 0; i < n; ++i) {
    float* out_row = out + size_t(i) * out_dim;
    std::copy(b, b + out_dim, out_row);
    const float* in_row = in + size_t(i) * in_dim;
    for (int k = 0; k < in_dim; ++k) {
      const float v = in_row[k];
      const float* w_row = w + size_t(k) * out_dim;
      for (int o = 0; o < out_dim; ++o) out_row[o] += v * w_row[o];
    }
  }
}

void fc_backward_input(int n, int in_dim, int out_dim, const float* w,
                       const float* gout, float* gin) {
  for (int i = 0; i < n; ++i) {
    const float* g_row = gout + size_t(i) * out_dim;
    float* gin_row = gin + size_t(i) * in_dim;
    for (int k = 0; k < in_dim; ++k) {
      const float* w_row = w + size_t(k) * out_dim;
      float acc = 0.0f;
      for (int o = 0; o < out_dim; ++o) acc += w_row[o] * g_row[o];
      gin_row[k] = acc;
    }
  }
}

void fc_backward_weights(int n, int in_dim, int out_dim, const float* in,
                         const float* gout, float* gw, float* gb) {
  std::fill(gw, gw + size_t(in_dim) * out_dim, 0.0f);
  for (int k = 0; k < in_dim; ++k) {
    float* gw_row = gw + size_t(k) * out_dim;
    for (int i = 0; i < n; ++i) {
      const float v = in[size_t(i) * in_dim + k];
      const float* g_row = gout + size_t(i) * out_dim;
      for (int o = 0; o < out_dim; ++o) gw_row[o] += v * g_row[o];
    }
  }
  for (int o = 0; o < out_dim; ++o) {
    float acc = 0.0f;
    for (int i = 0; i < n; ++i) acc += gout[size_t(i) * out_dim + o];
    gb[o] = acc;
  }
}

void channel_moments(size_t rows, int c, const float* in, float* mean,
                     float* var) {
  for (int ch = 0; ch < c; ++ch) {
    float acc = 0.0f;
    for (size_t r = 0; r < rows; ++r) acc += in[r * c + ch];
    mean[ch] = acc / float(rows);
    float vacc = 0.0f;
    for (size_t r = 0; r < rows; ++r) {
      const float d = in[r * c + ch] - mean[ch];
      vacc += d * d;
    }
    var[ch] = vacc / float(rows);
  }
}

void bn_normalize(size_t rows, int c, const float* in, const float* mean,
                  const float* inv_std, const float* scale, const float* shift,
                  float* xhat, float* out) {
  for (size_t r = 0; r < rows; ++r) {
    const float* in_row = in + r * c;
    float* xh_row = xhat + r * c;
    float* out_row = out + r * c;
    for (int ch = 0; ch < c; ++ch) {
      const float xh = (in_row[ch] - mean[ch]) * inv_std[ch];
      xh_row[ch] = xh;
      out_row[ch] = xh * scale[ch] + shift[ch];
    }
  }
}

void bn_backward_input(size_t rows, int c, const float* xhat, const float* g,
                       const float* inv_std, const float* scale,
                       const float* gscale, const float* gshift, float* gin) {
  const float inv_rows = 1.0f / float(rows);
  for (size_t r = 0; r < rows; ++r) {
    const float* g_row = g + r * c;
    const float* xh_row = xhat + r * c;
    float* gin_row = gin + r * c;
    for (int ch = 0; ch < c; ++ch) {
      gin_row[ch] = scale[ch] * inv_std[ch] *
                    (g_row[ch] - gshift[ch] * inv_rows -
                     xh_row[ch] * gscale[ch] * inv_rows);
    }
  }
}

}  // namespace serial

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

#define EVONET_DISPATCH(fn, ...)                 \
  do {                                           \
    if (g_parallel.load(std::memory_order_relaxed)) \
      parallel::fn(__VA_ARGS__);                 \
    else                                         \
      serial::fn(__VA_ARGS__);                   \
  } while (0)

void conv2d_forward(const ConvGeom& g, const float* in, const float* filt,
                    float* out) {
  EVONET_DISPATCH(conv2d_forward, g, in, filt, out);
}
void conv2d_backward_input(const ConvGeom& g, const float* filt,
                           const float* gout, float* gin) {
  EVONET_DISPATCH(conv2d_backward_input, g, filt, gout, gin);
}
void conv2d_backward_filters(const ConvGeom& g, const float* in,
                             const float* gout, float* gfilt) {
  EVONET_DISPATCH(conv2d_backward_filters, g, in, gout, gfilt);
}
void fc_forward(int n, int in_dim, int out_dim, const float* in, const float* w,
                const float* b, float* out) {
  EVONET_DISPATCH(fc_forward, n, in_dim, out_dim, in, w, b, out);
}
void fc_backward_input(int n, int in_dim, int out_dim, const float* w,
                       const float* gout, float* gin) {
  EVONET_DISPATCH(fc_backward_input, n, in_dim, out_dim, w, gout, gin);
}
void fc_backward_weights(int n, int in_dim, int out_dim, const float* in,
                         const float* gout, float* gw, float* gb) {
  EVONET_DISPATCH(fc_backward_weights, n, in_dim, out_dim, in, gout, gw, gb);
}
void channel_moments(size_t rows, int c, const float* in, float* mean,
                     float* var) {
  EVONET_DISPATCH(channel_moments, rows, c, in, mean, var);
}
void bn_normalize(size_t rows, int c, const float* in, const float* mean,
                  const float* inv_std, const float* scale, const float* shift,
                  float* xhat, float* out) {
  EVONET_DISPATCH(bn_normalize, rows, c, in, mean, inv_std, scale, shift, xhat,
                  out);
}
void bn_backward_input(size_t rows, int c, const float* xhat, const float* g,
                       const float* inv_std, const float* scale,
                       const float* gscale, const float* gshift, float* gin) {
  EVONET_DISPATCH(bn_backward_input, rows, c, xhat, g, inv_std, scale, gscale,
                  gshift, gin);
}

#undef EVONET_DISPATCH

}  // namespace evonet::kernels
