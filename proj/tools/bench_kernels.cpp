#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include <omp.h>

#include "evonet/kernels.hpp"
#include "evonet/rng.hpp"

using namespace evonet;

namespace {

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

std::vector<float> random_vec(size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.uniform(-1.0, 1.0));
  return v;
}

void report(const char* name, double serial_s, double parallel_s,
            double flops) {
  std::printf("%-28s serial %8.3f ms (%6.2f GFLOP/s)  omp %8.3f ms "
              "(%6.2f GFLOP/s)  speedup %.2fx\n",
              name, serial_s * 1e3, flops / serial_s / 1e9, parallel_s * 1e3,
              flops / parallel_s / 1e9, serial_s / parallel_s);
}

}  // namespace

int main() {
  Rng rng(42);
  std::printf("threads: %d\n", omp_get_max_threads());

  {
    const int n = 50, h = 32, w = 32, cin = 16, k = 3, cout = 16;
    const auto g = kernels::conv_geom(n, h, w, cin, k, k, cout, 1);
    const auto in = random_vec(size_t(n) * h * w * cin, rng);
    const auto filt = random_vec(size_t(k) * k * cin * cout, rng);
    std::vector<float> out(size_t(n) * g.oh * g.ow * cout);
    const double flops = 2.0 * k * k * cin * out.size();
    const double ts = time_of(
        [&] { kernels::serial::conv2d_forward(g, in.data(), filt.data(),
                                              out.data()); }, 5);
    const double tp = time_of(
        [&] { kernels::parallel::conv2d_forward(g, in.data(), filt.data(),
                                                out.data()); }, 5);
    report("conv2d_forward 3x3x16x16", ts, tp, flops);

    std::vector<float> gin(in.size());
    const auto gout = random_vec(out.size(), rng);
    const double ts_bi = time_of(
        [&] { kernels::serial::conv2d_backward_input(g, filt.data(),
                                                     gout.data(), gin.data()); },
        5);
    const double tp_bi = time_of(
        [&] { kernels::parallel::conv2d_backward_input(
                  g, filt.data(), gout.data(), gin.data()); }, 5);
    report("conv2d_backward_input", ts_bi, tp_bi, flops);

    std::vector<float> gfilt(filt.size());
    const double ts_bf = time_of(
        [&] { kernels::serial::conv2d_backward_filters(
                  g, in.data(), gout.data(), gfilt.data()); }, 5);
    const double tp_bf = time_of(
        [&] { kernels::parallel::conv2d_backward_filters(
                  g, in.data(), gout.data(), gfilt.data()); }, 5);
    report("conv2d_backward_filters", ts_bf, tp_bf, flops);
  }

  {
    const int n = 50, in_dim = 3072, out_dim = 10;
    const auto in = random_vec(size_t(n) * in_dim, rng);
    const auto w = random_vec(size_t(in_dim) * out_dim, rng);
    const auto b = random_vec(size_t(out_dim), rng);
    std::vector<float> out(size_t(n) * out_dim);
    const double flops = 2.0 * n * in_dim * out_dim;
    const double ts = time_of(
        [&] { kernels::serial::fc_forward(n, in_dim, out_dim, in.data(),
                                          w.data(), b.data(), out.data()); },
        50);
    const double tp = time_of(
        [&] { kernels::parallel::fc_forward(n, in_dim, out_dim, in.data(),
                                            w.data(), b.data(), out.data()); },
        50);
    report("fc_forward 50x3072x10", ts, tp, flops);
  }

  {
    const size_t rows = size_t(50) * 32 * 32;
    const int c = 16;
    const auto in = random_vec(rows * size_t(c), rng);
    std::vector<float> mean(static_cast<size_t>(c)), var(static_cast<size_t>(c));
    const double flops = 3.0 * double(rows) * c;
    const double ts = time_of(
        [&] { kernels::serial::channel_moments(rows, c, in.data(), mean.data(),
                                               var.data()); }, 20);
    const double tp = time_of(
        [&] { kernels::parallel::channel_moments(rows, c, in.data(),
                                                 mean.data(), var.data()); },
        20);
    report("channel_moments 51200x16", ts, tp, flops);
  }

  return 0;
}
