// Copyright 2026  The smoothnce Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference kernels against the OpenMP/BLAS ones on the encoder's
// layer shapes. Prints one TSV row per kernel.
//
//   bench_kernels [--batch 8] [--channels 512] [--repeats 5]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "CLI11.hpp"

#include "sim/kernels.hpp"
#include "sim/rng.hpp"

using namespace sim;
using kernels::ConvGeometry;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  RngStream r(seed, 0);
  std::vector<float> v(n);
  for (auto &x : v) x = static_cast<float>(r.uniform(-1.0, 1.0));
  return v;
}

// Best of the timed runs, in milliseconds.
double time_ms(const std::function<void()> &f, int repeats) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

double max_gap(const std::vector<float> &a, const std::vector<float> &b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, static_cast<double>(std::abs(a[i] - b[i])));
  return m;
}

void row(const char *name, double ref_ms, double par_ms, double gap) {
  std::printf("%s\t%.2f\t%.2f\t%.1fx\t%.2e\n", name, ref_ms, par_ms, ref_ms / par_ms, gap);
}

}  // namespace

int main(int argc, char **argv) {
  kernels::select_blas_core(argv);
  std::size_t batch = 8, channels = 512;
  int repeats = 5;
  CLI::App app{"Reference vs parallel kernel timings"};
  app.add_option("--batch", batch, "Batch size");
  app.add_option("--channels", channels, "Encoder width");
  app.add_option("--repeats", repeats, "Timed runs per kernel (best is kept)");
  CLI11_PARSE(app, argc, argv);

  std::printf("# threads %d, blas %s, batch %zu, channels %zu\n", kernels::thread_count(),
              kernels::blas_core().c_str(), batch, channels);
  std::printf("kernel\treference_ms\tparallel_ms\tspeedup\tmax_abs_diff\n");

  struct Case {
    const char *name;
    ConvGeometry g;
    std::size_t len;
  };
  const Case cases[] = {
      {"conv k10 s5 (1 -> C, 10240)", {1, channels, 10, 5, 2, 0}, 10240},
      {"conv k8 s4 (C -> C, 2047)", {channels, channels, 8, 4, 2, 0}, 2047},
      {"conv k4 s2 (C -> C, 256)", {channels, channels, 4, 2, 1, 0}, 256},
  };
  for (const Case &c : cases) {
    const std::size_t out_len = c.g.conv_out_len(c.len);
    const auto x = random_vec(batch * c.g.in_channels * c.len, 1);
    const auto w = random_vec(c.g.out_channels * c.g.in_channels * c.g.kernel, 2);
    const auto b = random_vec(c.g.out_channels, 3);
    const auto dy = random_vec(batch * c.g.out_channels * out_len, 4);
    std::vector<float> y_ref(dy.size()), y_par(dy.size());
    const double fr = time_ms([&] { kernels::reference::conv1d_forward(x, w, b, y_ref, batch, c.len, c.g); }, repeats);
    const double fp = time_ms([&] { kernels::conv1d_forward(x, w, b, y_par, batch, c.len, c.g); }, repeats);
    row((std::string(c.name) + " fwd").c_str(), fr, fp, max_gap(y_ref, y_par));

    std::vector<float> dx_ref(x.size()), dw_ref(w.size()), db_ref(b.size());
    std::vector<float> dx_par(x.size()), dw_par(w.size()), db_par(b.size());
    const double br = time_ms([&] {
      std::fill(dx_ref.begin(), dx_ref.end(), 0.0f);
      std::fill(dw_ref.begin(), dw_ref.end(), 0.0f);
      std::fill(db_ref.begin(), db_ref.end(), 0.0f);
      kernels::reference::conv1d_backward(dy, x, w, dx_ref, dw_ref, db_ref, batch, c.len, c.g);
    }, repeats);
    const double bp = time_ms([&] {
      std::fill(dx_par.begin(), dx_par.end(), 0.0f);
      std::fill(dw_par.begin(), dw_par.end(), 0.0f);
      std::fill(db_par.begin(), db_par.end(), 0.0f);
      kernels::conv1d_backward(dy, x, w, dx_par, dw_par, db_par, batch, c.len, c.g);
    }, repeats);
    row((std::string(c.name) + " bwd").c_str(), br, bp,
        std::max(max_gap(dx_ref, dx_par), max_gap(dw_ref, dw_par)));
  }

  {
    // Decoder's first transposed layer at module 3 depth.
    const ConvGeometry g{channels, channels, 4, 2, 1, 1};
    const std::size_t len = 64, out_len = g.transpose_out_len(len);
    const auto x = random_vec(batch * channels * len, 5);
    const auto w = random_vec(channels * channels * 4, 6);
    const auto b = random_vec(channels, 7);
    std::vector<float> y_ref(batch * channels * out_len), y_par(y_ref.size());
    const double r = time_ms([&] { kernels::reference::conv1d_transpose_forward(x, w, b, y_ref, batch, len, g); }, repeats);
    const double p = time_ms([&] { kernels::conv1d_transpose_forward(x, w, b, y_par, batch, len, g); }, repeats);
    row("convT k4 s2 (C -> C, 64) fwd", r, p, max_gap(y_ref, y_par));
  }

  {
    // Score matrices applied to every frame of a batch.
    const std::size_t m = batch * 64, n = channels, k = channels;
    const auto a = random_vec(m * k, 8), bm = random_vec(k * n, 9);
    std::vector<float> c_ref(m * n), c_par(m * n);
    const double r = time_ms([&] {
      kernels::reference::gemm(false, true, m, n, k, 1.0f, a.data(), k, bm.data(), k, 0.0f, c_ref.data(), n);
    }, repeats);
    const double p = time_ms([&] {
      kernels::gemm(false, true, m, n, k, 1.0f, a.data(), k, bm.data(), k, 0.0f, c_par.data(), n);
    }, repeats);
    row("gemm (B*64 x C) * (C x C)^T", r, p, max_gap(c_ref, c_par));
  }
  return 0;
}
