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

#include "sim/kernels.hpp"

#include <cblas.h>

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sim/tensor.hpp"

namespace sim::kernels {

std::size_t ConvGeometry::conv_out_len(std::size_t in_len) const {
  validate();
  if (in_len + 2 * padding < kernel)
    throw ShapeError("conv1d: input length " + std::to_string(in_len) + " + 2*padding " +
                     std::to_string(2 * padding) + " is shorter than kernel " +
                     std::to_string(kernel));
  return (in_len + 2 * padding - kernel) / stride + 1;
}

std::size_t ConvGeometry::transpose_out_len(std::size_t in_len) const {
  validate();
  if (in_len == 0) throw ShapeError("conv1d_transpose: empty input");
  const long long len = static_cast<long long>((in_len - 1) * stride) -
                        2 * static_cast<long long>(padding) +
                        static_cast<long long>(kernel + output_padding);
  if (len <= 0)
    throw ShapeError("conv1d_transpose: non-positive output length for input length " +
                     std::to_string(in_len));
  return static_cast<std::size_t>(len);
}

void ConvGeometry::validate() const {
  if (stride == 0) throw ShapeError("conv geometry: stride must be >= 1");
  if (kernel == 0) throw ShapeError("conv geometry: kernel must be >= 1");
  if (in_channels == 0 || out_channels == 0)
    throw ShapeError("conv geometry: channel counts must be >= 1");
  if (output_padding >= stride && output_padding > 0)
    throw ShapeError("conv geometry: output_padding " + std::to_string(output_padding) +
                     " must be smaller than stride " + std::to_string(stride));
}

namespace {

void expect_size(std::span<const float> s, std::size_t n, const char *what) {
  if (s.size() != n)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(n) +
                     " values, got " + std::to_string(s.size()));
}

bool wanted(std::span<float> s) { return !s.empty(); }

// cols[(c*K + k) * cols_len + j] = signal[c * sig_len + j*s + k - p], zero outside.
void im2col(const float *signal, std::size_t channels, std::size_t sig_len, std::size_t kernel,
            std::size_t stride, std::size_t padding, std::size_t cols_len, float *cols) {
  for (std::size_t c = 0; c < channels; ++c) {
    const float *src = signal + c * sig_len;
    for (std::size_t k = 0; k < kernel; ++k) {
      float *dst = cols + (c * kernel + k) * cols_len;
      for (std::size_t j = 0; j < cols_len; ++j) {
        const long long pos = static_cast<long long>(j * stride + k) -
                              static_cast<long long>(padding);
        dst[j] = (pos >= 0 && pos < static_cast<long long>(sig_len)) ? src[pos] : 0.0f;
      }
    }
  }
}

// Adjoint of im2col: signal += scatter(cols).
void col2im(const float *cols, std::size_t channels, std::size_t sig_len, std::size_t kernel,
            std::size_t stride, std::size_t padding, std::size_t cols_len, float *signal) {
  for (std::size_t c = 0; c < channels; ++c) {
    float *dst = signal + c * sig_len;
    for (std::size_t k = 0; k < kernel; ++k) {
      const float *src = cols + (c * kernel + k) * cols_len;
      for (std::size_t j = 0; j < cols_len; ++j) {
        const long long pos = static_cast<long long>(j * stride + k) -
                              static_cast<long long>(padding);
        if (pos >= 0 && pos < static_cast<long long>(sig_len)) dst[pos] += src[j];
      }
    }
  }
}

void add_bias(float *out, const float *bias, std::size_t channels, std::size_t len) {
  for (std::size_t c = 0; c < channels; ++c) {
    float *row = out + c * len;
    const float b = bias[c];
    for (std::size_t j = 0; j < len; ++j) row[j] += b;
  }
}

void accumulate_bias_grad(const float *dout, float *dbias, std::size_t channels,
                          std::size_t len) {
  for (std::size_t c = 0; c < channels; ++c) {
    const float *row = dout + c * len;
    double s = 0.0;
    for (std::size_t j = 0; j < len; ++j) s += row[j];
    dbias[c] += static_cast<float>(s);
  }
}

}  // namespace

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_thread_count(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
  // OpenMP owns the parallelism; keep BLAS calls single-threaded inside it.
  openblas_set_num_threads(1);
}

std::string blas_core() { return openblas_get_corename(); }

void select_blas_core(char **argv) {
  if (std::getenv("OPENBLAS_CORETYPE") || std::getenv("SIM_NO_REEXEC")) return;
  const char *core = nullptr;
  if (__builtin_cpu_supports("avx512f"))
    core = "SkylakeX";
  else if (__builtin_cpu_supports("avx2"))
    core = "Haswell";
  if (!core) return;
  std::string current = blas_core();
  std::transform(current.begin(), current.end(), current.begin(), ::tolower);
  std::string wanted = core;
  std::transform(wanted.begin(), wanted.end(), wanted.begin(), ::tolower);
  if (current == wanted) return;
  setenv("OPENBLAS_CORETYPE", core, 1);
  setenv("SIM_NO_REEXEC", "1", 1);
  execv("/proc/self/exe", argv);
  // exec failed: carry on with whatever kernel the library picked.
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float *a, std::size_t lda, const float *b, std::size_t ldb, float beta,
          float *c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
              beta, c, static_cast<int>(ldc));
}

void conv1d_forward(std::span<const float> in, std::span<const float> w,
                    std::span<const float> bias, std::span<float> out, std::size_t batch,
                    std::size_t in_len, const ConvGeometry &g) {
  const std::size_t out_len = g.conv_out_len(in_len);
  const std::size_t cin = g.in_channels, cout = g.out_channels, kk = g.kernel;
  expect_size(in, batch * cin * in_len, "conv1d input");
  expect_size(w, cout * cin * kk, "conv1d weight");
  expect_size(bias, cout, "conv1d bias");
  expect_size(out, batch * cout * out_len, "conv1d output");

#pragma omp parallel
  {
    std::vector<float> cols(cin * kk * out_len);
#pragma omp for schedule(static)
    for (std::size_t b = 0; b < batch; ++b) {
      im2col(in.data() + b * cin * in_len, cin, in_len, kk, g.stride, g.padding, out_len,
             cols.data());
      float *o = out.data() + b * cout * out_len;
      gemm(false, false, cout, out_len, cin * kk, 1.0f, w.data(), cin * kk, cols.data(),
           out_len, 0.0f, o, out_len);
      add_bias(o, bias.data(), cout, out_len);
    }
  }
}

void conv1d_backward(std::span<const float> dout, std::span<const float> in,
                     std::span<const float> w, std::span<float> din, std::span<float> dw,
                     std::span<float> dbias, std::size_t batch, std::size_t in_len,
                     const ConvGeometry &g) {
  const std::size_t out_len = g.conv_out_len(in_len);
  const std::size_t cin = g.in_channels, cout = g.out_channels, kk = g.kernel;
  expect_size(dout, batch * cout * out_len, "conv1d grad output");
  expect_size(in, batch * cin * in_len, "conv1d input");
  expect_size(w, cout * cin * kk, "conv1d weight");

  if (wanted(din)) {
    expect_size(din, batch * cin * in_len, "conv1d grad input");
#pragma omp parallel
    {
      std::vector<float> dcols(cin * kk * out_len);
#pragma omp for schedule(static)
      for (std::size_t b = 0; b < batch; ++b) {
        gemm(true, false, cin * kk, out_len, cout, 1.0f, w.data(), cin * kk,
             dout.data() + b * cout * out_len, out_len, 0.0f, dcols.data(), out_len);
        col2im(dcols.data(), cin, in_len, kk, g.stride, g.padding, out_len,
               din.data() + b * cin * in_len);
      }
    }
  }
  // Weight and bias gradients are reduced over the batch in a fixed order.
  if (wanted(dw)) {
    expect_size(dw, cout * cin * kk, "conv1d grad weight");
    std::vector<float> cols(cin * kk * out_len);
    for (std::size_t b = 0; b < batch; ++b) {
      im2col(in.data() + b * cin * in_len, cin, in_len, kk, g.stride, g.padding, out_len,
             cols.data());
      gemm(false, true, cout, cin * kk, out_len, 1.0f, dout.data() + b * cout * out_len,
           out_len, cols.data(), out_len, 1.0f, dw.data(), cin * kk);
    }
  }
  if (wanted(dbias)) {
    expect_size(dbias, cout, "conv1d grad bias");
    for (std::size_t b = 0; b < batch; ++b)
      accumulate_bias_grad(dout.data() + b * cout * out_len, dbias.data(), cout, out_len);
  }
}

void conv1d_transpose_forward(std::span<const float> in, std::span<const float> w,
                              std::span<const float> bias, std::span<float> out,
                              std::size_t batch, std::size_t in_len, const ConvGeometry &g) {
  const std::size_t out_len = g.transpose_out_len(in_len);
  const std::size_t cin = g.in_channels, cout = g.out_channels, kk = g.kernel;
  expect_size(in, batch * cin * in_len, "conv1d_transpose input");
  expect_size(w, cin * cout * kk, "conv1d_transpose weight");
  expect_size(bias, cout, "conv1d_transpose bias");
  expect_size(out, batch * cout * out_len, "conv1d_transpose output");

#pragma omp parallel
  {
    std::vector<float> cols(cout * kk * in_len);
#pragma omp for schedule(static)
    for (std::size_t b = 0; b < batch; ++b) {
      gemm(true, false, cout * kk, in_len, cin, 1.0f, w.data(), cout * kk,
           in.data() + b * cin * in_len, in_len, 0.0f, cols.data(), in_len);
      float *o = out.data() + b * cout * out_len;
      std::fill(o, o + cout * out_len, 0.0f);
      col2im(cols.data(), cout, out_len, kk, g.stride, g.padding, in_len, o);
      add_bias(o, bias.data(), cout, out_len);
    }
  }
}

void conv1d_transpose_backward(std::span<const float> dout, std::span<const float> in,
                               std::span<const float> w, std::span<float> din,
                               std::span<float> dw, std::span<float> dbias,
                               std::size_t batch, std::size_t in_len,
                               const ConvGeometry &g) {
  const std::size_t out_len = g.transpose_out_len(in_len);
  const std::size_t cin = g.in_channels, cout = g.out_channels, kk = g.kernel;
  expect_size(dout, batch * cout * out_len, "conv1d_transpose grad output");
  expect_size(in, batch * cin * in_len, "conv1d_transpose input");
  expect_size(w, cin * cout * kk, "conv1d_transpose weight");

  if (wanted(din)) {
    expect_size(din, batch * cin * in_len, "conv1d_transpose grad input");
#pragma omp parallel
    {
      std::vector<float> dcols(cout * kk * in_len);
#pragma omp for schedule(static)
      for (std::size_t b = 0; b < batch; ++b) {
        im2col(dout.data() + b * cout * out_len, cout, out_len, kk, g.stride, g.padding,
               in_len, dcols.data());
        gemm(false, false, cin, in_len, cout * kk, 1.0f, w.data(), cout * kk, dcols.data(),
             in_len, 1.0f, din.data() + b * cin * in_len, in_len);
      }
    }
  }
  if (wanted(dw)) {
    expect_size(dw, cin * cout * kk, "conv1d_transpose grad weight");
    std::vector<float> dcols(cout * kk * in_len);
    for (std::size_t b = 0; b < batch; ++b) {
      im2col(dout.data() + b * cout * out_len, cout, out_len, kk, g.stride, g.padding, in_len,
             dcols.data());
      gemm(false, true, cin, cout * kk, in_len, 1.0f, in.data() + b * cin * in_len, in_len,
           dcols.data(), in_len, 1.0f, dw.data(), cout * kk);
    }
  }
  if (wanted(dbias)) {
    expect_size(dbias, cout, "conv1d_transpose grad bias");
    for (std::size_t b = 0; b < batch; ++b)
      accumulate_bias_grad(dout.data() + b * cout * out_len, dbias.data(), cout, out_len);
  }
}

}  // namespace sim::kernels
