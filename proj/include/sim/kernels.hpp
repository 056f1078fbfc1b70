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

// Raw 1-D convolution kernels over batched, channels-first buffers.
//
// Two implementations share every signature:
//   sim::kernels             im2col + GEMM, OpenMP-parallel over the batch
//   sim::kernels::reference  plain nested loops, serial, f64 accumulators
//
// The reference path is the oracle for tests and the baseline in
// bench_kernels. Both are deterministic for any thread count: no output
// element is ever reduced across threads.
//
// Buffer layouts (row-major):
//   conv1d            in [B, Cin, Lin]  w [Cout, Cin, K]  out [B, Cout, Lout]
//   conv1d_transpose  in [B, Cin, Lin]  w [Cin, Cout, K]  out [B, Cout, Lout]
// Backward functions ACCUMULATE into din/dw/db; pass an empty span to skip one.

#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace sim::kernels {

struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t output_padding = 0;  // transposed convolution only

  /// floor((L + 2p - K) / s) + 1; throws ShapeError when L + 2p < K.
  std::size_t conv_out_len(std::size_t in_len) const;
  /// (L - 1) s - 2p + K + output_padding; throws when that is not positive.
  std::size_t transpose_out_len(std::size_t in_len) const;
  /// Throws ShapeError on stride 0, kernel 0 or output_padding >= stride.
  void validate() const;
};

void conv1d_forward(std::span<const float> in, std::span<const float> w,
                    std::span<const float> bias, std::span<float> out, std::size_t batch,
                    std::size_t in_len, const ConvGeometry &g);

void conv1d_backward(std::span<const float> dout, std::span<const float> in,
                     std::span<const float> w, std::span<float> din, std::span<float> dw,
                     std::span<float> dbias, std::size_t batch, std::size_t in_len,
                     const ConvGeometry &g);

void conv1d_transpose_forward(std::span<const float> in, std::span<const float> w,
                              std::span<const float> bias, std::span<float> out,
                              std::size_t batch, std::size_t in_len, const ConvGeometry &g);

void conv1d_transpose_backward(std::span<const float> dout, std::span<const float> in,
                               std::span<const float> w, std::span<float> din,
                               std::span<float> dw, std::span<float> dbias,
                               std::size_t batch, std::size_t in_len,
                               const ConvGeometry &g);

/// Row-major C = alpha * op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float *a, std::size_t lda, const float *b, std::size_t ldb, float beta,
          float *c, std::size_t ldc);

/// Threads the parallel kernels use (1 when built without OpenMP).
int thread_count();
void set_thread_count(int n);

/// Name of the BLAS kernel set in use.
std::string blas_core();
/// The system OpenBLAS is a dynamic-arch build that can fall back to generic
/// kernels on CPUs it does not recognise. If the host supports AVX-512 or
/// AVX2 and OPENBLAS_CORETYPE is unset, re-executes the program with it set.
/// Call first thing in main.
void select_blas_core(char **argv);

namespace reference {

void conv1d_forward(std::span<const float> in, std::span<const float> w,
                    std::span<const float> bias, std::span<float> out, std::size_t batch,
                    std::size_t in_len, const ConvGeometry &g);

void conv1d_backward(std::span<const float> dout, std::span<const float> in,
                     std::span<const float> w, std::span<float> din, std::span<float> dw,
                     std::span<float> dbias, std::size_t batch, std::size_t in_len,
                     const ConvGeometry &g);

void conv1d_transpose_forward(std::span<const float> in, std::span<const float> w,
                              std::span<const float> bias, std::span<float> out,
                              std::size_t batch, std::size_t in_len, const ConvGeometry &g);

void conv1d_transpose_backward(std::span<const float> dout, std::span<const float> in,
                               std::span<const float> w, std::span<float> din,
                               std::span<float> dw, std::span<float> dbias,
                               std::size_t batch, std::size_t in_len,
                               const ConvGeometry &g);

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float *a, std::size_t lda, const float *b, std::size_t ldb, float beta,
          float *c, std::size_t ldc);

}  // namespace reference
}  // namespace sim::kernels
