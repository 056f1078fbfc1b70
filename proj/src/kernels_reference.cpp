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

// Serial loop implementations. Slow on purpose: every output element is a
// direct sum straight from the textbook definition.

#include <string>
#include <vector>

#include "sim/kernels.hpp"
#include "sim/tensor.hpp"

namespace sim::kernels::reference {

namespace {

void expect_size(std::span<const float> s, std::size_t n, const char *what) {
  if (s.size() != n)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(n) +
                     " values, got " + std::to_string(s.size()));
}

long long tap(std::size_t j, std::size_t k, const ConvGeometry &g) {
  return static_cast<long long>(j * g.stride + k) - static_cast<long long>(g.padding);
}

}  // namespace

void conv1d_forward(std::span<const float> in, std::span<const float> w,
                    std::span<const float> bias, std::span<float> out, std::size_t batch,
                    std::size_t in_len, const ConvGeometry &g) {
  const std::size_t out_len = g.conv_out_len(in_len);
  const std::size_t cin = g.in_channels, cout = g.out_channels, kk = g.kernel;
  expect_size(in, batch * cin * in_len, "conv1d input");
  expect_size(w, cout * cin * kk, "conv1d weight");
  expect_size(bias, cout, "conv1d bias");
  expect_size(out, batch * cout * out_len, "conv1d output");
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t j = 0; j < out_len; ++j) {
        double acc = bias[co];
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t k = 0; k < kk; ++k) {
            const long long pos = tap(j, k, g);
            if (pos < 0 || pos >= static_cast<long long>(in_len)) continue;
            acc += static_cast<double>(w[(co * cin + ci) * kk + k]) *
                   in[(b * cin + ci) * in_len + pos];
          }
        out[(b * cout + co) * out_len + j] = static_cast<float>(acc);
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
  if (!din.empty()) {
    std::vector<double> acc(din.size(), 0.0);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t j = 0; j < out_len; ++j)
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t k = 0; k < kk; ++k) {
              const long long pos = tap(j, k, g);
              if (pos < 0 || pos >= static_cast<long long>(in_len)) continue;
              acc[(b * cin + ci) * in_len + pos] +=
                  static_cast<double>(w[(co * cin + ci) * kk + k]) *
                  dout[(b * cout + co) * out_len + j];
            }
    for (std::size_t i = 0; i < din.size(); ++i) din[i] += static_cast<float>(acc[i]);
  }
  if (!dw.empty()) {
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t k = 0; k < kk; ++k) {
          double acc = 0.0;
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < out_len; ++j) {
              const long long pos = tap(j, k, g);
              if (pos < 0 || pos >= static_cast<long long>(in_len)) continue;
              acc += static_cast<double>(dout[(b * cout + co) * out_len + j]) *
                     in[(b * cin + ci) * in_len + pos];
            }
          dw[(co * cin + ci) * kk + k] += static_cast<float>(acc);
        }
  }
  if (!dbias.empty()) {
    for (std::size_t co = 0; co < cout; ++co) {
      double acc = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < out_len; ++j) acc += dout[(b * cout + co) * out_len + j];
      dbias[co] += static_cast<float>(acc);
    }
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
  std::vector<double> acc(out.size(), 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t j = 0; j < in_len; ++j)
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t k = 0; k < kk; ++k) {
            const long long pos = tap(j, k, g);
            if (pos < 0 || pos >= static_cast<long long>(out_len)) continue;
            acc[(b * cout + co) * out_len + pos] +=
                static_cast<double>(in[(b * cin + ci) * in_len + j]) *
                w[(ci * cout + co) * kk + k];
          }
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t p = 0; p < out_len; ++p) {
        const std::size_t i = (b * cout + co) * out_len + p;
        out[i] = static_cast<float>(acc[i] + bias[co]);
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
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t j = 0; j < in_len; ++j) {
        double acc = 0.0;
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t k = 0; k < kk; ++k) {
            const long long pos = tap(j, k, g);
            if (pos < 0 || pos >= static_cast<long long>(out_len)) continue;
            acc += static_cast<double>(w[(ci * cout + co) * kk + k]) *
                   dout[(b * cout + co) * out_len + pos];
          }
        if (!din.empty()) din[(b * cin + ci) * in_len + j] += static_cast<float>(acc);
      }
  if (!dw.empty()) {
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t k = 0; k < kk; ++k) {
          double acc = 0.0;
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < in_len; ++j) {
              const long long pos = tap(j, k, g);
              if (pos < 0 || pos >= static_cast<long long>(out_len)) continue;
              acc += static_cast<double>(in[(b * cin + ci) * in_len + j]) *
                     dout[(b * cout + co) * out_len + pos];
            }
          dw[(ci * cout + co) * kk + k] += static_cast<float>(acc);
        }
  }
  if (!dbias.empty()) {
    for (std::size_t co = 0; co < cout; ++co) {
      double acc = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t p = 0; p < out_len; ++p) acc += dout[(b * cout + co) * out_len + p];
      dbias[co] += static_cast<float>(acc);
    }
  }
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float *a, std::size_t lda, const float *b, std::size_t ldb, float beta,
          float *c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const float av = trans_a ? a[p * lda + i] : a[i * lda + p];
        const float bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
        acc += static_cast<double>(av) * bv;
      }
      const float prev = beta == 0.0f ? 0.0f : beta * c[i * ldc + j];
      c[i * ldc + j] = static_cast<float>(alpha * acc) + prev;
    }
}

}  // namespace sim::kernels::reference
