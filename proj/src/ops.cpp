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

#include "sim/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sim/kernels.hpp"

namespace sim::ops {

namespace {

// Gradient buffer of parent i, or nullptr when it does not need one.
Tensor *parent_grad(Node &node, std::size_t i) {
  Node &p = *node.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

const Tensor &parent_value(const Node &node, std::size_t i) { return node.parents[i]->value; }

std::span<float> span_or_empty(Tensor *t) {
  return t ? t->data() : std::span<float>{};
}

void expect_rank(const Var &v, std::size_t rank, const char *what) {
  if (v.value().rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     " tensor, got " + shape_string(v.shape()));
}

void expect_same_shape(const Var &a, const Var &b, const char *what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
}

template <class F>
Var unary(const Var &x, F f, std::function<void(Node &)> bw) {
  Tensor out(x.shape());
  const auto in = x.value().data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(std::move(out), {x}, std::move(bw));
}

inline float sigmoid(float v) { return 1.0f / (1.0f + std::exp(-v)); }

}  // namespace

Var conv1d(const Var &x, const Var &w, const Var &b, std::size_t stride, std::size_t padding) {
  expect_rank(x, 3, "conv1d input");
  expect_rank(w, 3, "conv1d weight");
  const std::size_t batch = x.shape()[0], cin = x.shape()[1], len = x.shape()[2];
  if (w.shape()[1] != cin)
    throw ShapeError("conv1d: input has " + std::to_string(cin) +
                     " channels but weight expects " + std::to_string(w.shape()[1]) +
                     " (weight " + shape_string(w.shape()) + ")");
  kernels::ConvGeometry g{cin, w.shape()[0], w.shape()[2], stride, padding, 0};
  if (b.shape() != Shape{g.out_channels})
    throw ShapeError("conv1d: bias shape " + shape_string(b.shape()) + " does not match " +
                     std::to_string(g.out_channels) + " output channels");
  const std::size_t out_len = g.conv_out_len(len);
  Tensor out({batch, g.out_channels, out_len});
  kernels::conv1d_forward(x.value().data(), w.value().data(), b.value().data(), out.data(),
                          batch, len, g);
  return make_result(std::move(out), {x, w, b}, [g, batch, len](Node &n) {
    kernels::conv1d_backward(n.grad.data(), parent_value(n, 0).data(),
                             parent_value(n, 1).data(), span_or_empty(parent_grad(n, 0)),
                             span_or_empty(parent_grad(n, 1)),
                             span_or_empty(parent_grad(n, 2)), batch, len, g);
  });
}

Var conv1d_transpose(const Var &x, const Var &w, const Var &b, std::size_t stride,
                     std::size_t padding, std::size_t output_padding) {
  expect_rank(x, 3, "conv1d_transpose input");
  expect_rank(w, 3, "conv1d_transpose weight");
  const std::size_t batch = x.shape()[0], cin = x.shape()[1], len = x.shape()[2];
  if (w.shape()[0] != cin)
    throw ShapeError("conv1d_transpose: input has " + std::to_string(cin) +
                     " channels but weight expects " + std::to_string(w.shape()[0]) +
                     " (weight " + shape_string(w.shape()) + ")");
  kernels::ConvGeometry g{cin, w.shape()[1], w.shape()[2], stride, padding, output_padding};
  if (b.shape() != Shape{g.out_channels})
    throw ShapeError("conv1d_transpose: bias shape " + shape_string(b.shape()) +
                     " does not match " + std::to_string(g.out_channels) +
                     " output channels");
  const std::size_t out_len = g.transpose_out_len(len);
  Tensor out({batch, g.out_channels, out_len});
  kernels::conv1d_transpose_forward(x.value().data(), w.value().data(), b.value().data(),
                                    out.data(), batch, len, g);
  return make_result(std::move(out), {x, w, b}, [g, batch, len](Node &n) {
    kernels::conv1d_transpose_backward(
        n.grad.data(), parent_value(n, 0).data(), parent_value(n, 1).data(),
        span_or_empty(parent_grad(n, 0)), span_or_empty(parent_grad(n, 1)),
        span_or_empty(parent_grad(n, 2)), batch, len, g);
  });
}

Var relu(const Var &x) {
  return unary(x, [](float v) { return v > 0.0f ? v : 0.0f; }, [](Node &n) {
    Tensor *gx = parent_grad(n, 0);
    if (!gx) return;
    const Tensor &y = n.value;
    for (std::size_t i = 0; i < y.numel(); ++i)
      if (y[i] > 0.0f) (*gx)[i] += n.grad[i];
  });
}

Var exp(const Var &x) {
  return unary(x, [](float v) { return std::exp(v); }, [](Node &n) {
    Tensor *gx = parent_grad(n, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < n.value.numel(); ++i) (*gx)[i] += n.grad[i] * n.value[i];
  });
}

Var scale(const Var &x, float s) {
  return unary(x, [s](float v) { return s * v; }, [s](Node &n) {
    Tensor *gx = parent_grad(n, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < n.grad.numel(); ++i) (*gx)[i] += s * n.grad[i];
  });
}

Var add(const Var &a, const Var &b) {
  expect_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node &n) {
    for (std::size_t p = 0; p < 2; ++p)
      if (Tensor *g = parent_grad(n, p))
        for (std::size_t i = 0; i < n.grad.numel(); ++i) (*g)[i] += n.grad[i];
  });
}

Var sub(const Var &a, const Var &b) {
  expect_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node &n) {
    if (Tensor *g = parent_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.numel(); ++i) (*g)[i] += n.grad[i];
    if (Tensor *g = parent_grad(n, 1))
      for (std::size_t i = 0; i < n.grad.numel(); ++i) (*g)[i] -= n.grad[i];
  });
}

Var mul(const Var &a, const Var &b) {
  expect_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node &n) {
    const Tensor &av = parent_value(n, 0), &bv = parent_value(n, 1);
    if (Tensor *g = parent_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.numel(); ++i) (*g)[i] += n.grad[i] * bv[i];
    if (Tensor *g = parent_grad(n, 1))
      for (std::size_t i = 0; i < n.grad.numel(); ++i) (*g)[i] += n.grad[i] * av[i];
  });
}

Var sum(const Var &x) {
  double acc = 0.0;
  for (float v : x.value().data()) acc += v;
  return make_result(Tensor::scalar(static_cast<float>(acc)), {x}, [](Node &n) {
    Tensor *g = parent_grad(n, 0);
    if (!g) return;
    const float up = n.grad[0];
    for (auto &v : g->data()) v += up;
  });
}

Var mean(const Var &x) {
  const double count = static_cast<double>(x.value().numel());
  double acc = 0.0;
  for (float v : x.value().data()) acc += v;
  return make_result(Tensor::scalar(static_cast<float>(acc / count)), {x}, [count](Node &n) {
    Tensor *g = parent_grad(n, 0);
    if (!g) return;
    const float up = static_cast<float>(n.grad[0] / count);
    for (auto &v : g->data()) v += up;
  });
}

Var transpose12(const Var &x) {
  expect_rank(x, 3, "transpose12");
  const std::size_t b = x.shape()[0], a = x.shape()[1], c = x.shape()[2];
  Tensor out({b, c, a});
  const float *src = x.value().ptr();
  float *dst = out.ptr();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < a; ++j)
      for (std::size_t k = 0; k < c; ++k) dst[(i * c + k) * a + j] = src[(i * a + j) * c + k];
  return make_result(std::move(out), {x}, [b, a, c](Node &n) {
    Tensor *g = parent_grad(n, 0);
    if (!g) return;
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < a; ++j)
        for (std::size_t k = 0; k < c; ++k)
          (*g)[(i * a + j) * c + k] += n.grad[(i * c + k) * a + j];
  });
}

Var mean_time(const Var &x) {
  expect_rank(x, 3, "mean_time");
  const std::size_t b = x.shape()[0], t = x.shape()[1], d = x.shape()[2];
  if (t == 0) throw ShapeError("mean_time: zero frames");
  Tensor out({b, d});
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < t; ++j) acc += x.value().at(i, j, k);
      out.at(i, k) = static_cast<float>(acc / static_cast<double>(t));
    }
  return make_result(std::move(out), {x}, [b, t, d](Node &n) {
    Tensor *g = parent_grad(n, 0);
    if (!g) return;
    const float inv = 1.0f / static_cast<float>(t);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < t; ++j)
        for (std::size_t k = 0; k < d; ++k) g->at(i, j, k) += n.grad.at(i, k) * inv;
  });
}

Var linear(const Var &x, const Var &w, const Var *b) {
  expect_rank(x, 2, "linear input");
  expect_rank(w, 2, "linear weight");
  const std::size_t rows = x.shape()[0], din = x.shape()[1], dout = w.shape()[0];
  if (w.shape()[1] != din)
    throw ShapeError("linear: input width " + std::to_string(din) +
                     " does not match weight " + shape_string(w.shape()));
  if (b && b->shape() != Shape{dout})
    throw ShapeError("linear: bias shape " + shape_string(b->shape()) + " does not match " +
                     std::to_string(dout) + " outputs");
  Tensor out({rows, dout});
  kernels::gemm(false, true, rows, dout, din, 1.0f, x.value().ptr(), din, w.value().ptr(), din,
                0.0f, out.ptr(), dout);
  if (b)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < dout; ++c) out.at(r, c) += b->value()[c];
  std::vector<Var> parents{x, w};
  if (b) parents.push_back(*b);
  const bool has_bias = b != nullptr;
  return make_result(std::move(out), std::move(parents), [rows, din, dout, has_bias](Node &n) {
    const Tensor &xv = parent_value(n, 0), &wv = parent_value(n, 1);
    if (Tensor *gx = parent_grad(n, 0))
      kernels::gemm(false, false, rows, din, dout, 1.0f, n.grad.ptr(), dout, wv.ptr(), din,
                    1.0f, gx->ptr(), din);
    if (Tensor *gw = parent_grad(n, 1))
      kernels::gemm(true, false, dout, din, rows, 1.0f, n.grad.ptr(), dout, xv.ptr(), din,
                    1.0f, gw->ptr(), din);
    if (has_bias)
      if (Tensor *gb = parent_grad(n, 2))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < dout; ++c) (*gb)[c] += n.grad.at(r, c);
  });
}

Var gru(const Var &x, const GruWeights &w, const Var *h0) {
  expect_rank(x, 3, "gru input");
  const std::size_t batch = x.shape()[0], steps = x.shape()[1], din = x.shape()[2];
  const std::size_t hid = w.w_hh.shape().at(1);
  const std::size_t g3 = 3 * hid;
  expect_shape(w.w_ih.value(), {g3, din}, "gru w_ih");
  expect_shape(w.w_hh.value(), {g3, hid}, "gru w_hh");
  expect_shape(w.b_ih.value(), {g3}, "gru b_ih");
  expect_shape(w.b_hh.value(), {g3}, "gru b_hh");
  if (h0) expect_shape(h0->value(), {batch, hid}, "gru h0");

  // Input projections for every frame at once: [B*T, 3H].
  std::vector<float> gi(batch * steps * g3);
  kernels::gemm(false, true, batch * steps, g3, din, 1.0f, x.value().ptr(), din,
                w.w_ih.value().ptr(), din, 0.0f, gi.data(), g3);

  // Saved per (b, t): reset, update, candidate and the recurrent candidate
  // pre-activation W_hn h + b_hn.
  std::vector<float> r_s(batch * steps * hid), z_s(r_s.size()), n_s(r_s.size()),
      ghn_s(r_s.size());
  Tensor out({batch, steps, hid});
  std::vector<float> h(batch * hid, 0.0f), gh(batch * g3);
  if (h0) std::copy(h0->value().data().begin(), h0->value().data().end(), h.begin());
  const float *bih = w.b_ih.value().ptr();
  const float *bhh = w.b_hh.value().ptr();
  for (std::size_t t = 0; t < steps; ++t) {
    kernels::gemm(false, true, batch, g3, hid, 1.0f, h.data(), hid, w.w_hh.value().ptr(), hid,
                  0.0f, gh.data(), g3);
    for (std::size_t b = 0; b < batch; ++b) {
      const float *gib = gi.data() + (b * steps + t) * g3;
      const float *ghb = gh.data() + b * g3;
      const std::size_t s = (b * steps + t) * hid;
      for (std::size_t k = 0; k < hid; ++k) {
        const float r = sigmoid(gib[k] + bih[k] + ghb[k] + bhh[k]);
        const float z = sigmoid(gib[hid + k] + bih[hid + k] + ghb[hid + k] + bhh[hid + k]);
        const float ghn = ghb[2 * hid + k] + bhh[2 * hid + k];
        const float nn = std::tanh(gib[2 * hid + k] + bih[2 * hid + k] + r * ghn);
        const float hn = (1.0f - z) * nn + z * h[b * hid + k];
        r_s[s + k] = r;
        z_s[s + k] = z;
        n_s[s + k] = nn;
        ghn_s[s + k] = ghn;
        out.at(b, t, k) = hn;
      }
    }
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < hid; ++k) h[b * hid + k] = out.at(b, t, k);
  }
  out.check_finite("gru state");

  std::vector<Var> parents{x, w.w_ih, w.w_hh, w.b_ih, w.b_hh};
  if (h0) parents.push_back(*h0);
  const bool has_h0 = h0 != nullptr;
  return make_result(
      std::move(out), std::move(parents),
      [=, r_s = std::move(r_s), z_s = std::move(z_s), n_s = std::move(n_s),
       ghn_s = std::move(ghn_s)](Node &n) {
        const Tensor &xv = parent_value(n, 0);
        const Tensor &wih = parent_value(n, 1), &whh = parent_value(n, 2);
        const Tensor *h0v = has_h0 ? &parent_value(n, 5) : nullptr;
        std::vector<float> dgi(batch * steps * g3, 0.0f);
        std::vector<float> dgh(batch * g3), dh(batch * hid, 0.0f), hprev(batch * hid);
        Tensor *gwhh = parent_grad(n, 2);
        Tensor *gbhh = parent_grad(n, 4);
        for (std::size_t tt = steps; tt-- > 0;) {
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t k = 0; k < hid; ++k) {
              hprev[b * hid + k] = tt > 0 ? n.value.at(b, tt - 1, k)
                                          : (h0v ? (*h0v)[b * hid + k] : 0.0f);
            }
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t s = (b * steps + tt) * hid;
            float *dgib = dgi.data() + (b * steps + tt) * g3;
            float *dghb = dgh.data() + b * g3;
            for (std::size_t k = 0; k < hid; ++k) {
              const float dhk = dh[b * hid + k] + n.grad.at(b, tt, k);
              const float r = r_s[s + k], z = z_s[s + k], nn = n_s[s + k];
              const float dn = dhk * (1.0f - z);
              const float dz = dhk * (hprev[b * hid + k] - nn);
              const float dn_pre = dn * (1.0f - nn * nn);
              const float dr = dn_pre * ghn_s[s + k];
              const float dz_pre = dz * z * (1.0f - z);
              const float dr_pre = dr * r * (1.0f - r);
              dgib[k] = dr_pre;
              dgib[hid + k] = dz_pre;
              dgib[2 * hid + k] = dn_pre;
              dghb[k] = dr_pre;
              dghb[hid + k] = dz_pre;
              dghb[2 * hid + k] = dn_pre * r;
              dh[b * hid + k] = dhk * z;
            }
          }
          // dh_prev += dgh W_hh
          kernels::gemm(false, false, batch, hid, g3, 1.0f, dgh.data(), g3, whh.ptr(), hid, 1.0f,
                        dh.data(), hid);
          if (gwhh)
            kernels::gemm(true, false, g3, hid, batch, 1.0f, dgh.data(), g3, hprev.data(), hid,
                          1.0f, gwhh->ptr(), hid);
          if (gbhh)
            for (std::size_t b = 0; b < batch; ++b)
              for (std::size_t j = 0; j < g3; ++j) (*gbhh)[j] += dgh[b * g3 + j];
        }
        if (Tensor *gx = parent_grad(n, 0))
          kernels::gemm(false, false, batch * steps, din, g3, 1.0f, dgi.data(), g3, wih.ptr(),
                        din, 1.0f, gx->ptr(), din);
        if (Tensor *gwih = parent_grad(n, 1))
          kernels::gemm(true, false, g3, din, batch * steps, 1.0f, dgi.data(), g3, xv.ptr(), din,
                        1.0f, gwih->ptr(), din);
        if (Tensor *gbih = parent_grad(n, 3))
          for (std::size_t r = 0; r < batch * steps; ++r)
            for (std::size_t j = 0; j < g3; ++j) (*gbih)[j] += dgi[r * g3 + j];
        if (has_h0)
          if (Tensor *gh0 = parent_grad(n, 5))
            for (std::size_t i = 0; i < dh.size(); ++i) (*gh0)[i] += dh[i];
      });
}

Var mse(const Var &prediction, const Var &target) {
  expect_same_shape(prediction, target, "mse");
  const auto p = prediction.value().data(), t = target.value().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - t[i];
    acc += d * d;
  }
  const double count = static_cast<double>(p.size());
  return make_result(Tensor::scalar(static_cast<float>(acc / count)), {prediction, target},
                     [count](Node &n) {
                       const Tensor &pv = parent_value(n, 0), &tv = parent_value(n, 1);
                       const float s = static_cast<float>(2.0 * n.grad[0] / count);
                       if (Tensor *g = parent_grad(n, 0))
                         for (std::size_t i = 0; i < pv.numel(); ++i)
                           (*g)[i] += s * (pv[i] - tv[i]);
                       if (Tensor *g = parent_grad(n, 1))
                         for (std::size_t i = 0; i < pv.numel(); ++i)
                           (*g)[i] -= s * (pv[i] - tv[i]);
                     });
}

Var cross_entropy(const Var &logits, std::span<const int> labels) {
  expect_rank(logits, 2, "cross_entropy logits");
  const std::size_t rows = logits.shape()[0], classes = logits.shape()[1];
  if (labels.size() != rows)
    throw ShapeError("cross_entropy: " + std::to_string(rows) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  std::vector<float> probs(rows * classes);
  std::vector<int> lab(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (lab[r] < 0 || static_cast<std::size_t>(lab[r]) >= classes)
      throw std::out_of_range("cross_entropy: label " + std::to_string(lab[r]) +
                              " outside [0, " + std::to_string(classes) + ")");
    const float *row = logits.value().ptr() + r * classes;
    const double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    const double lse = mx + std::log(z);
    total += lse - row[lab[r]];
    for (std::size_t c = 0; c < classes; ++c)
      probs[r * classes + c] = static_cast<float>(std::exp(row[c] - lse));
  }
  const double count = static_cast<double>(rows);
  return make_result(Tensor::scalar(static_cast<float>(total / count)), {logits},
                     [=, probs = std::move(probs), lab = std::move(lab)](Node &n) {
                       Tensor *g = parent_grad(n, 0);
                       if (!g) return;
                       const float s = static_cast<float>(n.grad[0] / count);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < classes; ++c) {
                           const float onehot = static_cast<int>(c) == lab[r] ? 1.0f : 0.0f;
                           (*g)[r * classes + c] += s * (probs[r * classes + c] - onehot);
                         }
                     });
}

}  // namespace sim::ops
