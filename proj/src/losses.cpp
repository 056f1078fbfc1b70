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

#include "sim/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sim/kernels.hpp"

namespace sim {

namespace {

double dot(const float *a, const float *b, std::size_t n) {
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

double score(std::span<const float> z_future, std::span<const float> z_t, const Tensor &w) {
  if (w.rank() != 2 || w.shape()[0] != z_future.size() || w.shape()[1] != z_t.size())
    throw ShapeError("score: W " + shape_string(w.shape()) + " does not match vectors of size " +
                     std::to_string(z_future.size()) + " and " + std::to_string(z_t.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < z_future.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < z_t.size(); ++j) row += static_cast<double>(w.at(i, j)) * z_t[j];
    s += z_future[i] * row;
  }
  return s;
}

std::size_t CandidateSet::total_rows() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < steps; ++k) n += rows(k);
  return n;
}

std::span<const std::uint32_t> CandidateSet::at(std::size_t k, std::size_t b,
                                                std::size_t t) const {
  if (k == 0 || k > steps || b >= batch || t + k >= frames)
    throw std::out_of_range("CandidateSet::at: (k, b, t) out of range");
  const std::size_t row = offset[k - 1] + b * (frames - k) + t;
  return {index.data() + row * candidates, candidates};
}

CandidateSet draw_negatives(std::size_t batch, std::size_t frames, std::size_t steps,
                            std::size_t n_neg, RngStream &rng) {
  if (frames <= steps)
    throw std::invalid_argument("info_nce needs more frames (" + std::to_string(frames) +
                                ") than prediction steps (" + std::to_string(steps) + ")");
  const std::size_t total = batch * frames;
  if (total < 2 || n_neg == 0)
    throw std::invalid_argument("draw_negatives: need at least two frames and one negative");
  CandidateSet set;
  set.batch = batch;
  set.frames = frames;
  set.steps = steps;
  set.candidates = n_neg + 1;
  std::size_t rows = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    set.offset.push_back(rows);
    rows += set.rows(k);
  }
  set.index.resize(rows * set.candidates);
  std::uint32_t *out = set.index.data();
  for (std::size_t k = 1; k <= steps; ++k)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t + k < frames; ++t) {
        const auto pos = static_cast<std::uint32_t>(b * frames + t + k);
        *out++ = pos;
        for (std::size_t n = 0; n < n_neg; ++n) {
          auto u = static_cast<std::uint32_t>(rng.below(total - 1));
          if (u >= pos) ++u;
          *out++ = u;
        }
      }
  return set;
}

NceResult info_nce(const Var &z, const Var &c, std::span<const Var> w,
                   const CandidateSet &candidates) {
  if (z.value().rank() != 3 || c.value().rank() != 3)
    throw ShapeError("info_nce: z and c must be [B, T, D], got " + shape_string(z.shape()) +
                     " and " + shape_string(c.shape()));
  const std::size_t batch = z.shape()[0], frames = z.shape()[1], dz = z.shape()[2];
  const std::size_t dc = c.shape()[2];
  if (c.shape()[0] != batch || c.shape()[1] != frames)
    throw ShapeError("info_nce: z " + shape_string(z.shape()) + " and context " +
                     shape_string(c.shape()) + " disagree on batch or time");
  const std::size_t steps = w.size();
  if (frames <= steps)
    throw std::invalid_argument("info_nce needs more frames (" + std::to_string(frames) +
                                ") than prediction steps (" + std::to_string(steps) + ")");
  if (candidates.batch != batch || candidates.frames != frames || candidates.steps != steps)
    throw std::invalid_argument("info_nce: candidate set was drawn for a different batch shape");
  for (const Var &wk : w)
    if (wk.shape() != Shape{dz, dc})
      throw ShapeError("info_nce: score matrix " + shape_string(wk.shape()) + " expected " +
                       shape_string({dz, dc}));

  const std::size_t bt = batch * frames, n_cand = candidates.candidates;
  const std::size_t total_rows = candidates.total_rows();
  const float *zp = z.value().ptr();
  const float *cp = c.value().ptr();

  auto pred = std::make_shared<std::vector<float>>(steps * bt * dz);
  auto probs = std::make_shared<std::vector<float>>(total_rows * n_cand);
  std::vector<double> row_loss(total_rows);
  for (std::size_t k = 1; k <= steps; ++k) {
    float *pk = pred->data() + (k - 1) * bt * dz;
    kernels::gemm(false, true, bt, dz, dc, 1.0f, cp, dc, w[k - 1].value().ptr(), dc, 0.0f, pk,
                  dz);
    const std::size_t span_t = frames - k;
    const std::size_t base = candidates.offset[k - 1];
#pragma omp parallel
    {
      std::vector<double> logit(n_cand);
#pragma omp for schedule(static)
    for (std::size_t r = 0; r < batch * span_t; ++r) {
      const std::size_t b = r / span_t, t = r % span_t;
      const std::uint32_t *cand = candidates.index.data() + (base + r) * n_cand;
      const float *p = pk + (b * frames + t) * dz;
      for (std::size_t n = 0; n < n_cand; ++n)
        logit[n] = dot(zp + static_cast<std::size_t>(cand[n]) * dz, p, dz);
      const double lse = log_sum_exp(logit);
      row_loss[base + r] = lse - logit[0];
      float *pr = probs->data() + (base + r) * n_cand;
      for (std::size_t n = 0; n < n_cand; ++n)
        pr[n] = static_cast<float>(std::exp(logit[n] - lse));
    }
    }
  }

  NceResult result;
  double total = 0.0;
  for (std::size_t k = 1; k <= steps; ++k) {
    double sk = 0.0;
    const std::size_t rows = candidates.rows(k - 1);
    for (std::size_t r = 0; r < rows; ++r) sk += row_loss[candidates.offset[k - 1] + r];
    total += sk;
    result.per_k.push_back(sk / static_cast<double>(rows));
  }
  const double count = static_cast<double>(total_rows);
  result.value = total / count;

  auto index = std::make_shared<std::vector<std::uint32_t>>(candidates.index);
  const std::vector<std::size_t> offsets = candidates.offset;
  auto backward_fn = [=](Node &n) {
    Node &zn = *n.parents[0];
    Node &cn = *n.parents[1];
    Tensor *dzt = zn.requires_grad ? &zn.grad_buffer() : nullptr;
    Tensor *dct = cn.requires_grad ? &cn.grad_buffer() : nullptr;
    const float g = static_cast<float>(n.grad[0] / count);
    const float *zv = zn.value.ptr();
    const float *cv = cn.value.ptr();
    std::vector<float> dpred(bt * dz);
    for (std::size_t k = 1; k <= steps; ++k) {
      Node &wn = *n.parents[1 + k];
      std::fill(dpred.begin(), dpred.end(), 0.0f);
      const float *pk = pred->data() + (k - 1) * bt * dz;
      const std::size_t span_t = frames - k;
      const std::size_t base = offsets[k - 1];
      for (std::size_t r = 0; r < batch * span_t; ++r) {
        const std::size_t b = r / span_t, t = r % span_t;
        const std::size_t row = b * frames + t;
        const std::uint32_t *cand = index->data() + (base + r) * n_cand;
        const float *pr = probs->data() + (base + r) * n_cand;
        float *dp = dpred.data() + row * dz;
        const float *p = pk + row * dz;
        for (std::size_t j = 0; j < n_cand; ++j) {
          const float coef = g * (pr[j] - (j == 0 ? 1.0f : 0.0f));
          const std::size_t src = static_cast<std::size_t>(cand[j]) * dz;
          const float *zc = zv + src;
          for (std::size_t d = 0; d < dz; ++d) dp[d] += coef * zc[d];
          if (dzt) {
            float *gz = dzt->ptr() + src;
            for (std::size_t d = 0; d < dz; ++d) gz[d] += coef * p[d];
          }
        }
      }
      if (wn.requires_grad)
        kernels::gemm(true, false, dz, dc, bt, 1.0f, dpred.data(), dz, cv, dc, 1.0f,
                      wn.grad_buffer().ptr(), dc);
      if (dct)
        kernels::gemm(false, false, bt, dc, dz, 1.0f, dpred.data(), dz, wn.value.ptr(), dc,
                      1.0f, dct->ptr(), dc);
    }
  };
  std::vector<Var> parents{z, c};
  parents.insert(parents.end(), w.begin(), w.end());
  result.loss = make_result(Tensor::scalar(static_cast<float>(result.value)), std::move(parents),
                            std::move(backward_fn));
  return result;
}

double info_nce_from_logits(const Tensor &logits) {
  if (logits.rank() != 2 || logits.shape()[1] < 2 || logits.shape()[0] == 0)
    throw ShapeError("info_nce_from_logits: expected [rows, N >= 2], got " +
                     shape_string(logits.shape()));
  const std::size_t rows = logits.shape()[0], n = logits.shape()[1];
  std::vector<double> row(n);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) row[j] = logits.at(r, j);
    total += log_sum_exp(row) - row[0];
  }
  return total / static_cast<double>(rows);
}

double kl_standard_normal(const Tensor &mu, const Tensor &sigma) {
  if (mu.shape() != sigma.shape() || mu.rank() == 0)
    throw ShapeError("kl_standard_normal: mu " + shape_string(mu.shape()) + " vs sigma " +
                     shape_string(sigma.shape()));
  const std::size_t dims = mu.shape().back();
  const std::size_t positions = mu.numel() / dims;
  double total = 0.0;
  const auto m = mu.data();
  const auto s = sigma.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double sd = s[i];
    if (!(sd > 0.0) || !std::isfinite(sd))
      throw NumericError("kl_standard_normal: sigma must be finite and > 0, got " +
                         std::to_string(sd));
    const double md = m[i];
    total += 0.5 * (md * md + sd * sd - 1.0 - 2.0 * std::log(sd));
  }
  return total / static_cast<double>(positions);
}

Var kl_standard_normal(const Var &mu, const Var &sigma) {
  const double value = kl_standard_normal(mu.value(), sigma.value());
  const double positions = static_cast<double>(mu.value().numel() / mu.shape().back());
  return make_result(Tensor::scalar(static_cast<float>(value)), {mu, sigma}, [positions](Node &n) {
    const float g = static_cast<float>(n.grad[0] / positions);
    Node &mn = *n.parents[0];
    Node &sn = *n.parents[1];
    if (mn.requires_grad) {
      auto dm = mn.grad_buffer().data();
      const auto m = mn.value.data();
      for (std::size_t i = 0; i < m.size(); ++i) dm[i] += g * m[i];
    }
    if (sn.requires_grad) {
      auto ds = sn.grad_buffer().data();
      const auto s = sn.value.data();
      for (std::size_t i = 0; i < s.size(); ++i) ds[i] += g * (s[i] - 1.0f / s[i]);
    }
  });
}

LossBreakdown smooth_info_nce(const LatentFrames &latents, std::span<const Var> w, double beta,
                              const CandidateSet &candidates) {
  if (!latents.stochastic())
    throw std::invalid_argument("smooth_info_nce: latents carry no mu/sigma");
  NceResult nce = info_nce(latents.z, latents.z, w, candidates);
  Var kl = kl_standard_normal(latents.mu, latents.sigma);
  LossBreakdown out;
  out.nce = nce.value;
  out.per_k = std::move(nce.per_k);
  out.kl = kl_standard_normal(latents.mu.value(), latents.sigma.value());
  out.kl_per_dim = out.kl / static_cast<double>(latents.dims());
  out.total_value = out.nce + beta * out.kl;
  out.total = ops::add(nce.loss, ops::scale(kl, static_cast<float>(beta)));
  return out;
}

double mi_lower_bound(double nce_loss, std::size_t n_candidates) {
  return std::log(static_cast<double>(n_candidates)) - nce_loss;
}

double cross_entropy(const Tensor &logits, std::span<const int> labels) {
  if (logits.rank() != 2 || labels.size() != logits.shape()[0])
    throw ShapeError("cross_entropy: logits " + shape_string(logits.shape()) + " with " +
                     std::to_string(labels.size()) + " labels");
  const std::size_t classes = logits.shape()[1];
  std::vector<double> row(classes);
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes)
      throw std::out_of_range("cross_entropy: label " + std::to_string(labels[r]) +
                              " outside [0, " + std::to_string(classes) + ")");
    for (std::size_t j = 0; j < classes; ++j) row[j] = logits.at(r, j);
    total += log_sum_exp(row) - row[static_cast<std::size_t>(labels[r])];
  }
  return total / static_cast<double>(labels.size());
}

}  // namespace sim
