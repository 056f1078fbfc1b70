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

// Contrastive and variational objectives.
//
// Scores are log-bilinear: s = z_{t+k}^T W_k c_t. They only ever enter a
// log-sum-exp, the exponentiated score is never formed.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sim/autograd.hpp"
#include "sim/model.hpp"
#include "sim/rng.hpp"

namespace sim {

inline constexpr std::size_t kCandidates = 16;  // 1 positive + 15 negatives

/// Log-score z_future^T W z_t.
double score(std::span<const float> z_future, std::span<const float> z_t, const Tensor &w);

/// Candidate frame indices (flattened b * T + t) for every (k, b, t < T - k).
/// Slot 0 of each candidate list is the positive.
struct CandidateSet {
  std::size_t batch = 0;
  std::size_t frames = 0;
  std::size_t steps = 0;       // K
  std::size_t candidates = 0;  // N
  std::vector<std::uint32_t> index;
  std::vector<std::size_t> offset;  // per k (0-based), start row

  std::size_t rows(std::size_t k) const { return batch * (frames - (k + 1)); }
  std::size_t total_rows() const;
  /// Candidate list of row r at step k (1-based k).
  std::span<const std::uint32_t> at(std::size_t k, std::size_t b, std::size_t t) const;
};

/// Draws n_neg negatives per positive uniformly with replacement from the
/// other batch * frames - 1 frames. Throws if frames <= steps or there is only
/// one frame in total.
CandidateSet draw_negatives(std::size_t batch, std::size_t frames, std::size_t steps,
                            std::size_t n_neg, RngStream &rng);

struct NceResult {
  Var loss;                  // scalar
  double value = 0.0;        // f64 mean of the per-row losses
  std::vector<double> per_k; // mean loss at each k
};

/// Mean over (b, k, t < T - k) of -log softmax(positive) across the candidate
/// set. z: [B, T, Dz] scored frames, c: [B, T, Dc] contexts, w: K x [Dz, Dc].
NceResult info_nce(const Var &z, const Var &c, std::span<const Var> w,
                   const CandidateSet &candidates);

/// Same reduction from explicit logits [rows, N], positive in column 0.
double info_nce_from_logits(const Tensor &logits);

/// 1/2 sum_d (mu^2 + sigma^2 - 1 - ln sigma^2), averaged over all leading
/// positions. Throws NumericError for sigma <= 0.
double kl_standard_normal(const Tensor &mu, const Tensor &sigma);
/// Differentiable version of kl_standard_normal.
Var kl_standard_normal(const Var &mu, const Var &sigma);

struct LossBreakdown {
  Var total;
  double nce = 0.0;
  double kl = 0.0;
  double total_value = 0.0;  // nce + beta * kl
  double kl_per_dim = 0.0;
  std::vector<double> per_k;
};

/// info_nce on the sampled latents plus beta * KL of (mu, sigma). The context
/// of an encoder module is its own z.
LossBreakdown smooth_info_nce(const LatentFrames &latents, std::span<const Var> w, double beta,
                              const CandidateSet &candidates);

/// log(N) - loss.
double mi_lower_bound(double nce_loss, std::size_t n_candidates);

/// Mean -log softmax(label) over rows.
double cross_entropy(const Tensor &logits, std::span<const int> labels);

}  // namespace sim
