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

// Differentiable primitives. None of them mutates its inputs.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sim/autograd.hpp"

namespace sim::ops {

/// x [B, Cin, L], w [Cout, Cin, K], b [Cout] -> [B, Cout, L'].
Var conv1d(const Var &x, const Var &w, const Var &b, std::size_t stride, std::size_t padding);

/// x [B, Cin, L], w [Cin, Cout, K], b [Cout] -> [B, Cout, L''] with
/// L'' = (L - 1) stride - 2 padding + K + output_padding.
Var conv1d_transpose(const Var &x, const Var &w, const Var &b, std::size_t stride,
                     std::size_t padding, std::size_t output_padding = 0);

Var relu(const Var &x);
Var exp(const Var &x);
Var scale(const Var &x, float s);
Var add(const Var &a, const Var &b);
Var sub(const Var &a, const Var &b);
Var mul(const Var &a, const Var &b);
/// Scalar sum / mean of every element (f64 accumulation).
Var sum(const Var &x);
Var mean(const Var &x);

/// [B, A, C] -> [B, C, A].
Var transpose12(const Var &x);
/// [B, T, D] -> [B, D], arithmetic mean over T.
Var mean_time(const Var &x);

/// x [N, Din], w [C, Din], optional b [C] -> [N, C].
Var linear(const Var &x, const Var &w, const Var *b);

struct GruWeights {
  Var w_ih;  // [3H, Din], gate rows ordered reset, update, candidate
  Var w_hh;  // [3H, H]
  Var b_ih;  // [3H]
  Var b_hh;  // [3H]
};

/// x [B, T, Din] -> hidden states [B, T, H]; row t is the state after
/// consuming inputs 0..t. h0 [B, H] defaults to zeros.
Var gru(const Var &x, const GruWeights &w, const Var *h0 = nullptr);

/// Mean squared error between equal-shaped tensors.
Var mse(const Var &prediction, const Var &target);

/// Mean over rows of -log softmax(logits)[label]; logits [N, C].
Var cross_entropy(const Var &logits, std::span<const int> labels);

}  // namespace sim::ops
