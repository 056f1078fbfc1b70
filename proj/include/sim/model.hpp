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

// Encoder stack: three convolutional modules followed by a GRU.
//
//   module 1   conv(10,5,2) relu  conv(8,4,2) relu  | heads
//   module 2   conv(4,2,2)  relu  conv(4,2,2) relu  | heads
//   module 3   conv(4,2,1)  relu                    | heads
//   g_ar       GRU(channels -> gru_dim)
//
// The heads are 1x1 convolutions. The stochastic variant has a mean head and
// a log-variance head (sigma = exp(logvar / 2)) and samples
// z = mu + sigma * eps; the deterministic variants have a single head.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "sim/autograd.hpp"
#include "sim/ops.hpp"
#include "sim/rng.hpp"

namespace sim {

enum class Variant { sim, gim, cpc, supervised };
std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view s);

struct ConvSpec {
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool operator==(const ConvSpec &) const = default;
};

std::vector<std::vector<ConvSpec>> default_module_specs();

struct ModelConfig {
  Variant variant = Variant::sim;
  std::size_t channels = 512;
  std::size_t gru_dim = 256;
  std::vector<std::vector<ConvSpec>> modules = default_module_specs();
  std::size_t prediction_steps = 10;  // K
  double beta = 0.01;
  std::uint64_t seed = 0;
  std::size_t classes = 9;  // supervised head only

  /// channels = gru_dim = 64, same kernels and strides.
  static ModelConfig reduced(Variant v, std::uint64_t seed = 0);

  bool stochastic() const { return variant == Variant::sim; }
  std::size_t num_modules() const { return modules.size(); }
  std::size_t downsampling() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json &j);
  bool operator==(const ModelConfig &) const = default;
};

/// Frames after each encoder module for an input of `samples` samples.
std::vector<std::size_t> frame_chain(const ModelConfig &config, std::size_t samples);

enum class EncodeMode { sample, mean };

/// Per-module latents, batch layout [B, T, D]. mu/sigma are empty Vars for
/// deterministic variants.
struct LatentFrames {
  Var z;
  Var mu;
  Var sigma;
  std::size_t module = 0;  // 1-based, 0 for the raw waveform

  bool stochastic() const { return mu.valid(); }
  std::size_t batch() const { return z.shape()[0]; }
  std::size_t frames() const { return z.shape()[1]; }
  std::size_t dims() const { return z.shape()[2]; }
  /// [T x D] slice of batch element b.
  Tensor frame_matrix(std::size_t b) const;
};

/// Wraps a waveform batch [B, 1, L] as module-0 frames [B, L, 1].
LatentFrames waveform_frames(const Tensor &waveforms);

struct ConvLayer {
  Parameter weight;  // [Cout, Cin, K]
  Parameter bias;    // [Cout]
  ConvSpec spec;
};

struct EncoderModule {
  std::vector<ConvLayer> convs;
  ConvLayer mu_head;      // the only head for deterministic variants
  ConvLayer logvar_head;  // stochastic variant only (weight empty otherwise)
  std::vector<Parameter> score;  // W_1..W_K, [D x D]
  bool has_logvar = false;
};

struct ArModule {
  Parameter w_ih, w_hh, b_ih, b_hh;
  std::vector<Parameter> score;  // W_1..W_K, [D x gru_dim]
  ops::GruWeights weights() const { return {w_ih.var, w_hh.var, b_ih.var, b_hh.var}; }
};

struct LayerTrace {
  std::string layer;
  std::size_t frames = 0;
  std::size_t channels = 0;
};

/// Parameters are shared-node handles: Model is move-only, use clone() for a deep copy.
class Model {
 public:
  explicit Model(ModelConfig config);
  Model(Model &&) = default;
  Model &operator=(Model &&) = default;
  Model(const Model &) = delete;
  Model &operator=(const Model &) = delete;

  Model clone() const;

  const ModelConfig &config() const { return config_; }
  std::vector<EncoderModule> &modules() { return modules_; }
  const std::vector<EncoderModule> &modules() const { return modules_; }
  ArModule &ar() { return ar_; }
  const ArModule &ar() const { return ar_; }
  Parameter &head_weight() { return head_w_; }
  Parameter &head_bias() { return head_b_; }
  const Parameter &head_weight() const { return head_w_; }
  const Parameter &head_bias() const { return head_b_; }

  /// Every parameter, in a stable order.
  std::vector<Parameter *> parameters();
  std::vector<const Parameter *> parameters() const;
  /// Encoder module m (0-based) including its score matrices; m == num_modules
  /// selects the autoregressive module.
  std::vector<Parameter *> module_parameters(std::size_t m);
  /// Optimizer groups: one per module for greedy variants, one for CPC and
  /// the supervised baseline.
  std::vector<std::vector<Parameter *>> parameter_groups();
  Parameter *find(const std::string &id);

 private:
  ModelConfig config_;
  std::vector<EncoderModule> modules_;
  ArModule ar_;
  Parameter head_w_, head_b_;  // supervised classifier (empty otherwise)
};

/// Runs encoder module m (1-based) on `input`. Sample mode draws eps from
/// `rng` (required); mean mode uses z = mu. Throws NumericError when sigma is
/// non-finite or not strictly positive.
LatentFrames encode_module(const Model &model, std::size_t m, const LatentFrames &input,
                           EncodeMode mode, RngStream *rng,
                           std::vector<LayerTrace> *trace = nullptr);

struct ForwardResult {
  std::vector<LatentFrames> modules;
  Var context;  // [B, T, gru_dim]
};

/// Chains the modules and the GRU (zero initial state). With
/// `detach_between_modules` each module sees its input as a constant.
ForwardResult forward_full(const Model &model, const Tensor &waveforms, EncodeMode mode,
                           RngStream *rng, bool detach_between_modules = false,
                           std::vector<LayerTrace> *trace = nullptr);

/// Runs the GRU over module latents [B, T, D].
Var run_ar(const Model &model, const Var &latents);

/// Stable per-parameter byte snapshot, for frozen-backbone checks.
std::vector<Tensor> snapshot(const Model &model);

}  // namespace sim
