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

#include "sim/decoder.hpp"

#include <cmath>
#include <stdexcept>

#include "sim/kernels.hpp"
#include "sim/syllabgen.hpp"

namespace sim {

namespace {

Parameter init_weight(const std::string &id, const Shape &shape, std::size_t fan_in,
                      std::uint64_t seed) {
  RngStream rng = RngStream::named(seed, "decoder").derive(id);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(shape);
  for (auto &v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  return make_parameter(id, std::move(t));
}

}  // namespace

Decoder::Decoder(ModelConfig config, std::size_t module_index, std::vector<DecoderLayer> layers)
    : config_(std::move(config)), module_index_(module_index), layers_(std::move(layers)) {
  if (module_index_ == 0 || module_index_ > config_.num_modules())
    throw std::out_of_range("decoder: module index " + std::to_string(module_index_) +
                            " out of range");
  frames_ = frame_chain(config_, kClipSamples)[module_index_ - 1];
}

std::vector<Parameter *> Decoder::parameters() {
  std::vector<Parameter *> out;
  for (auto &l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Parameter *> Decoder::parameters() const {
  auto all = const_cast<Decoder *>(this)->parameters();
  return {all.begin(), all.end()};
}

Decoder build_mirror_decoder(const ModelConfig &config, std::size_t module_index,
                             std::uint64_t seed) {
  if (module_index == 0 || module_index > config.num_modules())
    throw std::out_of_range("decoder: module index " + std::to_string(module_index) +
                            " out of range [1, " + std::to_string(config.num_modules()) + "]");
  // Forward lengths at every conv boundary for a full clip.
  struct Step {
    ConvSpec spec;
    std::size_t in_len, out_len, in_channels;
  };
  std::vector<Step> chain;
  std::size_t len = kClipSamples;
  for (std::size_t m = 0; m < module_index; ++m)
    for (std::size_t i = 0; i < config.modules[m].size(); ++i) {
      const ConvSpec &c = config.modules[m][i];
      kernels::ConvGeometry g{1, 1, c.kernel, c.stride, c.padding, 0};
      const std::size_t out = g.conv_out_len(len);
      chain.push_back({c, len, out, (m == 0 && i == 0) ? 1 : config.channels});
      len = out;
    }

  const std::size_t ch = config.channels;
  const bool extra = module_index == 1;
  std::vector<DecoderLayer> layers;
  for (std::size_t j = chain.size(); j-- > 0;) {
    const Step &s = chain[j];
    const bool last = j == 0;
    const std::size_t cout = (last && !extra) ? 1 : ch;
    const std::size_t natural = (s.out_len - 1) * s.spec.stride + s.spec.kernel - 2 * s.spec.padding;
    const std::size_t op = s.in_len - natural;
    const std::string id = "decoder.layer" + std::to_string(layers.size());
    DecoderLayer l{init_weight(id + ".weight", {ch, cout, s.spec.kernel}, cout * s.spec.kernel,
                               seed),
                   make_parameter(id + ".bias", Tensor({cout}, 0.0f)),
                   s.spec.stride,
                   s.spec.padding,
                   op,
                   true,
                   !(last && !extra)};
    kernels::ConvGeometry{ch, cout, s.spec.kernel, s.spec.stride, s.spec.padding, op}.validate();
    layers.push_back(std::move(l));
    if (extra) {
      const std::size_t eout = last ? 1 : ch;
      const std::string eid = "decoder.layer" + std::to_string(layers.size());
      layers.push_back({init_weight(eid + ".weight", {eout, ch, 3}, ch * 3, seed),
                        make_parameter(eid + ".bias", Tensor({eout}, 0.0f)), 1, 1, 0, false,
                        !last});
    }
  }
  return Decoder(config, module_index, std::move(layers));
}

Var decode(const Decoder &decoder, const Var &z) {
  if (z.value().rank() != 3 || z.shape()[1] != decoder.frames() ||
      z.shape()[2] != decoder.config().channels)
    throw ShapeError("decode: module-" + std::to_string(decoder.module_index()) +
                     " decoder expects [B, " + std::to_string(decoder.frames()) + ", " +
                     std::to_string(decoder.config().channels) + "] latents, got " +
                     shape_string(z.shape()));
  Var x = ops::transpose12(z);
  for (const auto &l : decoder.layers()) {
    x = l.transposed ? ops::conv1d_transpose(x, l.weight.var, l.bias.var, l.stride, l.padding,
                                             l.output_padding)
                     : ops::conv1d(x, l.weight.var, l.bias.var, l.stride, l.padding);
    if (l.relu) x = ops::relu(x);
  }
  return x;
}

Tensor decode(const Decoder &decoder, const Tensor &z) {
  if (z.rank() != 2)
    throw ShapeError("decode: expected a [T, D] latent, got " + shape_string(z.shape()));
  Var out = decode(decoder, Var::constant(z.reshaped({1, z.shape()[0], z.shape()[1]})));
  return out.value().reshaped({1, out.shape()[2]});
}

}  // namespace sim
