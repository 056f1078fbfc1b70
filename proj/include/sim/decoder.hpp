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

// Mirror decoders: transposed convolutions undoing the encoder chain from a
// given module depth back to the waveform. The module-1 decoder carries an
// extra kernel-3 convolution after each mirrored layer.

#pragma once

#include <vector>

#include "sim/model.hpp"

namespace sim {

struct DecoderLayer {
  Parameter weight;  // conv: [Cout, Cin, K]; transposed: [Cin, Cout, K]
  Parameter bias;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t output_padding = 0;
  bool transposed = true;
  bool relu = true;
};

class Decoder {
 public:
  Decoder(ModelConfig config, std::size_t module_index, std::vector<DecoderLayer> layers);
  Decoder(Decoder &&) = default;
  Decoder &operator=(Decoder &&) = default;

  const ModelConfig &config() const { return config_; }
  std::size_t module_index() const { return module_index_; }
  /// Frame count the decoder expects (the module's output for a full clip).
  std::size_t frames() const { return frames_; }
  const std::vector<DecoderLayer> &layers() const { return layers_; }
  std::vector<Parameter *> parameters();
  std::vector<const Parameter *> parameters() const;

 private:
  ModelConfig config_;
  std::size_t module_index_;
  std::size_t frames_;
  std::vector<DecoderLayer> layers_;
};

/// Throws std::out_of_range unless 1 <= module_index <= number of modules.
Decoder build_mirror_decoder(const ModelConfig &config, std::size_t module_index,
                             std::uint64_t seed = 0);

/// z: [B, T, D] -> [B, 1, 10240]. Throws ShapeError for a latent that does not
/// come from the decoder's depth.
Var decode(const Decoder &decoder, const Var &z);
/// Single latent [T, D] -> [1, 10240].
Tensor decode(const Decoder &decoder, const Tensor &z);

}  // namespace sim
