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

// Checkpoint container:
//
//   bytes 0..7    magic "SIMCKPT1"
//   bytes 8..15   header length H, u64 little-endian
//   H bytes       JSON header
//   payload       raw little-endian f32 tensors
//
// The header holds format_version, kind ("model" or "decoder"),
// model_config, module_index (decoders only) and
// tensors: name -> {dtype: "f32", shape, offset}, offsets relative to the
// payload start. Tensors are laid out in name order.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "sim/decoder.hpp"
#include "sim/model.hpp"

namespace sim {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TensorFile {
  nlohmann::json header;  // without the tensor index
  std::map<std::string, Tensor> tensors;
};

std::vector<std::uint8_t> encode_tensor_file(const TensorFile &file);
/// Throws CheckpointError on a bad magic, truncation or malformed index.
TensorFile decode_tensor_file(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_model(const Model &model);
/// Validates format version, kind and every tensor shape against the config.
Model deserialize_model(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Model &model, const std::filesystem::path &path);
Model load_checkpoint(const std::filesystem::path &path);

void save_decoder(const Decoder &decoder, const std::filesystem::path &path);
Decoder load_decoder(const std::filesystem::path &path);

std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);

}  // namespace sim
