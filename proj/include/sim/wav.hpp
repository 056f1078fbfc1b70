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

// RIFF/WAVE, PCM 16-bit signed little-endian, mono, 16 kHz. Nothing else is
// accepted. Samples map to int16 as round(x * 32767), clamped.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sim {

inline constexpr std::uint32_t kSampleRate = 16000;

class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_wav(std::span<const float> samples);
/// Throws WavError naming the offending header field.
std::vector<float> decode_wav(std::span<const std::uint8_t> bytes);

void write_wav(const std::filesystem::path &path, std::span<const float> samples);
std::vector<float> read_wav(const std::filesystem::path &path);

}  // namespace sim
