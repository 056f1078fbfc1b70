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

#include "sim/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sim {

namespace {

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t> &out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t> &out, const char *tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char *tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

std::int16_t to_pcm(float x) {
  const double scaled = std::round(static_cast<double>(x) * 32767.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

}  // namespace

std::vector<std::uint8_t> encode_wav(std::span<const float> samples) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);             // fmt chunk size
  put_u16(out, 1);              // PCM
  put_u16(out, 1);              // mono
  put_u32(out, kSampleRate);
  put_u32(out, kSampleRate * 2);  // byte rate
  put_u16(out, 2);              // block align
  put_u16(out, 16);             // bits per sample
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float x : samples) put_u16(out, static_cast<std::uint16_t>(to_pcm(x)));
  return out;
}

std::vector<float> decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
    throw WavError("wav: missing RIFF/WAVE header");
  std::size_t pos = 12;
  bool have_fmt = false;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = get_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw WavError("wav: chunk extends past end of file");
    if (tag_is(bytes, pos, "fmt ")) {
      if (size < 16) throw WavError("wav: fmt chunk too short");
      const std::uint16_t format = get_u16(bytes, body);
      const std::uint16_t channels = get_u16(bytes, body + 2);
      const std::uint32_t rate = get_u32(bytes, body + 4);
      const std::uint16_t bits = get_u16(bytes, body + 14);
      if (format != 1)
        throw WavError("wav: audio_format is " + std::to_string(format) + ", expected 1 (PCM)");
      if (channels != 1)
        throw WavError("wav: num_channels is " + std::to_string(channels) + ", expected 1");
      if (rate != kSampleRate)
        throw WavError("wav: sample_rate is " + std::to_string(rate) + ", expected 16000");
      if (bits != 16)
        throw WavError("wav: bits_per_sample is " + std::to_string(bits) + ", expected 16");
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      if (!have_fmt) throw WavError("wav: data chunk before fmt chunk");
      std::vector<float> samples(size / 2);
      for (std::size_t i = 0; i < samples.size(); ++i)
        samples[i] = static_cast<float>(static_cast<std::int16_t>(get_u16(bytes, body + 2 * i))) /
                     32767.0f;
      return samples;
    }
    pos = body + size + (size & 1u);
  }
  throw WavError("wav: no data chunk");
}

void write_wav(const std::filesystem::path &path, std::span<const float> samples) {
  const auto bytes = encode_wav(samples);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw WavError("wav: cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WavError("wav: failed writing " + path.string());
}

std::vector<float> read_wav(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError("wav: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

}  // namespace sim
