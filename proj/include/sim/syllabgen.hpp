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

// Synthetic CV-CV-CV word corpus: formant-synthesized plosive + vowel
// syllables from a single fixed "speaker", 16 kHz, 10240 samples per clip.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sim/rng.hpp"
#include "sim/tensor.hpp"

namespace sim {

inline constexpr std::size_t kClipSamples = 10240;
inline constexpr std::array<char, 3> kConsonants{'b', 'd', 'g'};
inline constexpr std::array<char, 3> kVowels{'a', 'i', 'u'};

/// Syllable class in [0, 9): consonant index * 3 + vowel index.
int syllable_class(char consonant, char vowel);
std::string syllable_name(int syllable_class);
inline int vowel_of(int syllable_class) { return syllable_class % 3; }

enum class Split { unassigned, train, test };
std::string_view split_name(Split s);
Split parse_split(std::string_view s);

struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const { return end - begin; }
};

struct Clip {
  std::string id;
  Tensor samples;                    // [1 x 10240], values in [-1, 1]
  std::array<int, 3> syllables{};    // syllable classes
  std::array<SampleRange, 3> bounds{};
  Split split = Split::unassigned;

  std::string word() const;          // e.g. "ba-gi-du"
  std::array<int, 3> vowels() const;
  std::string filename() const { return id + ".wav"; }
};

struct Corpus {
  std::vector<Clip> clips;
  std::uint64_t seed = 0;

  std::vector<std::size_t> indices(Split s) const;
  std::size_t count(Split s) const { return indices(s).size(); }
};

/// Plosive burst (5-15 ms band-limited noise) followed by a two-formant vowel
/// at f0 = 120 Hz, peak-normalized to 0.9. Returns [1 x round(dur_ms * 16)].
/// Throws std::invalid_argument for an unknown phone or dur_ms outside [100, 400].
Tensor synthesize_syllable(char consonant, char vowel, double dur_ms, RngStream &rng);

/// n_files >= 10 clips of three uniformly drawn syllables each.
Corpus generate_corpus(std::size_t n_files, std::uint64_t seed);

/// Seeded shuffle; the first floor(ratio * n) clips become train, the rest test.
void split_corpus(Corpus &corpus, double ratio, std::uint64_t seed);

/// Centers `samples` in a zero buffer of `target` samples: floor(pad/2) zeros
/// in front, the remainder behind.
std::vector<float> pad_centered(std::span<const float> samples, std::size_t target);

/// One syllable of a clip, zero-padded to [1 x 10240].
Tensor extract_padded_syllable(const Clip &clip, std::size_t index);

/// Per-epoch shuffled batches of clip indices for one split, keyed by
/// (seed, epoch). The final partial batch is dropped.
std::vector<std::vector<std::size_t>> batch_order(const Corpus &corpus, Split split,
                                                  std::size_t batch_size, std::uint64_t seed,
                                                  std::uint64_t epoch);

/// Stacks clips into [B x 1 x L].
Tensor stack_clips(const Corpus &corpus, std::span<const std::size_t> indices);

struct Batch {
  Tensor waveforms;  // [B x 1 x 10240]
  std::vector<std::size_t> clip_indices;
};

std::vector<Batch> batch_iter(const Corpus &corpus, Split split, std::size_t batch_size,
                              std::uint64_t seed, std::uint64_t epoch);

/// Writes <dir>/<id>.wav for every clip plus manifest.tsv with columns
/// id, filename, word, syllables, vowels, split, boundaries.
void write_corpus(const Corpus &corpus, const std::filesystem::path &dir);
/// Reads a directory written by write_corpus. Throws std::runtime_error on a
/// malformed manifest.
Corpus read_corpus(const std::filesystem::path &dir);

}  // namespace sim
