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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "doctest.h"

#include "sim/syllabgen.hpp"

using namespace sim;

namespace {

// Energy above and below a cutoff from a direct DFT of the middle 2048 samples.
double high_band_ratio(const Tensor &x, double cutoff_hz) {
  const std::size_t n = 2048, start = (x.numel() - n) / 2;
  double hi = 0.0, total = 0.0;
  for (std::size_t k = 1; k < n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ph = 2.0 * std::numbers::pi * static_cast<double>(k * t) / n;
      re += x[start + t] * std::cos(ph);
      im -= x[start + t] * std::sin(ph);
    }
    const double e = re * re + im * im;
    total += e;
    if (static_cast<double>(k) * 16000.0 / n > cutoff_hz) hi += e;
  }
  return hi / total;
}

double peak(const Tensor &x) {
  double m = 0.0;
  for (float v : x.data()) m = std::max(m, static_cast<double>(std::fabs(v)));
  return m;
}

}  // namespace

TEST_CASE("syllable classes") {
  CHECK(syllable_class('b', 'a') == 0);
  CHECK(syllable_class('g', 'u') == 8);
  CHECK(syllable_name(4) == "di");
  CHECK(vowel_of(syllable_class('d', 'u')) == 2);
  CHECK_THROWS(syllable_class('p', 'a'));
}

TEST_CASE("synthesized syllables") {
  RngStream rng(0, 0);
  const Tensor ba = synthesize_syllable('b', 'a', 250.0, rng);
  CHECK(ba.shape() == Shape{1, 4000});
  CHECK(peak(ba) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK_THROWS_AS(synthesize_syllable('b', 'a', 50.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(synthesize_syllable('b', 'o', 200.0, rng), std::invalid_argument);

  // /i/ has F2 at 2.3 kHz, /a/ keeps its energy below 1.3 kHz.
  const Tensor di = synthesize_syllable('d', 'i', 300.0, rng);
  const Tensor da = synthesize_syllable('d', 'a', 300.0, rng);
  CHECK(high_band_ratio(di, 1800.0) > high_band_ratio(da, 1800.0));
}

TEST_CASE("corpus generation is seeded") {
  const Corpus a = generate_corpus(10, 3), b = generate_corpus(10, 3), c = generate_corpus(10, 4);
  REQUIRE(a.clips.size() == 10);
  CHECK(a.clips[4].samples == b.clips[4].samples);
  CHECK_FALSE(a.clips[4].samples == c.clips[4].samples);
  CHECK_THROWS(generate_corpus(9, 0));
  for (const Clip &clip : a.clips) {
    CHECK(clip.samples.shape() == Shape{1, kClipSamples});
    CHECK(peak(clip.samples) <= 1.0);
    for (std::size_t s = 0; s < 3; ++s) {
      CHECK(clip.bounds[s].end <= kClipSamples);
      CHECK(clip.bounds[s].size() > 0);
      if (s) CHECK(clip.bounds[s].begin >= clip.bounds[s - 1].end);
    }
    CHECK(clip.word().size() == 8);
  }
}

TEST_CASE("train/test split sizes") {
  Corpus big = generate_corpus(851, 0);
  split_corpus(big, 0.8, 0);
  CHECK(big.count(Split::train) == 680);
  CHECK(big.count(Split::test) == 171);
  Corpus small = generate_corpus(10, 0);
  split_corpus(small, 0.8, 0);
  CHECK(small.count(Split::train) == 8);
  CHECK(small.count(Split::test) == 2);
  Corpus again = generate_corpus(10, 0);
  split_corpus(again, 0.8, 0);
  CHECK(again.indices(Split::test) == small.indices(Split::test));
}

TEST_CASE("centered padding") {
  const std::vector<float> x{1, 2, 3};
  CHECK(pad_centered(x, 7) == std::vector<float>{0, 0, 1, 2, 3, 0, 0});
  CHECK(pad_centered(x, 6) == std::vector<float>{0, 1, 2, 3, 0, 0});
  CHECK(pad_centered(x, 3) == x);
  Corpus corpus = generate_corpus(10, 1);
  const Clip &clip = corpus.clips[0];
  const Tensor padded = extract_padded_syllable(clip, 1);
  CHECK(padded.shape() == Shape{1, kClipSamples});
  const std::size_t len = clip.bounds[1].size(), front = (kClipSamples - len) / 2;
  CHECK(padded[front] == clip.samples[clip.bounds[1].begin]);
  CHECK(padded[front - 1] == 0.0f);
}

TEST_CASE("batches are deterministic and drop the tail") {
  Corpus corpus = generate_corpus(30, 2);
  split_corpus(corpus, 0.8, 2);
  const auto e0 = batch_order(corpus, Split::train, 5, 7, 0);
  CHECK(e0.size() == 4);
  CHECK(e0 == batch_order(corpus, Split::train, 5, 7, 0));
  CHECK(e0 != batch_order(corpus, Split::train, 5, 7, 1));
  std::set<std::size_t> seen;
  for (const auto &b : e0)
    for (auto i : b) {
      CHECK(corpus.clips[i].split == Split::train);
      seen.insert(i);
    }
  CHECK(seen.size() == 20);
  const auto batches = batch_iter(corpus, Split::train, 5, 7, 0);
  CHECK(batches[1].waveforms.shape() == Shape{5, 1, kClipSamples});
  CHECK(batches[1].waveforms[kClipSamples + 17] == corpus.clips[batches[1].clip_indices[1]].samples[17]);
}

TEST_CASE("corpus directory round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "smoothnce_corpus_test";
  std::filesystem::remove_all(dir);
  Corpus corpus = generate_corpus(12, 5);
  split_corpus(corpus, 0.8, 5);
  write_corpus(corpus, dir);
  CHECK(std::filesystem::exists(dir / "manifest.tsv"));
  const Corpus back = read_corpus(dir);
  REQUIRE(back.clips.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(back.clips[i].id == corpus.clips[i].id);
    CHECK(back.clips[i].syllables == corpus.clips[i].syllables);
    CHECK(back.clips[i].split == corpus.clips[i].split);
    CHECK(back.clips[i].bounds[2].end == corpus.clips[i].bounds[2].end);
    CHECK(max_abs_diff(back.clips[i].samples, corpus.clips[i].samples) <= 1.0 / 32767.0);
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS(read_corpus(dir));
}

TEST_CASE("full-size corpus") {
  Corpus corpus = generate_corpus(851, 7);
  REQUIRE(corpus.clips.size() == 851);
  std::vector<int> hist(9, 0);
  for (const Clip &clip : corpus.clips) {
    CHECK(clip.samples.numel() == kClipSamples);
    for (int s : clip.syllables) ++hist[s];
  }
  const double uniform = 851.0 * 3.0 / 9.0;
  for (int h : hist) {
    CHECK(h > 0.8 * uniform);
    CHECK(h < 1.2 * uniform);
  }
  split_corpus(corpus, 0.8, 7);
  CHECK(batch_order(corpus, Split::train, 8, 0, 0).size() == 85);
  const auto before = corpus.indices(Split::test);
  split_corpus(corpus, 0.8, 8);
  CHECK(corpus.count(Split::test) == 171);
  CHECK(corpus.indices(Split::test) != before);
}
