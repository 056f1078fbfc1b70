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

#include "sim/syllabgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "sim/wav.hpp"

namespace sim {

namespace {

constexpr double kFs = kSampleRate;
constexpr double kF0 = 120.0;
constexpr double kPeak = 0.9;

struct VowelFormants {
  double f1, f2;
};

VowelFormants vowel_formants(char v) {
  switch (v) {
    case 'a': return {800.0, 1200.0};
    case 'i': return {300.0, 2300.0};
    case 'u': return {300.0, 800.0};
    default: throw std::invalid_argument(std::string("unknown vowel '") + v + "'");
  }
}

// Burst spectral centroid and the F2 onset the following vowel glides from.
struct ConsonantCues {
  double burst_centroid;
  double f2_locus;
};

ConsonantCues consonant_cues(char c) {
  switch (c) {
    case 'b': return {500.0, 900.0};
    case 'd': return {2500.0, 1700.0};
    case 'g': return {1500.0, 2200.0};
    default: throw std::invalid_argument(std::string("unknown consonant '") + c + "'");
  }
}

std::size_t index_of(std::span<const char> set, char c, const char *what) {
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set[i] == c) return i;
  throw std::invalid_argument(std::string("unknown ") + what + " '" + c + "'");
}

// RBJ band-pass biquad (0 dB peak gain).
class Bandpass {
 public:
  Bandpass(double centre, double q) {
    const double w0 = 2.0 * std::numbers::pi * centre / kFs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0_ = alpha / a0;
    b2_ = -alpha / a0;
    a1_ = -2.0 * std::cos(w0) / a0;
    a2_ = (1.0 - alpha) / a0;
  }
  double operator()(double x) {
    const double y = b0_ * x + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
    x2_ = x1_;
    x1_ = x;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double b0_, b2_, a1_, a2_;
  double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

double resonance(double f, double centre, double bandwidth) {
  const double d = (f - centre) / (0.5 * bandwidth);
  return 1.0 / (1.0 + d * d);
}

double raised_cosine(double x) { return 0.5 - 0.5 * std::cos(std::numbers::pi * std::clamp(x, 0.0, 1.0)); }

}  // namespace

int syllable_class(char consonant, char vowel) {
  const auto c = index_of(kConsonants, consonant, "consonant");
  const auto v = index_of(kVowels, vowel, "vowel");
  return static_cast<int>(c * 3 + v);
}

std::string syllable_name(int cls) {
  if (cls < 0 || cls >= 9) throw std::out_of_range("syllable class " + std::to_string(cls));
  return {kConsonants[static_cast<std::size_t>(cls / 3)],
          kVowels[static_cast<std::size_t>(cls % 3)]};
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    default: return "unassigned";
  }
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "unassigned") return Split::unassigned;
  throw std::runtime_error("unknown split '" + std::string(s) + "'");
}

std::string Clip::word() const {
  return syllable_name(syllables[0]) + "-" + syllable_name(syllables[1]) + "-" +
         syllable_name(syllables[2]);
}

std::array<int, 3> Clip::vowels() const {
  return {vowel_of(syllables[0]), vowel_of(syllables[1]), vowel_of(syllables[2])};
}

std::vector<std::size_t> Corpus::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < clips.size(); ++i)
    if (clips[i].split == s) out.push_back(i);
  return out;
}

Tensor synthesize_syllable(char consonant, char vowel, double dur_ms, RngStream &rng) {
  const ConsonantCues cues = consonant_cues(consonant);
  const VowelFormants target = vowel_formants(vowel);
  if (!(dur_ms >= 100.0 && dur_ms <= 400.0))
    throw std::invalid_argument("syllable duration " + std::to_string(dur_ms) +
                                " ms outside [100, 400]");
  const auto total = static_cast<std::size_t>(std::lround(dur_ms * kFs / 1000.0));
  const auto burst_len = static_cast<std::size_t>(std::lround(rng.uniform(5.0, 15.0) * kFs / 1000.0));
  std::vector<double> x(total, 0.0);

  // Burst: twice band-passed white noise with a fast attack and exponential decay.
  Bandpass bp1(cues.burst_centroid, 1.5), bp2(cues.burst_centroid, 1.5);
  const double tau = static_cast<double>(burst_len) / 3.0;
  double burst_peak = 0.0;
  for (std::size_t i = 0; i < burst_len; ++i) {
    const double env = (1.0 - std::exp(-static_cast<double>(i) / 8.0)) *
                       std::exp(-static_cast<double>(i) / tau);
    x[i] = bp2(bp1(rng.normal())) * env;
    burst_peak = std::max(burst_peak, std::fabs(x[i]));
  }
  if (burst_peak > 0.0)
    for (std::size_t i = 0; i < burst_len; ++i) x[i] *= 0.5 / burst_peak;

  // Vowel: harmonics of f0 shaped by two formant resonances, with F1/F2
  // gliding from the consonant's onset values over the first 40 ms.
  const std::size_t harmonics = static_cast<std::size_t>(7800.0 / kF0);
  std::vector<double> phase(harmonics);
  for (auto &p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const std::size_t vowel_len = total - burst_len;
  const double glide = 0.040 * kFs;
  const double attack = 0.010 * kFs, release = 0.030 * kFs;
  constexpr std::size_t kBlock = 32;
  std::vector<double> amp(harmonics), voiced(vowel_len, 0.0);
  double vowel_peak = 0.0;
  for (std::size_t start = 0; start < vowel_len; start += kBlock) {
    const double g = std::min(1.0, static_cast<double>(start) / glide);
    const double f1 = 300.0 + (target.f1 - 300.0) * g;
    const double f2 = cues.f2_locus + (target.f2 - cues.f2_locus) * g;
    for (std::size_t h = 0; h < harmonics; ++h) {
      const double f = kF0 * static_cast<double>(h + 1);
      amp[h] = resonance(f, f1, 100.0) + 0.7 * resonance(f, f2, 140.0) +
               0.03 / static_cast<double>(h + 1);
    }
    const std::size_t stop = std::min(vowel_len, start + kBlock);
    for (std::size_t i = start; i < stop; ++i) {
      const double t = static_cast<double>(i) / kFs;
      double s = 0.0;
      for (std::size_t h = 0; h < harmonics; ++h)
        s += amp[h] * std::sin(2.0 * std::numbers::pi * kF0 * static_cast<double>(h + 1) * t +
                               phase[h]);
      const double env = raised_cosine(static_cast<double>(i) / attack) *
                         raised_cosine(static_cast<double>(vowel_len - i) / release);
      voiced[i] = s * env;
      vowel_peak = std::max(vowel_peak, std::fabs(voiced[i]));
    }
  }
  for (std::size_t i = 0; i < vowel_len; ++i) x[burst_len + i] = voiced[i] / vowel_peak;

  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::fabs(v));
  Tensor out({1, total});
  for (std::size_t i = 0; i < total; ++i) out[i] = static_cast<float>(x[i] * (kPeak / peak));
  return out;
}

Corpus generate_corpus(std::size_t n_files, std::uint64_t seed) {
  if (n_files < 10) throw std::invalid_argument("generate_corpus: need at least 10 files");
  Corpus corpus;
  corpus.seed = seed;
  corpus.clips.resize(n_files);
  const RngStream root = RngStream::named(seed, "corpus");
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n_files; ++i) {
    RngStream rng = root.derive(i);
    Clip &clip = corpus.clips[i];
    char id[32];
    std::snprintf(id, sizeof id, "clip%04zu", i);
    clip.id = id;
    clip.samples = Tensor({1, kClipSamples}, 0.0f);
    std::size_t pos = static_cast<std::size_t>(rng.uniform(0.0, 15.0) * kFs / 1000.0);
    for (std::size_t s = 0; s < 3; ++s) {
      const int cls = static_cast<int>(rng.below(9));
      clip.syllables[s] = cls;
      const Tensor syl = synthesize_syllable(kConsonants[static_cast<std::size_t>(cls / 3)],
                                             kVowels[static_cast<std::size_t>(cls % 3)],
                                             rng.uniform(170.0, 205.0), rng);
      const std::size_t begin = std::min(pos, kClipSamples);
      const std::size_t end = std::min(pos + syl.numel(), kClipSamples);
      for (std::size_t k = begin; k < end; ++k) clip.samples[k] = syl[k - pos];
      clip.bounds[s] = {begin, end};
      pos += syl.numel();
    }
  }
  return corpus;
}

void split_corpus(Corpus &corpus, double ratio, std::uint64_t seed) {
  const std::size_t n = corpus.clips.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  RngStream rng = RngStream::named(seed, "split");
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
  for (std::size_t r = 0; r < n; ++r)
    corpus.clips[order[r]].split = r < n_train ? Split::train : Split::test;
}

std::vector<float> pad_centered(std::span<const float> samples, std::size_t target) {
  if (samples.size() > target)
    throw std::invalid_argument("pad_centered: " + std::to_string(samples.size()) +
                                " samples exceed target length " + std::to_string(target));
  std::vector<float> out(target, 0.0f);
  const std::size_t front = (target - samples.size()) / 2;
  std::copy(samples.begin(), samples.end(), out.begin() + static_cast<std::ptrdiff_t>(front));
  return out;
}

Tensor extract_padded_syllable(const Clip &clip, std::size_t index) {
  if (index >= 3) throw std::out_of_range("syllable index " + std::to_string(index) + " not in 0..2");
  const SampleRange r = clip.bounds[index];
  if (r.end > clip.samples.numel() || r.begin > r.end)
    throw std::out_of_range("syllable bounds outside clip " + clip.id);
  const auto all = clip.samples.data();
  return Tensor({1, kClipSamples}, pad_centered(all.subspan(r.begin, r.size()), kClipSamples));
}

std::vector<std::vector<std::size_t>> batch_order(const Corpus &corpus, Split split,
                                                  std::size_t batch_size, std::uint64_t seed,
                                                  std::uint64_t epoch) {
  if (batch_size == 0) throw std::invalid_argument("batch_order: batch size must be >= 1");
  std::vector<std::size_t> idx = corpus.indices(split);
  RngStream rng = RngStream::named(seed, "batches").derive(epoch);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s + batch_size <= idx.size(); s += batch_size)
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(s),
                     idx.begin() + static_cast<std::ptrdiff_t>(s + batch_size));
  return out;
}

Tensor stack_clips(const Corpus &corpus, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("stack_clips: no clips");
  const std::size_t len = corpus.clips.at(indices[0]).samples.numel();
  Tensor out({indices.size(), 1, len});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Tensor &s = corpus.clips.at(indices[b]).samples;
    if (s.numel() != len)
      throw ShapeError("stack_clips: clip " + corpus.clips[indices[b]].id + " has " +
                       std::to_string(s.numel()) + " samples, expected " + std::to_string(len));
    std::copy(s.data().begin(), s.data().end(), out.ptr() + b * len);
  }
  return out;
}

std::vector<Batch> batch_iter(const Corpus &corpus, Split split, std::size_t batch_size,
                              std::uint64_t seed, std::uint64_t epoch) {
  std::vector<Batch> out;
  for (auto &idx : batch_order(corpus, split, batch_size, seed, epoch))
    out.push_back({stack_clips(corpus, idx), std::move(idx)});
  return out;
}

namespace {

std::vector<std::string> split_on(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void write_corpus(const Corpus &corpus, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.tsv");
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.tsv").string());
  manifest << "id\tfilename\tword\tsyllables\tvowels\tsplit\tboundaries\n";
  for (const Clip &clip : corpus.clips) {
    write_wav(dir / clip.filename(), clip.samples.data());
    const auto v = clip.vowels();
    manifest << clip.id << '\t' << clip.filename() << '\t' << clip.word() << '\t'
             << syllable_name(clip.syllables[0]) << ',' << syllable_name(clip.syllables[1])
             << ',' << syllable_name(clip.syllables[2]) << '\t' << kVowels[v[0]] << ','
             << kVowels[v[1]] << ',' << kVowels[v[2]] << '\t' << split_name(clip.split) << '\t';
    for (std::size_t s = 0; s < 3; ++s)
      manifest << (s ? "," : "") << clip.bounds[s].begin << ':' << clip.bounds[s].end;
    manifest << '\n';
  }
}

Corpus read_corpus(const std::filesystem::path &dir) {
  std::ifstream manifest(dir / "manifest.tsv");
  if (!manifest) throw std::runtime_error("cannot read " + (dir / "manifest.tsv").string());
  std::string line;
  std::getline(manifest, line);
  if (line.rfind("id\tfilename\tword\tsyllables\tvowels\tsplit", 0) != 0)
    throw std::runtime_error("manifest.tsv: unexpected header '" + line + "'");
  Corpus corpus;
  std::size_t line_no = 1;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_on(line, '\t');
    if (cols.size() < 7)
      throw std::runtime_error("manifest.tsv line " + std::to_string(line_no) +
                               ": expected 7 columns");
    Clip clip;
    clip.id = cols[0];
    const auto syl = split_on(cols[3], ',');
    const auto bnd = split_on(cols[6], ',');
    if (syl.size() != 3 || bnd.size() != 3)
      throw std::runtime_error("manifest.tsv line " + std::to_string(line_no) +
                               ": need 3 syllables and 3 boundaries");
    for (std::size_t s = 0; s < 3; ++s) {
      if (syl[s].size() != 2)
        throw std::runtime_error("manifest.tsv: bad syllable '" + syl[s] + "'");
      clip.syllables[s] = syllable_class(syl[s][0], syl[s][1]);
      const auto colon = bnd[s].find(':');
      if (colon == std::string::npos)
        throw std::runtime_error("manifest.tsv: bad boundary '" + bnd[s] + "'");
      clip.bounds[s] = {std::stoul(bnd[s].substr(0, colon)), std::stoul(bnd[s].substr(colon + 1))};
    }
    clip.split = parse_split(cols[5]);
    auto samples = read_wav(dir / cols[1]);
    const std::size_t n = samples.size();
    clip.samples = Tensor({1, n}, std::move(samples));
    corpus.clips.push_back(std::move(clip));
  }
  return corpus;
}

}  // namespace sim
