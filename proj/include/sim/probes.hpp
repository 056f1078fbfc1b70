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

// Post-hoc analysis of frozen encoders: linear probes, probe-weight
// concentration, decoder training, latent interpolation, dimension ranking,
// partial swaps and the relative reconstruction error delta.

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sim/decoder.hpp"
#include "sim/model.hpp"
#include "sim/syllabgen.hpp"

namespace sim {

/// Layer selector: 1..M for encoder modules, kContextLayer for the GRU.
inline constexpr std::size_t kContextLayer = 0;
std::size_t parse_layer(const std::string &s);
std::string layer_name(std::size_t layer);

enum class ProbeTask { vowel, syllable };
std::string_view task_name(ProbeTask t);
ProbeTask parse_task(std::string_view s);
inline std::size_t task_classes(ProbeTask t) { return t == ProbeTask::vowel ? 3 : 9; }

/// Mean over the time axis of a [T, D] matrix.
Tensor pool_context(const Tensor &frames);

/// Mean-mode encodings of [1, L] waveforms at one layer, [T, D] each.
std::vector<Tensor> encode_clips(const Model &model, const std::vector<Tensor> &waveforms,
                                 std::size_t layer, std::size_t batch = 16);

/// Pooled features [N, D] for every layer (index 0 = context, m = module m).
std::vector<Tensor> pooled_features_all_layers(const Model &model,
                                               const std::vector<Tensor> &waveforms,
                                               std::size_t batch = 16);

/// One padded single-syllable clip per (clip, syllable), with labels.
struct SyllableData {
  std::vector<Tensor> waveforms;
  std::vector<int> syllable;
  std::vector<int> vowel;
};
SyllableData syllable_dataset(const Corpus &corpus);

struct ProbeConfig {
  std::size_t epochs = 50;
  double lr = 1e-3;
  std::size_t batch_size = 1;
  bool has_bias = true;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  ProbeTask task = ProbeTask::vowel;
  std::string layer;
  Tensor weights;  // [C, D]
  Tensor bias;     // [C], zeros when has_bias is false
  bool has_bias = true;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<double> loss_history;  // per epoch
};

/// Linear layer trained with cross-entropy and Adam. Throws
/// std::invalid_argument when a label is outside [0, classes) or the feature
/// and label counts disagree.
ProbeResult train_probe(const Tensor &train_x, std::span<const int> train_y, const Tensor &test_x,
                        std::span<const int> test_y, std::size_t classes,
                        const ProbeConfig &config);

/// Fraction of rows of `x` classified as their label by (w, b).
double probe_accuracy(const Tensor &w, const Tensor &b, const Tensor &x, std::span<const int> y);

/// Seeded 80/20 split of [0, n).
void split_indices(std::size_t n, std::uint64_t seed, std::vector<std::size_t> &train,
                   std::vector<std::size_t> &test);
Tensor gather_rows(const Tensor &x, std::span<const std::size_t> rows);

struct Concentration {
  std::vector<double> magnitude;     // per input dimension, in [0, 1]
  std::vector<std::size_t> histogram;  // 50 bins over [0, 1]
  double near_zero_fraction = 0.0;     // magnitude < 0.05
};
inline constexpr std::size_t kConcentrationBins = 50;
inline constexpr double kNearZero = 0.05;

/// Per dimension: max over classes of |w|, divided by the largest entry.
Concentration weight_concentration(const Tensor &weights);

struct DecoderTrainConfig {
  std::size_t epochs = 200;
  double lr = 2e-4;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
};

struct DecoderTrainResult {
  Decoder decoder;
  std::vector<double> loss_history;  // mean MSE per epoch
};

/// Trains a mirror decoder on mean-mode latents of the train split with MSE
/// against the waveform. The encoder is only read.
DecoderTrainResult train_decoder(const Model &model, std::size_t module_index,
                                 const Corpus &corpus, const DecoderTrainConfig &config,
                                 const std::function<void(std::size_t, double)> &on_epoch = {});

/// (1 - alpha) a + alpha b. Throws for a shape mismatch or alpha outside [0, 1].
Tensor interpolate(const Tensor &a, const Tensor &b, double alpha);

/// Dimensions ordered by mean_t |start - target| descending, ties by index.
std::vector<std::size_t> rank_importance(const Tensor &start, const Tensor &target);

/// Start with the first n ranked dimensions copied from target.
Tensor partial_swap(const Tensor &start, const Tensor &target,
                    std::span<const std::size_t> ranking, std::size_t n);

double mean_abs_error(const Tensor &a, const Tensor &b);

/// MAE(target, alpha) / MAE(start, alpha) on decoded waveforms; nullopt when
/// the denominator is below 1e-8.
std::optional<double> relative_error(const Tensor &x_start, const Tensor &x_target,
                                     const Tensor &x_alpha);

/// delta for the top-n swap of start towards target.
std::optional<double> delta(const Decoder &decoder, const Tensor &start, const Tensor &target,
                            std::size_t n);

/// Decoder MAE between consecutive points of an interpolation strip with
/// `steps` intervals.
std::vector<double> interpolation_steps(const Decoder &decoder, const Tensor &a, const Tensor &b,
                                        std::size_t steps);

/// Swap counts 2, 4, 8, ... up to and including dims.
std::vector<std::size_t> delta_grid(std::size_t dims);

/// Random pairs of test-split clips with different words.
std::vector<std::pair<std::size_t, std::size_t>> delta_pairs(const Corpus &corpus,
                                                             std::size_t count,
                                                             std::uint64_t seed);

struct DeltaRow {
  std::size_t module = 0;
  std::string variant;
  std::size_t n = 0;
  double delta = 0.0;  // mean over defined pairs, percent
  double delta_std = 0.0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;
  std::size_t above_one = 0;  // pairs with delta > 100 %
};

/// delta rows for every N in delta_grid(D) over the given pairs.
std::vector<DeltaRow> delta_table(const Model &model, const Decoder &decoder,
                                  const Corpus &corpus,
                                  const std::vector<std::pair<std::size_t, std::size_t>> &pairs);

/// Fraction of adjacent N where the mean delta does not increase.
double delta_monotone_fraction(const std::vector<DeltaRow> &rows);

struct AccuracyRow {
  std::string variant;
  std::string layer;
  ProbeTask task = ProbeTask::vowel;
  bool has_bias = true;
  double mean = 0.0;  // test accuracy, percent
  double std = 0.0;
  std::size_t seeds = 0;
};

struct ReportConfig {
  std::size_t probe_seeds = 3;
  ProbeConfig probe;
  std::size_t delta_pairs = 20;
  std::uint64_t seed = 0;
  double gap_points = 10.0;  // vowel - syllable accuracy that counts as a gap
};

struct ReportInput {
  std::string name;  // e.g. "sim"
  const Model *model = nullptr;
  std::map<std::size_t, const Decoder *> decoders;  // by module
};

struct Report {
  std::vector<AccuracyRow> accuracy;
  std::map<std::pair<std::string, std::size_t>, Concentration> concentration;
  std::map<std::pair<std::string, std::size_t>, double> concentration_accuracy;
  std::vector<DeltaRow> delta;
  std::vector<std::string> notes;
};

/// Writes accuracy.tsv, concentration_module{m}.tsv, delta.tsv and
/// interp_{pair}_{alpha}.wav into out_dir.
Report run_report(const std::vector<ReportInput> &inputs, const Corpus &corpus,
                  const std::filesystem::path &out_dir, const ReportConfig &config = {});

}  // namespace sim
