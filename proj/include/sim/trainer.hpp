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

// Training loops.
//
// Greedy variants (SIM, GIM) give every encoder module its own loss on its
// own outputs, with the module input detached, and one Adam optimizer per
// module. The GRU is trained with InfoNCE between its context and the
// (detached) last-module latents. CPC trains the whole stack end to end on
// the GRU loss; the supervised baseline trains it end to end with
// cross-entropy on single syllables.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sim/losses.hpp"
#include "sim/model.hpp"
#include "sim/syllabgen.hpp"

namespace sim {

enum class Schedule { parallel, sequential };

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 1000;
  double lr = 2e-4;
  std::size_t batch_size = 8;
  Schedule schedule = Schedule::parallel;
  double kl_collapse_threshold = 1e-3;

  std::uint64_t seed() const { return model.seed; }
  /// Canonical key=value text; parse_train_config(to_text()) round-trips.
  std::string to_text() const;
  /// 16 hex digits of the FNV-1a hash of to_text().
  std::string hash() const;
};

/// Flat key=value text with keys variant, channels, gru_dim, epochs, lr,
/// batch_size, K, beta, seed, schedule, kl_collapse_threshold. Blank lines and
/// '#' comments are ignored; unknown keys, duplicates and bad values throw
/// std::invalid_argument naming the line. Unset keys keep `base`'s values.
TrainConfig parse_train_config(const std::string &text, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path &path, TrainConfig base = {});

/// One RunLog row. `module` is "1".."M", "ar", "cpc" or "supervised".
/// kl and kl_per_dim are absent for deterministic modules; mi_bound is absent
/// for the supervised objective, whose `loss` is cross-entropy.
struct RunLogRow {
  std::string config_hash;
  std::size_t epoch = 0;
  std::string module;
  double loss = 0.0;
  std::optional<double> kl;
  std::optional<double> kl_per_dim;
  std::optional<double> mi_bound;
};

/// Tab-separated, header
/// config_hash epoch module loss kl kl_per_dim mi_bound; absent values are "NA".
std::string runlog_header();
std::string format_runlog_row(const RunLogRow &row);
std::vector<RunLogRow> read_runlog(const std::filesystem::path &path);

/// Warns once per module whose mean per-dimension KL stays below `threshold`
/// for `consecutive` epochs in a row.
std::vector<std::string> monitor_kl(const std::vector<RunLogRow> &rows, double threshold = 1e-3,
                                    std::size_t consecutive = 5);

/// Losses for one batch. For greedy variants there is one entry per encoder
/// module plus one for the GRU, each depending only on that module's
/// parameters. CPC yields a single entry.
struct StepLosses {
  std::vector<Var> losses;
  std::vector<RunLogRow> rows;  // loss values (epoch/hash unset)
};

/// `step` keys the reparametrization noise and the negative draws.
StepLosses build_step_losses(const Model &model, const Tensor &waveforms,
                             std::uint64_t step);

/// Supervised objective on a batch of padded syllables.
StepLosses build_supervised_loss(const Model &model, const Tensor &waveforms,
                                 std::span<const int> labels);

struct EpochSummary {
  std::size_t epoch = 0;
  std::vector<RunLogRow> rows;
  double seconds = 0.0;
};

struct TrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path runlog;
  std::vector<RunLogRow> rows;
  std::vector<std::string> warnings;
};

/// Trains on the train split and writes <out>, <out>.runlog.tsv (byte
/// reproducible for a fixed config) and <out>.timing.tsv (wall clock).
/// Throws NumericError naming module and step on a non-finite loss.
TrainResult train(const TrainConfig &config, const Corpus &corpus,
                  const std::filesystem::path &out,
                  const std::function<void(const EpochSummary &)> &on_epoch = {});

/// Same, returning the trained model instead of writing files.
Model train_model(const TrainConfig &config, const Corpus &corpus, std::vector<RunLogRow> *rows,
                  const std::function<void(const EpochSummary &)> &on_epoch = {});

}  // namespace sim
