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

#include "sim/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sim/checkpoint.hpp"
#include "sim/optim.hpp"

namespace sim {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fmt(const std::optional<double> &v) { return v ? fmt(*v) : "NA"; }

std::size_t to_size(const std::string &key, const std::string &v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception &) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-')
    throw std::invalid_argument("config: " + key + " expects a non-negative integer, got '" +
                                v + "'");
  return static_cast<std::size_t>(n);
}

double to_double(const std::string &key, const std::string &v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception &) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || !std::isfinite(d))
    throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  return d;
}

std::vector<Var> as_vars(const std::vector<Parameter> &params) {
  std::vector<Var> out;
  for (const auto &p : params) out.push_back(p.var);
  return out;
}

std::string module_label(const Model &model, std::size_t group) {
  switch (model.config().variant) {
    case Variant::cpc: return "cpc";
    case Variant::supervised: return "supervised";
    default: break;
  }
  return group < model.modules().size() ? std::to_string(group + 1) : "ar";
}

struct SyllableSet {
  std::vector<Tensor> clips;
  std::vector<int> labels;
};

SyllableSet training_syllables(const Corpus &corpus) {
  SyllableSet s;
  for (std::size_t i : corpus.indices(Split::train))
    for (std::size_t j = 0; j < 3; ++j) {
      s.clips.push_back(extract_padded_syllable(corpus.clips[i], j));
      s.labels.push_back(corpus.clips[i].syllables[j]);
    }
  return s;
}

}  // namespace

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "variant=" << variant_name(model.variant) << "\n"
     << "channels=" << model.channels << "\n"
     << "gru_dim=" << model.gru_dim << "\n"
     << "epochs=" << epochs << "\n"
     << "lr=" << fmt(lr) << "\n"
     << "batch_size=" << batch_size << "\n"
     << "K=" << model.prediction_steps << "\n"
     << "beta=" << fmt(model.beta) << "\n"
     << "seed=" << model.seed << "\n"
     << "schedule=" << (schedule == Schedule::parallel ? "parallel" : "sequential") << "\n"
     << "kl_collapse_threshold=" << fmt(kl_collapse_threshold) << "\n";
  return os.str();
}

std::string TrainConfig::hash() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_text())));
  return buf;
}

TrainConfig parse_train_config(const std::string &text, TrainConfig base) {
  TrainConfig c = std::move(base);
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": duplicate key '" +
                                  key + "'");
    if (key == "variant") {
      c.model.variant = parse_variant(value);
    } else if (key == "channels") {
      c.model.channels = to_size(key, value);
    } else if (key == "gru_dim") {
      c.model.gru_dim = to_size(key, value);
    } else if (key == "epochs") {
      c.epochs = to_size(key, value);
    } else if (key == "lr") {
      c.lr = to_double(key, value);
    } else if (key == "batch_size") {
      c.batch_size = to_size(key, value);
    } else if (key == "K") {
      c.model.prediction_steps = to_size(key, value);
    } else if (key == "beta") {
      c.model.beta = to_double(key, value);
    } else if (key == "seed") {
      c.model.seed = to_size(key, value);
    } else if (key == "schedule") {
      if (value == "parallel")
        c.schedule = Schedule::parallel;
      else if (value == "sequential")
        c.schedule = Schedule::sequential;
      else
        throw std::invalid_argument("config: schedule must be parallel|sequential, got '" +
                                    value + "'");
    } else if (key == "kl_collapse_threshold") {
      c.kl_collapse_threshold = to_double(key, value);
    } else {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" +
                                  key + "'");
    }
  }
  if (c.batch_size == 0) throw std::invalid_argument("config: batch_size must be positive");
  if (c.model.prediction_steps == 0) throw std::invalid_argument("config: K must be positive");
  if (c.lr <= 0.0) throw std::invalid_argument("config: lr must be positive");
  if (c.model.beta < 0.0) throw std::invalid_argument("config: beta must be >= 0");
  return c;
}

TrainConfig load_train_config(const std::filesystem::path &path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str(), std::move(base));
}

std::string runlog_header() { return "config_hash\tepoch\tmodule\tloss\tkl\tkl_per_dim\tmi_bound"; }

std::string format_runlog_row(const RunLogRow &r) {
  return r.config_hash + "\t" + std::to_string(r.epoch) + "\t" + r.module + "\t" + fmt(r.loss) +
         "\t" + fmt(r.kl) + "\t" + fmt(r.kl_per_dim) + "\t" + fmt(r.mi_bound);
}

std::vector<RunLogRow> read_runlog(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open runlog " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != runlog_header())
    throw std::runtime_error("runlog " + path.string() + " has an unexpected header");
  auto opt = [](const std::string &s) -> std::optional<double> {
    if (s == "NA") return std::nullopt;
    return std::stod(s);
  };
  std::vector<RunLogRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) f.push_back(cell);
    if (f.size() != 7) throw std::runtime_error("runlog row has " + std::to_string(f.size()) +
                                                " fields: " + line);
    rows.push_back({f[0], std::stoul(f[1]), f[2], std::stod(f[3]), opt(f[4]), opt(f[5]),
                    opt(f[6])});
  }
  return rows;
}

std::vector<std::string> monitor_kl(const std::vector<RunLogRow> &rows, double threshold,
                                    std::size_t consecutive) {
  std::map<std::string, std::size_t> streak;
  std::map<std::string, std::size_t> first;
  std::set<std::string> warned;
  std::vector<std::string> warnings;
  for (const auto &r : rows) {
    if (!r.kl_per_dim) continue;
    if (*r.kl_per_dim < threshold) {
      if (streak[r.module]++ == 0) first[r.module] = r.epoch;
    } else {
      streak[r.module] = 0;
    }
    if (streak[r.module] >= consecutive && !warned.count(r.module)) {
      warned.insert(r.module);
      warnings.push_back("posterior collapse: module " + r.module + " mean per-dim KL below " +
                         fmt(threshold) + " for " + std::to_string(consecutive) +
                         " consecutive epochs (epochs " + std::to_string(first[r.module]) + "-" +
                         std::to_string(r.epoch) + ")");
    }
  }
  return warnings;
}

StepLosses build_step_losses(const Model &model, const Tensor &waveforms, std::uint64_t step) {
  const ModelConfig &cfg = model.config();
  if (cfg.variant == Variant::supervised)
    throw std::invalid_argument("build_step_losses: use build_supervised_loss for the supervised "
                                "variant");
  RngStream eps = RngStream::named(cfg.seed, "eps").derive(step);
  RngStream neg = RngStream::named(cfg.seed, "negatives").derive(step);
  const std::size_t n_neg = kCandidates - 1;
  const double log_n = std::log(static_cast<double>(kCandidates));
  StepLosses out;

  if (cfg.variant == Variant::cpc) {
    ForwardResult fr = forward_full(model, waveforms, EncodeMode::mean, nullptr, false);
    const LatentFrames &last = fr.modules.back();
    const CandidateSet cands =
        draw_negatives(last.batch(), last.frames(), cfg.prediction_steps, n_neg, neg);
    const auto w = as_vars(model.ar().score);
    NceResult r = info_nce(last.z, fr.context, w, cands);
    out.losses.push_back(r.loss);
    out.rows.push_back({"", 0, "cpc", r.value, std::nullopt, std::nullopt, log_n - r.value});
    return out;
  }

  const bool stochastic = cfg.stochastic();
  ForwardResult fr = forward_full(model, waveforms,
                                  stochastic ? EncodeMode::sample : EncodeMode::mean, &eps, true);
  for (std::size_t m = 0; m < fr.modules.size(); ++m) {
    const LatentFrames &lf = fr.modules[m];
    const CandidateSet cands =
        draw_negatives(lf.batch(), lf.frames(), cfg.prediction_steps, n_neg, neg);
    const auto w = as_vars(model.modules()[m].score);
    RunLogRow row{"", 0, std::to_string(m + 1), 0.0, std::nullopt, std::nullopt, std::nullopt};
    if (stochastic) {
      LossBreakdown b = smooth_info_nce(lf, w, cfg.beta, cands);
      out.losses.push_back(b.total);
      row.loss = b.nce;
      row.kl = b.kl;
      row.kl_per_dim = b.kl_per_dim;
      row.mi_bound = log_n - b.nce;
    } else {
      NceResult r = info_nce(lf.z, lf.z, w, cands);
      out.losses.push_back(r.loss);
      row.loss = r.value;
      row.mi_bound = log_n - r.value;
    }
    out.rows.push_back(row);
  }
  const Var scored = detach(fr.modules.back().z);
  const CandidateSet cands = draw_negatives(scored.shape()[0], scored.shape()[1],
                                            cfg.prediction_steps, n_neg, neg);
  NceResult r = info_nce(scored, fr.context, as_vars(model.ar().score), cands);
  out.losses.push_back(r.loss);
  out.rows.push_back({"", 0, "ar", r.value, std::nullopt, std::nullopt, log_n - r.value});
  return out;
}

StepLosses build_supervised_loss(const Model &model, const Tensor &waveforms,
                                 std::span<const int> labels) {
  if (model.config().variant != Variant::supervised)
    throw std::invalid_argument("build_supervised_loss: model has no classifier head");
  ForwardResult fr = forward_full(model, waveforms, EncodeMode::mean, nullptr, false);
  Var pooled = ops::mean_time(fr.context);
  Var logits = ops::linear(pooled, model.head_weight().var, &model.head_bias().var);
  Var loss = ops::cross_entropy(logits, labels);
  StepLosses out;
  out.losses.push_back(loss);
  out.rows.push_back({"", 0, "supervised", cross_entropy(logits.value(), labels), std::nullopt,
                      std::nullopt, std::nullopt});
  return out;
}

Model train_model(const TrainConfig &config, const Corpus &corpus, std::vector<RunLogRow> *rows,
                  const std::function<void(const EpochSummary &)> &on_epoch) {
  if (corpus.count(Split::train) < config.batch_size)
    throw std::invalid_argument("train: the corpus train split has fewer clips (" +
                                std::to_string(corpus.count(Split::train)) +
                                ") than one batch (" + std::to_string(config.batch_size) + ")");
  Model model(config.model);
  auto groups = model.parameter_groups();
  std::vector<Adam> optimizers;
  AdamConfig adam;
  adam.lr = config.lr;
  for (auto &g : groups) optimizers.emplace_back(g, adam);
  const std::string hash = config.hash();
  const bool supervised = config.model.variant == Variant::supervised;
  const SyllableSet syllables = supervised ? training_syllables(corpus) : SyllableSet{};

  const bool sequential = config.schedule == Schedule::sequential && groups.size() > 1;
  const std::size_t phases = sequential ? groups.size() : 1;
  std::uint64_t step = 0;
  std::size_t global_epoch = 0;
  for (std::size_t phase = 0; phase < phases; ++phase) {
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch, ++global_epoch) {
      const auto start = std::chrono::steady_clock::now();
      std::vector<RunLogRow> sums;
      std::size_t batches = 0;

      auto run_batch = [&](StepLosses losses) {
        for (std::size_t g = 0; g < losses.losses.size(); ++g) {
          if (sequential && g != phase) continue;
          const auto &row = losses.rows[g];
          if (!std::isfinite(row.loss) || !std::isfinite(losses.losses[g].item()))
            throw NumericError("module " + row.module + ": non-finite loss at step " +
                               std::to_string(step));
          backward(losses.losses[g]);
          optimizers[g].step();
          optimizers[g].zero_grad();
        }
        if (sums.empty()) {
          sums = losses.rows;
        } else {
          for (std::size_t g = 0; g < sums.size(); ++g) {
            sums[g].loss += losses.rows[g].loss;
            if (sums[g].kl) *sums[g].kl += *losses.rows[g].kl;
            if (sums[g].kl_per_dim) *sums[g].kl_per_dim += *losses.rows[g].kl_per_dim;
            if (sums[g].mi_bound) *sums[g].mi_bound += *losses.rows[g].mi_bound;
          }
        }
        ++batches;
        ++step;
      };

      try {
        if (supervised) {
          std::vector<std::size_t> order(syllables.clips.size());
          for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
          RngStream rng = RngStream::named(config.model.seed, "supervised").derive(epoch);
          for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
          for (std::size_t b = 0; b + config.batch_size <= order.size(); b += config.batch_size) {
            Tensor wave({config.batch_size, 1, kClipSamples});
            std::vector<int> labels;
            for (std::size_t j = 0; j < config.batch_size; ++j) {
              const auto &src = syllables.clips[order[b + j]].data();
              std::copy(src.begin(), src.end(), wave.data().begin() + j * kClipSamples);
              labels.push_back(syllables.labels[order[b + j]]);
            }
            run_batch(build_supervised_loss(model, wave, labels));
          }
        } else {
          for (const Batch &batch :
               batch_iter(corpus, Split::train, config.batch_size, config.model.seed,
                          global_epoch))
            run_batch(build_step_losses(model, batch.waveforms, step));
        }
      } catch (const NumericError &e) {
        const std::string what = e.what();
        if (what.find(" at step ") != std::string::npos) throw;
        throw NumericError(what + " (at step " + std::to_string(step) + ")");
      }

      EpochSummary summary;
      summary.epoch = global_epoch;
      for (std::size_t g = 0; g < sums.size(); ++g) {
        if (sequential && g != phase) continue;
        RunLogRow r = sums[g];
        const double n = static_cast<double>(batches);
        r.config_hash = hash;
        r.epoch = global_epoch;
        r.module = module_label(model, g);
        r.loss /= n;
        if (r.kl) *r.kl /= n;
        if (r.kl_per_dim) *r.kl_per_dim /= n;
        if (r.mi_bound) *r.mi_bound /= n;
        summary.rows.push_back(r);
        if (rows) rows->push_back(r);
      }
      summary.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (on_epoch) on_epoch(summary);
    }
  }
  return model;
}

TrainResult train(const TrainConfig &config, const Corpus &corpus,
                  const std::filesystem::path &out,
                  const std::function<void(const EpochSummary &)> &on_epoch) {
  TrainResult result;
  result.checkpoint = out;
  result.runlog = out.string() + ".runlog.tsv";
  std::ofstream runlog(result.runlog, std::ios::trunc);
  std::ofstream timing(out.string() + ".timing.tsv", std::ios::trunc);
  if (!runlog || !timing) throw std::runtime_error("cannot write run logs next to " + out.string());
  runlog << runlog_header() << "\n";
  timing << "epoch\tseconds\n";
  Model model = train_model(config, corpus, &result.rows, [&](const EpochSummary &s) {
    for (const auto &r : s.rows) runlog << format_runlog_row(r) << "\n";
    runlog.flush();
    timing << s.epoch << "\t" << fmt(s.seconds) << "\n";
    if (on_epoch) on_epoch(s);
  });
  save_checkpoint(model, out);
  result.warnings = monitor_kl(result.rows, config.kl_collapse_threshold);
  return result;
}

}  // namespace sim
