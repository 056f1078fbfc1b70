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

#include "sim/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "sim/optim.hpp"
#include "sim/wav.hpp"

namespace sim {

namespace {

Tensor stack(const std::vector<Tensor> &items, std::size_t begin, std::size_t end) {
  Shape shape = items[begin].shape();
  shape.insert(shape.begin(), end - begin);
  Tensor out(shape);
  const std::size_t n = items[begin].numel();
  for (std::size_t i = begin; i < end; ++i) {
    if (items[i].shape() != items[begin].shape())
      throw ShapeError("stack: mixed shapes " + shape_string(items[i].shape()) + " and " +
                       shape_string(items[begin].shape()));
    std::copy(items[i].data().begin(), items[i].data().end(),
              out.data().begin() + (i - begin) * n);
  }
  return out;
}

Tensor slice0(const Tensor &t, std::size_t i) {
  Shape shape(t.shape().begin() + 1, t.shape().end());
  const std::size_t n = shape_numel(shape);
  const auto src = t.data().subspan(i * n, n);
  return Tensor(shape, std::vector<float>(src.begin(), src.end()));
}

double mean_of(const std::vector<double> &v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double> &v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string fmt(double v, const char *f = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<Tensor> clip_waveforms(const Corpus &corpus, std::span<const std::size_t> idx) {
  std::vector<Tensor> out;
  for (std::size_t i : idx) out.push_back(corpus.clips[i].samples);
  return out;
}

}  // namespace

std::size_t parse_layer(const std::string &s) {
  if (s == "context") return kContextLayer;
  if (s == "1" || s == "2" || s == "3") return static_cast<std::size_t>(s[0] - '0');
  throw std::invalid_argument("layer must be 1|2|3|context, got '" + s + "'");
}

std::string layer_name(std::size_t layer) {
  return layer == kContextLayer ? "context" : std::to_string(layer);
}

std::string_view task_name(ProbeTask t) { return t == ProbeTask::vowel ? "vowel" : "syllable"; }

ProbeTask parse_task(std::string_view s) {
  if (s == "vowel") return ProbeTask::vowel;
  if (s == "syllable") return ProbeTask::syllable;
  throw std::invalid_argument("task must be vowel|syllable, got '" + std::string(s) + "'");
}

Tensor pool_context(const Tensor &frames) {
  if (frames.rank() != 2 || frames.shape()[0] == 0)
    throw ShapeError("pool_context: expected a non-empty [T, D] matrix, got " +
                     shape_string(frames.shape()));
  const std::size_t t = frames.shape()[0], d = frames.shape()[1];
  std::vector<double> acc(d, 0.0);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < d; ++j) acc[j] += frames.at(i, j);
  Tensor out({d});
  for (std::size_t j = 0; j < d; ++j) out[j] = static_cast<float>(acc[j] / static_cast<double>(t));
  return out;
}

std::vector<Tensor> encode_clips(const Model &model, const std::vector<Tensor> &waveforms,
                                 std::size_t layer, std::size_t batch) {
  if (layer > model.modules().size())
    throw std::out_of_range("encode_clips: layer " + std::to_string(layer) + " does not exist");
  NoGradGuard no_grad;
  std::vector<Tensor> out;
  for (std::size_t b = 0; b < waveforms.size(); b += batch) {
    const std::size_t e = std::min(waveforms.size(), b + batch);
    ForwardResult fr = forward_full(model, stack(waveforms, b, e), EncodeMode::mean, nullptr);
    const Tensor &v = layer == kContextLayer ? fr.context.value() : fr.modules[layer - 1].z.value();
    for (std::size_t i = 0; i < e - b; ++i) out.push_back(slice0(v, i));
  }
  return out;
}

std::vector<Tensor> pooled_features_all_layers(const Model &model,
                                               const std::vector<Tensor> &waveforms,
                                               std::size_t batch) {
  NoGradGuard no_grad;
  const std::size_t layers = model.modules().size() + 1;
  std::vector<Tensor> out;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t d = l == kContextLayer ? model.config().gru_dim : model.config().channels;
    out.emplace_back(Shape{waveforms.size(), d});
  }
  for (std::size_t b = 0; b < waveforms.size(); b += batch) {
    const std::size_t e = std::min(waveforms.size(), b + batch);
    ForwardResult fr = forward_full(model, stack(waveforms, b, e), EncodeMode::mean, nullptr);
    for (std::size_t l = 0; l < layers; ++l) {
      const Tensor &v = l == kContextLayer ? fr.context.value() : fr.modules[l - 1].z.value();
      for (std::size_t i = 0; i < e - b; ++i) {
        const Tensor pooled = pool_context(slice0(v, i));
        std::copy(pooled.data().begin(), pooled.data().end(),
                  out[l].data().begin() + (b + i) * pooled.numel());
      }
    }
  }
  return out;
}

SyllableData syllable_dataset(const Corpus &corpus) {
  SyllableData d;
  for (const Clip &clip : corpus.clips)
    for (std::size_t j = 0; j < 3; ++j) {
      d.waveforms.push_back(extract_padded_syllable(clip, j));
      d.syllable.push_back(clip.syllables[j]);
      d.vowel.push_back(vowel_of(clip.syllables[j]));
    }
  return d;
}

double probe_accuracy(const Tensor &w, const Tensor &b, const Tensor &x, std::span<const int> y) {
  const std::size_t n = x.shape()[0], d = x.shape()[1], c = w.shape()[0];
  if (y.size() != n) throw std::invalid_argument("probe_accuracy: feature/label count mismatch");
  if (n == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_v = -INFINITY;
    for (std::size_t k = 0; k < c; ++k) {
      double v = b[k];
      for (std::size_t j = 0; j < d; ++j) v += static_cast<double>(w.at(k, j)) * x.at(i, j);
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    if (static_cast<int>(best) == y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

ProbeResult train_probe(const Tensor &train_x, std::span<const int> train_y, const Tensor &test_x,
                        std::span<const int> test_y, std::size_t classes,
                        const ProbeConfig &config) {
  if (train_x.rank() != 2 || test_x.rank() != 2 || train_x.shape()[1] != test_x.shape()[1])
    throw ShapeError("train_probe: features must be [N, D] with matching D");
  if (train_x.shape()[0] != train_y.size() || test_x.shape()[0] != test_y.size())
    throw std::invalid_argument("train_probe: feature and label counts differ");
  if (train_y.empty()) throw std::invalid_argument("train_probe: no training rows");
  for (const auto labels : {train_y, test_y})
    for (int y : labels)
      if (y < 0 || static_cast<std::size_t>(y) >= classes)
        throw std::invalid_argument("train_probe: label " + std::to_string(y) +
                                    " does not fit " + std::to_string(classes) + " classes");
  const std::size_t n = train_x.shape()[0], d = train_x.shape()[1];
  RngStream init = RngStream::named(config.seed, "probe");
  Tensor w0({classes, d});
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto &v : w0.data()) v = static_cast<float>(init.uniform(-bound, bound));
  Parameter w = make_parameter("probe.weight", std::move(w0));
  Parameter b = make_parameter("probe.bias", Tensor({classes}, 0.0f));
  std::vector<Parameter *> params{&w};
  if (config.has_bias) params.push_back(&b);
  AdamConfig adam;
  adam.lr = config.lr;
  Adam opt(params, adam);

  ProbeResult r;
  r.has_bias = config.has_bias;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    RngStream rng = RngStream::named(config.seed, "probe-batches").derive(epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double total = 0.0;
    for (std::size_t s = 0; s < n; s += config.batch_size) {
      const std::size_t e = std::min(n, s + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + s, e - s);
      std::vector<int> labels;
      for (std::size_t i : rows) labels.push_back(train_y[i]);
      Var logits = ops::linear(Var::constant(gather_rows(train_x, rows)), w.var,
                               config.has_bias ? &b.var : nullptr);
      Var loss = ops::cross_entropy(logits, labels);
      total += static_cast<double>(loss.item()) * static_cast<double>(e - s);
      backward(loss);
      opt.step();
      opt.zero_grad();
    }
    r.loss_history.push_back(total / static_cast<double>(n));
  }
  r.weights = w.value();
  r.bias = config.has_bias ? b.value() : Tensor({classes}, 0.0f);
  r.train_accuracy = probe_accuracy(r.weights, r.bias, train_x, train_y);
  r.test_accuracy = probe_accuracy(r.weights, r.bias, test_x, test_y);
  return r;
}

void split_indices(std::size_t n, std::uint64_t seed, std::vector<std::size_t> &train,
                   std::vector<std::size_t> &test) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng = RngStream::named(seed, "probe-split");
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const std::size_t cut = n * 4 / 5;
  train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
  test.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
}

Tensor gather_rows(const Tensor &x, std::span<const std::size_t> rows) {
  const std::size_t d = x.shape()[1];
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(x.ptr() + rows[i] * d, d, out.ptr() + i * d);
  return out;
}

Concentration weight_concentration(const Tensor &weights) {
  if (weights.rank() != 2) throw ShapeError("weight_concentration: expected [C, D] weights");
  const std::size_t c = weights.shape()[0], d = weights.shape()[1];
  Concentration out;
  out.magnitude.assign(d, 0.0);
  double global = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < c; ++k)
      out.magnitude[j] = std::max(out.magnitude[j], std::fabs(static_cast<double>(weights.at(k, j))));
    global = std::max(global, out.magnitude[j]);
  }
  out.histogram.assign(kConcentrationBins, 0);
  std::size_t near_zero = 0;
  for (auto &m : out.magnitude) {
    m = global > 0.0 ? m / global : 0.0;
    const auto bin = std::min(kConcentrationBins - 1,
                              static_cast<std::size_t>(m * static_cast<double>(kConcentrationBins)));
    ++out.histogram[bin];
    if (m < kNearZero) ++near_zero;
  }
  out.near_zero_fraction = d ? static_cast<double>(near_zero) / static_cast<double>(d) : 0.0;
  return out;
}

DecoderTrainResult train_decoder(const Model &model, std::size_t module_index,
                                 const Corpus &corpus, const DecoderTrainConfig &config,
                                 const std::function<void(std::size_t, double)> &on_epoch) {
  const auto train_idx = corpus.indices(Split::train);
  if (train_idx.empty()) throw std::invalid_argument("train_decoder: corpus has no train split");
  const std::vector<Tensor> targets = clip_waveforms(corpus, train_idx);
  const std::vector<Tensor> latents = encode_clips(model, targets, module_index);
  DecoderTrainResult result{build_mirror_decoder(model.config(), module_index, config.seed), {}};
  AdamConfig adam;
  adam.lr = config.lr;
  Adam opt(result.decoder.parameters(), adam);
  const std::size_t n = latents.size();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    RngStream rng = RngStream::named(config.seed, "decoder-batches").derive(epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double total = 0.0;
    for (std::size_t s = 0; s < n; s += config.batch_size) {
      const std::size_t e = std::min(n, s + config.batch_size);
      std::vector<Tensor> zs, xs;
      for (std::size_t i = s; i < e; ++i) {
        zs.push_back(latents[order[i]]);
        xs.push_back(targets[order[i]]);
      }
      Var out = decode(result.decoder, Var::constant(stack(zs, 0, zs.size())));
      Var loss = ops::mse(out, Var::constant(stack(xs, 0, xs.size())));
      if (!std::isfinite(loss.item()))
        throw NumericError("decoder training: non-finite loss at epoch " + std::to_string(epoch));
      total += static_cast<double>(loss.item()) * static_cast<double>(e - s);
      backward(loss);
      opt.step();
      opt.zero_grad();
    }
    result.loss_history.push_back(total / static_cast<double>(n));
    if (on_epoch) on_epoch(epoch, result.loss_history.back());
  }
  return result;
}

Tensor interpolate(const Tensor &a, const Tensor &b, double alpha) {
  if (a.shape() != b.shape())
    throw ShapeError("interpolate: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("interpolate: alpha must lie in [0, 1], got " +
                                std::to_string(alpha));
  if (alpha == 0.0) return a;
  if (alpha == 1.0) return b;
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = static_cast<float>((1.0 - alpha) * a[i] + alpha * b[i]);
  return out;
}

std::vector<std::size_t> rank_importance(const Tensor &start, const Tensor &target) {
  if (start.shape() != target.shape() || start.rank() != 2)
    throw ShapeError("rank_importance: expected matching [T, D] latents");
  const std::size_t t = start.shape()[0], d = start.shape()[1];
  std::vector<double> score(d, 0.0);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < d; ++j)
      score[j] += std::fabs(static_cast<double>(start.at(i, j)) - target.at(i, j));
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  return order;
}

Tensor partial_swap(const Tensor &start, const Tensor &target,
                    std::span<const std::size_t> ranking, std::size_t n) {
  if (start.shape() != target.shape() || start.rank() != 2)
    throw ShapeError("partial_swap: expected matching [T, D] latents");
  const std::size_t t = start.shape()[0], d = start.shape()[1];
  if (ranking.size() != d || n > d)
    throw std::invalid_argument("partial_swap: ranking must cover all " + std::to_string(d) +
                                " dims and n <= D");
  Tensor out = start;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t j = ranking[r];
    for (std::size_t i = 0; i < t; ++i) out.at(i, j) = target.at(i, j);
  }
  return out;
}

double mean_abs_error(const Tensor &a, const Tensor &b) {
  if (a.shape() != b.shape())
    throw ShapeError("mean_abs_error: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    s += std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  return a.numel() ? s / static_cast<double>(a.numel()) : 0.0;
}

std::optional<double> relative_error(const Tensor &x_start, const Tensor &x_target,
                                     const Tensor &x_alpha) {
  const double den = mean_abs_error(x_start, x_alpha);
  if (den < 1e-8) return std::nullopt;
  return mean_abs_error(x_target, x_alpha) / den;
}

std::optional<double> delta(const Decoder &decoder, const Tensor &start, const Tensor &target,
                            std::size_t n) {
  const auto ranking = rank_importance(start, target);
  const Tensor za = partial_swap(start, target, ranking, n);
  return relative_error(decode(decoder, start), decode(decoder, target), decode(decoder, za));
}

std::vector<double> interpolation_steps(const Decoder &decoder, const Tensor &a, const Tensor &b,
                                        std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("interpolation_steps: need at least one step");
  std::vector<Tensor> decoded;
  for (std::size_t i = 0; i <= steps; ++i)
    decoded.push_back(decode(decoder, interpolate(a, b, static_cast<double>(i) /
                                                            static_cast<double>(steps))));
  std::vector<double> out;
  for (std::size_t i = 0; i < steps; ++i) out.push_back(mean_abs_error(decoded[i], decoded[i + 1]));
  return out;
}

std::vector<std::size_t> delta_grid(std::size_t dims) {
  std::vector<std::size_t> out;
  for (std::size_t n = 2; n < dims; n *= 2) out.push_back(n);
  out.push_back(dims);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> delta_pairs(const Corpus &corpus,
                                                             std::size_t count,
                                                             std::uint64_t seed) {
  const auto test = corpus.indices(Split::test);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  RngStream rng = RngStream::named(seed, "delta-pairs");
  if (test.size() < 2) throw std::invalid_argument("delta_pairs: test split needs two clips");
  for (std::size_t attempt = 0; out.size() < count && attempt < count * 1000; ++attempt) {
    const std::size_t a = test[rng.below(test.size())];
    const std::size_t b = test[rng.below(test.size())];
    if (a == b || corpus.clips[a].word() == corpus.clips[b].word()) continue;
    if (!seen.insert({a, b}).second) continue;
    out.emplace_back(a, b);
  }
  if (out.size() < count)
    throw std::invalid_argument("delta_pairs: only found " + std::to_string(out.size()) +
                                " distinct cross-word pairs in the test split");
  return out;
}

std::vector<DeltaRow> delta_table(const Model &model, const Decoder &decoder,
                                  const Corpus &corpus,
                                  const std::vector<std::pair<std::size_t, std::size_t>> &pairs) {
  const std::size_t m = decoder.module_index();
  std::vector<std::size_t> clips;
  for (const auto &[a, b] : pairs) clips.insert(clips.end(), {a, b});
  const auto latents = encode_clips(model, clip_waveforms(corpus, clips), m);
  const std::size_t d = model.config().channels;
  const auto grid = delta_grid(d);
  std::vector<std::vector<double>> values(grid.size());
  std::vector<std::size_t> skipped(grid.size(), 0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const Tensor &zs = latents[2 * p];
    const Tensor &zt = latents[2 * p + 1];
    const Tensor xs = decode(decoder, zs);
    const Tensor xt = decode(decoder, zt);
    const auto ranking = rank_importance(zs, zt);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Tensor xa = decode(decoder, partial_swap(zs, zt, ranking, grid[g]));
      const auto r = relative_error(xs, xt, xa);
      if (r)
        values[g].push_back(*r);
      else
        ++skipped[g];
    }
  }
  std::vector<DeltaRow> rows;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    DeltaRow row;
    row.module = m;
    row.variant = std::string(variant_name(model.config().variant));
    row.n = grid[g];
    std::vector<double> pct;
    for (double v : values[g]) {
      pct.push_back(100.0 * v);
      if (v > 1.0) ++row.above_one;
    }
    row.delta = mean_of(pct);
    row.delta_std = sample_std(pct);
    row.pairs = values[g].size();
    row.skipped = skipped[g];
    rows.push_back(row);
  }
  return rows;
}

double delta_monotone_fraction(const std::vector<DeltaRow> &rows) {
  std::size_t ok = 0, total = 0;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    if (rows[i].module != rows[i + 1].module || rows[i].variant != rows[i + 1].variant) continue;
    ++total;
    if (rows[i + 1].delta <= rows[i].delta) ++ok;
  }
  return total ? static_cast<double>(ok) / static_cast<double>(total) : 1.0;
}

Report run_report(const std::vector<ReportInput> &inputs, const Corpus &corpus,
                  const std::filesystem::path &out_dir, const ReportConfig &config) {
  std::filesystem::create_directories(out_dir);
  Report report;
  const SyllableData data = syllable_dataset(corpus);
  const auto pairs = delta_pairs(corpus, config.delta_pairs, config.seed);
  std::size_t max_modules = 0;

  for (const ReportInput &in : inputs) {
    const Model &model = *in.model;
    const std::size_t modules = model.modules().size();
    max_modules = std::max(max_modules, modules);
    const auto features = pooled_features_all_layers(model, data.waveforms);
    std::vector<std::size_t> layers;
    for (std::size_t m = 1; m <= modules; ++m) layers.push_back(m);
    layers.push_back(kContextLayer);

    for (std::size_t layer : layers)
      for (ProbeTask task : {ProbeTask::vowel, ProbeTask::syllable}) {
        const std::vector<int> &labels = task == ProbeTask::vowel ? data.vowel : data.syllable;
        std::vector<double> acc;
        for (std::size_t s = 0; s < config.probe_seeds; ++s) {
          std::vector<std::size_t> tr, te;
          split_indices(labels.size(), config.seed + s, tr, te);
          std::vector<int> ytr, yte;
          for (auto i : tr) ytr.push_back(labels[i]);
          for (auto i : te) yte.push_back(labels[i]);
          ProbeConfig pc = config.probe;
          pc.seed = config.seed + s;
          pc.has_bias = true;
          acc.push_back(100.0 * train_probe(gather_rows(features[layer], tr), ytr,
                                            gather_rows(features[layer], te), yte,
                                            task_classes(task), pc)
                                    .test_accuracy);
        }
        report.accuracy.push_back(
            {in.name, layer_name(layer), task, true, mean_of(acc), sample_std(acc), acc.size()});
      }

    for (std::size_t m = 1; m <= modules; ++m) {
      std::vector<std::size_t> tr, te;
      split_indices(data.vowel.size(), config.seed, tr, te);
      std::vector<int> ytr, yte;
      for (auto i : tr) ytr.push_back(data.vowel[i]);
      for (auto i : te) yte.push_back(data.vowel[i]);
      ProbeConfig pc = config.probe;
      pc.seed = config.seed;
      pc.has_bias = false;
      const ProbeResult pr = train_probe(gather_rows(features[m], tr), ytr,
                                         gather_rows(features[m], te), yte, 3, pc);
      report.concentration[{in.name, m}] = weight_concentration(pr.weights);
      report.concentration_accuracy[{in.name, m}] = 100.0 * pr.test_accuracy;
    }

    for (std::size_t m = 1; m <= modules; ++m) {
      auto it = in.decoders.find(m);
      if (it == in.decoders.end() || !it->second) {
        report.notes.push_back("decoder for " + in.name + " module " + std::to_string(m) +
                               " absent");
        continue;
      }
      auto rows = delta_table(model, *it->second, corpus, pairs);
      for (auto &r : rows) r.variant = in.name;
      report.delta.insert(report.delta.end(), rows.begin(), rows.end());

      const auto [a, b] = pairs.front();
      const auto z = encode_clips(model, {corpus.clips[a].samples, corpus.clips[b].samples}, m);
      for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const Tensor wave = decode(*it->second, interpolate(z[0], z[1], alpha));
        const std::string name = "interp_" + in.name + "-m" + std::to_string(m) + "-" +
                                 corpus.clips[a].id + "-" + corpus.clips[b].id + "_" +
                                 fmt(alpha, "%.2f") + ".wav";
        write_wav(out_dir / name, wave.data());
      }
    }
  }

  // accuracy.tsv
  {
    std::ofstream os(out_dir / "accuracy.tsv");
    os << "variant\tlayer\ttask\tbias\tseeds\tacc_mean\tacc_std\tchance\tvowel_gap_points\t"
          "gap_flag\n";
    for (const auto &r : report.accuracy) {
      std::string gap = "NA", flag = "NA";
      if (r.task == ProbeTask::syllable) {
        for (const auto &v : report.accuracy)
          if (v.variant == r.variant && v.layer == r.layer && v.task == ProbeTask::vowel) {
            const double points = v.mean - r.mean;
            gap = fmt(points, "%.2f");
            flag = points >= config.gap_points ? "vowel>>syllable" : "none";
            if (points >= config.gap_points && r.layer == "context")
              report.notes.push_back(r.variant + ": vowel accuracy exceeds syllable accuracy by " +
                                     gap + " points (sequence-global features)");
          }
      }
      os << r.variant << "\t" << r.layer << "\t" << task_name(r.task) << "\t"
         << (r.has_bias ? "yes" : "no") << "\t" << r.seeds << "\t" << fmt(r.mean, "%.2f") << "\t"
         << fmt(r.std, "%.2f") << "\t" << fmt(100.0 / task_classes(r.task), "%.2f") << "\t" << gap
         << "\t" << flag << "\n";
    }
  }
  for (std::size_t m = 1; m <= max_modules; ++m) {
    std::ofstream os(out_dir / ("concentration_module" + std::to_string(m) + ".tsv"));
    os << "variant\tprobe_accuracy\tnear_zero_fraction\tbin\tbin_lo\tbin_hi\tcount\n";
    for (const auto &[key, c] : report.concentration) {
      if (key.second != m) continue;
      for (std::size_t b = 0; b < c.histogram.size(); ++b)
        os << key.first << "\t" << fmt(report.concentration_accuracy[key], "%.2f") << "\t"
           << fmt(c.near_zero_fraction, "%.4f") << "\t" << b << "\t"
           << fmt(static_cast<double>(b) / kConcentrationBins, "%.2f") << "\t"
           << fmt(static_cast<double>(b + 1) / kConcentrationBins, "%.2f") << "\t"
           << c.histogram[b] << "\n";
    }
  }
  {
    std::ofstream os(out_dir / "delta.tsv");
    os << "module\tvariant\tN\tdelta_mean\tdelta_std\tpairs\tskipped\tabove_one\n";
    for (const auto &r : report.delta)
      os << r.module << "\t" << r.variant << "\t" << r.n << "\t" << fmt(r.delta, "%.4f") << "\t"
         << fmt(r.delta_std, "%.4f") << "\t" << r.pairs << "\t" << r.skipped << "\t"
         << r.above_one << "\n";
  }
  {
    std::ofstream os(out_dir / "notes.txt");
    for (const auto &n : report.notes) os << n << "\n";
  }
  return report;
}

}  // namespace sim
