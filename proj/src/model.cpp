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

#include "sim/model.hpp"

#include <cmath>
#include <stdexcept>

#include "sim/kernels.hpp"

namespace sim {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::sim: return "sim";
    case Variant::gim: return "gim";
    case Variant::cpc: return "cpc";
    case Variant::supervised: return "supervised";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "sim") return Variant::sim;
  if (s == "gim") return Variant::gim;
  if (s == "cpc") return Variant::cpc;
  if (s == "supervised") return Variant::supervised;
  throw std::invalid_argument("unknown variant '" + std::string(s) +
                              "' (expected sim|gim|cpc|supervised)");
}

std::vector<std::vector<ConvSpec>> default_module_specs() {
  return {{{10, 5, 2}, {8, 4, 2}}, {{4, 2, 2}, {4, 2, 2}}, {{4, 2, 1}}};
}

ModelConfig ModelConfig::reduced(Variant v, std::uint64_t seed) {
  ModelConfig c;
  c.variant = v;
  c.channels = 64;
  c.gru_dim = 64;
  c.seed = seed;
  return c;
}

std::size_t ModelConfig::downsampling() const {
  std::size_t f = 1;
  for (const auto &m : modules)
    for (const auto &c : m) f *= c.stride;
  return f;
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json mods = nlohmann::json::array();
  for (const auto &m : modules) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto &c : m) layers.push_back({c.kernel, c.stride, c.padding});
    mods.push_back(layers);
  }
  return {{"variant", std::string(variant_name(variant))},
          {"channels", channels},
          {"gru_dim", gru_dim},
          {"modules", mods},
          {"prediction_steps", prediction_steps},
          {"beta", beta},
          {"seed", seed},
          {"classes", classes}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json &j) {
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.channels = j.at("channels").get<std::size_t>();
  c.gru_dim = j.at("gru_dim").get<std::size_t>();
  c.modules.clear();
  for (const auto &m : j.at("modules")) {
    std::vector<ConvSpec> layers;
    for (const auto &l : m)
      layers.push_back({l.at(0).get<std::size_t>(), l.at(1).get<std::size_t>(),
                        l.at(2).get<std::size_t>()});
    c.modules.push_back(std::move(layers));
  }
  c.prediction_steps = j.at("prediction_steps").get<std::size_t>();
  c.beta = j.at("beta").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.classes = j.at("classes").get<std::size_t>();
  return c;
}

std::vector<std::size_t> frame_chain(const ModelConfig &config, std::size_t samples) {
  std::vector<std::size_t> out;
  std::size_t len = samples;
  for (const auto &m : config.modules) {
    for (const auto &c : m) {
      kernels::ConvGeometry g{1, 1, c.kernel, c.stride, c.padding, 0};
      len = g.conv_out_len(len);
    }
    out.push_back(len);
  }
  return out;
}

Tensor LatentFrames::frame_matrix(std::size_t b) const {
  const std::size_t t = frames(), d = dims();
  if (b >= batch()) throw std::out_of_range("frame_matrix: batch index out of range");
  const auto src = z.value().data().subspan(b * t * d, t * d);
  return Tensor({t, d}, std::vector<float>(src.begin(), src.end()));
}

LatentFrames waveform_frames(const Tensor &waveforms) {
  if (waveforms.rank() != 3 || waveforms.shape()[1] != 1)
    throw ShapeError("waveforms must be [B x 1 x L], got " + shape_string(waveforms.shape()));
  LatentFrames f;
  f.z = Var::constant(waveforms.reshaped({waveforms.shape()[0], waveforms.shape()[2], 1}));
  f.module = 0;
  return f;
}

namespace {

Tensor uniform_init(const std::string &id, const Shape &shape, double bound, std::uint64_t seed) {
  RngStream rng = RngStream::named(seed, "init").derive(id);
  Tensor t(shape);
  for (auto &v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

ConvLayer make_conv(const std::string &id, std::size_t cin, std::size_t cout, ConvSpec spec,
                    std::uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin * spec.kernel));
  return {make_parameter(id + ".weight", uniform_init(id + ".weight", {cout, cin, spec.kernel},
                                                      bound, seed)),
          make_parameter(id + ".bias", Tensor({cout}, 0.0f)), spec};
}

std::vector<Parameter> make_scores(const std::string &prefix, std::size_t k, std::size_t rows,
                                   std::size_t cols, std::uint64_t seed) {
  std::vector<Parameter> out;
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  for (std::size_t i = 1; i <= k; ++i) {
    const std::string id = prefix + ".score" + std::to_string(i);
    out.push_back(make_parameter(id, uniform_init(id, {rows, cols}, bound, seed)));
  }
  return out;
}

void push(std::vector<Parameter *> &out, ConvLayer &c) {
  out.push_back(&c.weight);
  out.push_back(&c.bias);
}

Var conv(const Var &x, const ConvLayer &layer) {
  return ops::conv1d(x, layer.weight.var, layer.bias.var, layer.spec.stride, layer.spec.padding);
}

}  // namespace

Model::Model(ModelConfig config) : config_(std::move(config)) {
  if (config_.modules.empty()) throw std::invalid_argument("model needs at least one module");
  if (config_.channels == 0 || config_.gru_dim == 0)
    throw std::invalid_argument("model channels and gru_dim must be positive");
  const std::uint64_t seed = config_.seed;
  const std::size_t c = config_.channels;
  const bool greedy = config_.variant == Variant::sim || config_.variant == Variant::gim;
  for (std::size_t m = 0; m < config_.modules.size(); ++m) {
    const std::string prefix = "module" + std::to_string(m + 1);
    EncoderModule mod;
    std::size_t cin = m == 0 ? 1 : c;
    for (std::size_t i = 0; i < config_.modules[m].size(); ++i) {
      mod.convs.push_back(make_conv(prefix + ".conv" + std::to_string(i), cin, c,
                                    config_.modules[m][i], seed));
      cin = c;
    }
    if (config_.stochastic()) {
      mod.mu_head = make_conv(prefix + ".mu", c, c, {1, 1, 0}, seed);
      mod.logvar_head = make_conv(prefix + ".logvar", c, c, {1, 1, 0}, seed);
      mod.has_logvar = true;
    } else {
      mod.mu_head = make_conv(prefix + ".head", c, c, {1, 1, 0}, seed);
    }
    if (greedy) mod.score = make_scores(prefix, config_.prediction_steps, c, c, seed);
    modules_.push_back(std::move(mod));
  }
  const std::size_t h = config_.gru_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  ar_.w_ih = make_parameter("ar.w_ih", uniform_init("ar.w_ih", {3 * h, c}, bound, seed));
  ar_.w_hh = make_parameter("ar.w_hh", uniform_init("ar.w_hh", {3 * h, h}, bound, seed));
  ar_.b_ih = make_parameter("ar.b_ih", Tensor({3 * h}, 0.0f));
  ar_.b_hh = make_parameter("ar.b_hh", Tensor({3 * h}, 0.0f));
  if (config_.variant != Variant::supervised)
    ar_.score = make_scores("ar", config_.prediction_steps, c, h, seed);
  if (config_.variant == Variant::supervised) {
    const double hb = 1.0 / std::sqrt(static_cast<double>(h));
    head_w_ = make_parameter("classifier.weight",
                             uniform_init("classifier.weight", {config_.classes, h}, hb, seed));
    head_b_ = make_parameter("classifier.bias", Tensor({config_.classes}, 0.0f));
  }
}

Model Model::clone() const {
  Model copy(config_);
  auto dst = copy.parameters();
  auto src = parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value() = src[i]->value();
  return copy;
}

std::vector<Parameter *> Model::module_parameters(std::size_t m) {
  std::vector<Parameter *> out;
  if (m < modules_.size()) {
    auto &mod = modules_[m];
    for (auto &c : mod.convs) push(out, c);
    push(out, mod.mu_head);
    if (mod.has_logvar) push(out, mod.logvar_head);
    for (auto &s : mod.score) out.push_back(&s);
  } else if (m == modules_.size()) {
    out.insert(out.end(), {&ar_.w_ih, &ar_.w_hh, &ar_.b_ih, &ar_.b_hh});
    for (auto &s : ar_.score) out.push_back(&s);
    if (head_w_.var.valid()) out.insert(out.end(), {&head_w_, &head_b_});
  } else {
    throw std::out_of_range("module index " + std::to_string(m) + " out of range");
  }
  return out;
}

std::vector<Parameter *> Model::parameters() {
  std::vector<Parameter *> out;
  for (std::size_t m = 0; m <= modules_.size(); ++m) {
    auto part = module_parameters(m);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<const Parameter *> Model::parameters() const {
  auto all = const_cast<Model *>(this)->parameters();
  return {all.begin(), all.end()};
}

std::vector<std::vector<Parameter *>> Model::parameter_groups() {
  if (config_.variant == Variant::cpc || config_.variant == Variant::supervised)
    return {parameters()};
  std::vector<std::vector<Parameter *>> groups;
  for (std::size_t m = 0; m <= modules_.size(); ++m) groups.push_back(module_parameters(m));
  return groups;
}

Parameter *Model::find(const std::string &id) {
  for (auto *p : parameters())
    if (p->id == id) return p;
  return nullptr;
}

LatentFrames encode_module(const Model &model, std::size_t m, const LatentFrames &input,
                           EncodeMode mode, RngStream *rng, std::vector<LayerTrace> *trace) {
  if (m == 0 || m > model.modules().size())
    throw std::out_of_range("encode_module: module " + std::to_string(m) + " does not exist");
  const EncoderModule &mod = model.modules()[m - 1];
  const std::size_t expected = mod.convs.front().weight.value().shape()[1];
  if (input.z.value().rank() != 3 || input.dims() != expected)
    throw ShapeError("encode_module " + std::to_string(m) + ": input frames " +
                     shape_string(input.z.shape()) + " do not have " + std::to_string(expected) +
                     " dims");
  const std::string prefix = "module" + std::to_string(m);
  Var x = ops::transpose12(input.z);
  for (std::size_t i = 0; i < mod.convs.size(); ++i) {
    x = ops::relu(conv(x, mod.convs[i]));
    if (trace)
      trace->push_back({prefix + ".conv" + std::to_string(i), x.shape()[2], x.shape()[1]});
  }
  Var mu = conv(x, mod.mu_head);
  LatentFrames out;
  out.module = m;
  if (!mod.has_logvar) {
    if (trace) trace->push_back({prefix + ".head", mu.shape()[2], mu.shape()[1]});
    out.z = ops::transpose12(mu);
    out.z.value().check_finite(prefix + " output");
    return out;
  }
  Var logvar = conv(x, mod.logvar_head);
  Var sigma = ops::exp(ops::scale(logvar, 0.5f));
  for (float s : sigma.value().data())
    if (!std::isfinite(s) || s <= 0.0f)
      throw NumericError(prefix + ": posterior sigma is " + std::to_string(s) +
                         " (must be finite and > 0)");
  if (trace) {
    trace->push_back({prefix + ".mu", mu.shape()[2], mu.shape()[1]});
    trace->push_back({prefix + ".sigma", sigma.shape()[2], sigma.shape()[1]});
  }
  out.mu = ops::transpose12(mu);
  out.sigma = ops::transpose12(sigma);
  if (mode == EncodeMode::mean) {
    out.z = out.mu;
  } else {
    if (!rng) throw std::invalid_argument("encode_module: sample mode needs an rng stream");
    Tensor eps(sigma.shape());
    for (auto &e : eps.data()) e = static_cast<float>(rng->normal());
    out.z = ops::transpose12(ops::add(mu, ops::mul(sigma, Var::constant(std::move(eps)))));
  }
  out.mu.value().check_finite(prefix + " mean");
  return out;
}

Var run_ar(const Model &model, const Var &latents) { return ops::gru(latents, model.ar().weights()); }

ForwardResult forward_full(const Model &model, const Tensor &waveforms, EncodeMode mode,
                           RngStream *rng, bool detach_between_modules,
                           std::vector<LayerTrace> *trace) {
  const std::size_t factor = model.config().downsampling();
  if (waveforms.rank() != 3 || waveforms.shape()[2] < factor)
    throw std::invalid_argument("forward_full: input " + shape_string(waveforms.shape()) +
                                " is shorter than one output frame (" +
                                std::to_string(factor) + " samples)");
  ForwardResult result;
  LatentFrames current = waveform_frames(waveforms);
  for (std::size_t m = 1; m <= model.modules().size(); ++m) {
    LatentFrames in = current;
    if (detach_between_modules) in.z = detach(in.z);
    current = encode_module(model, m, in, mode, rng, trace);
    result.modules.push_back(current);
  }
  const Var ar_in = detach_between_modules ? detach(current.z) : current.z;
  result.context = run_ar(model, ar_in);
  if (trace)
    trace->push_back({"ar.gru", result.context.shape()[1], result.context.shape()[2]});
  return result;
}

std::vector<Tensor> snapshot(const Model &model) {
  std::vector<Tensor> out;
  for (const auto *p : model.parameters()) out.push_back(p->value());
  return out;
}

}  // namespace sim
