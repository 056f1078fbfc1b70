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

#include "sim/service.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <stdexcept>

#include "httplib.h"

#include "sim/checkpoint.hpp"
#include "sim/probes.hpp"
#include "sim/wav.hpp"

namespace sim {

namespace {

using nlohmann::json;

struct HttpError {
  int status;
  std::string code;
  std::string message;
  json detail = json::object();
};

void send_error(httplib::Response &res, const HttpError &e) {
  res.status = e.status;
  res.set_content(json{{"code", e.code}, {"message", e.message}, {"detail", e.detail}}.dump(),
                  "application/json");
}

json parse_body(const httplib::Request &req) {
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw HttpError{400, "bad_request", "request body must be a JSON object"};
    return j;
  } catch (const json::parse_error &e) {
    throw HttpError{400, "bad_request", "request body is not valid JSON", {{"parser", e.what()}}};
  }
}

template <class T>
T field(const json &body, const char *name) {
  if (!body.contains(name))
    throw HttpError{400, "missing_field", std::string("missing field '") + name + "'",
                    {{"field", name}}};
  try {
    return body.at(name).get<T>();
  } catch (const json::exception &) {
    throw HttpError{400, "bad_field", std::string("field '") + name + "' has the wrong type",
                    {{"field", name}}};
  }
}

std::size_t layer_field(const json &body, std::size_t modules) {
  if (!body.contains("layer"))
    throw HttpError{400, "missing_field", "missing field 'layer'", {{"field", "layer"}}};
  const json &l = body["layer"];
  std::size_t layer = 0;
  if (l.is_number_unsigned())
    layer = l.get<std::size_t>();
  else if (l.is_string())
    try {
      layer = parse_layer(l.get<std::string>());
    } catch (const std::invalid_argument &) {
      layer = modules + 1;
    }
  else
    layer = modules + 1;
  if (layer == kContextLayer || layer > modules)
    throw HttpError{422, "bad_layer",
                    "layer must be an encoder module in [1, " + std::to_string(modules) + "]",
                    {{"layer", l}}};
  return layer;
}

json tensor_rows(const Tensor &t) {
  json rows = json::array();
  for (std::size_t i = 0; i < t.shape()[0]; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < t.shape()[1]; ++j) row.push_back(t.at(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

void send_wav(httplib::Response &res, const Tensor &wave, std::size_t layer,
              const json *metadata = nullptr) {
  const auto bytes = encode_wav(wave.data());
  res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
  res.set_header("X-Latent-Layer", std::to_string(layer));
  if (metadata) res.set_header("X-Metadata", metadata->dump());
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request &req, httplib::Response &res) {
    try {
      f(req, res);
    } catch (const HttpError &e) {
      send_error(res, e);
    } catch (const ShapeError &e) {
      send_error(res, {422, "shape_mismatch", e.what()});
    } catch (const std::exception &e) {
      send_error(res, {500, "internal", e.what()});
    }
  };
}

}  // namespace

InspectService::InspectService(Model model, std::vector<Decoder> decoders, Corpus corpus,
                               std::filesystem::path data_dir)
    : model_(std::move(model)), corpus_(std::move(corpus)), data_dir_(std::move(data_dir)) {
  if (decoders.empty()) throw std::invalid_argument("inspect service needs at least one decoder");
  for (auto &d : decoders) {
    if (!(d.config().channels == model_.config().channels &&
          d.config().modules == model_.config().modules))
      throw std::invalid_argument("decoder for module " + std::to_string(d.module_index()) +
                                  " was built for a different architecture");
    const std::size_t m = d.module_index();
    decoders_.emplace(m, std::move(d));
  }
  for (std::size_t i = 0; i < corpus_.clips.size(); ++i) clip_by_id_[corpus_.clips[i].id] = i;
}

std::unique_ptr<InspectService> InspectService::open(
    const std::filesystem::path &checkpoint, const std::vector<std::filesystem::path> &decoders,
    const std::filesystem::path &data_dir) {
  Model model = load_checkpoint(checkpoint);
  std::vector<Decoder> decs;
  for (const auto &p : decoders) decs.push_back(load_decoder(p));
  return std::make_unique<InspectService>(std::move(model), std::move(decs),
                                          read_corpus(data_dir), data_dir);
}

const Decoder *InspectService::decoder(std::size_t layer) const {
  auto it = decoders_.find(layer);
  return it == decoders_.end() ? nullptr : &it->second;
}

std::size_t InspectService::clip_index(const std::string &id) const {
  auto it = clip_by_id_.find(id);
  if (it == clip_by_id_.end())
    throw HttpError{404, "unknown_clip", "no clip with id '" + id + "'", {{"clip_id", id}}};
  return it->second;
}

Tensor InspectService::latent(const std::string &clip_id, std::size_t layer) {
  const std::size_t idx = clip_index(clip_id);
  {
    std::shared_lock lock(cache_mutex_);
    auto it = latent_cache_.find({idx, layer});
    if (it != latent_cache_.end()) return it->second;
  }
  Tensor z = encode_clips(model_, {corpus_.clips[idx].samples}, layer).front();
  std::unique_lock lock(cache_mutex_);
  latent_cache_.emplace(std::make_pair(idx, layer), z);
  return z;
}

std::vector<std::size_t> InspectService::importance_hint(std::size_t layer) {
  {
    std::shared_lock lock(cache_mutex_);
    auto it = hint_cache_.find(layer);
    if (it != hint_cache_.end()) return it->second;
  }
  std::vector<Tensor> waves;
  for (const auto &c : corpus_.clips) waves.push_back(c.samples);
  const auto latents = encode_clips(model_, waves, layer);
  const std::size_t d = latents.front().shape()[1];
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  double count = 0.0;
  for (const auto &z : latents)
    for (std::size_t t = 0; t < z.shape()[0]; ++t, count += 1.0)
      for (std::size_t j = 0; j < d; ++j) {
        sum[j] += z.at(t, j);
        sq[j] += static_cast<double>(z.at(t, j)) * z.at(t, j);
      }
  std::vector<double> var(d);
  for (std::size_t j = 0; j < d; ++j) var[j] = sq[j] / count - (sum[j] / count) * (sum[j] / count);
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return var[a] > var[b]; });
  order.resize(std::min(d, kImportanceHint));
  std::unique_lock lock(cache_mutex_);
  hint_cache_.emplace(layer, order);
  return order;
}

void InspectService::register_routes(httplib::Server &server) {
  const std::size_t modules = model_.modules().size();

  auto need_decoder = [this](std::size_t layer) -> const Decoder & {
    const Decoder *d = decoder(layer);
    if (!d)
      throw HttpError{404, "no_decoder", "no decoder loaded for layer " + std::to_string(layer),
                      {{"layer", layer}}};
    return *d;
  };

  server.Get("/health", guarded([](const httplib::Request &, httplib::Response &res) {
               res.set_content(json{{"status", "ok"}}.dump(), "application/json");
             }));

  server.Get("/clips", guarded([this](const httplib::Request &, httplib::Response &res) {
               json out = json::array();
               for (const auto &c : corpus_.clips) {
                 json vowels = json::array();
                 for (int v : c.vowels()) vowels.push_back(std::string(1, kVowels[v]));
                 out.push_back({{"id", c.id},
                                {"word", c.word()},
                                {"vowels", vowels},
                                {"split", std::string(split_name(c.split))}});
               }
               res.set_content(out.dump(), "application/json");
             }));

  server.Post("/encode", guarded([this, modules](const httplib::Request &req,
                                                 httplib::Response &res) {
                const json body = parse_body(req);
                const auto clip = field<std::string>(body, "clip_id");
                const std::size_t layer = layer_field(body, modules);
                const Tensor mu = latent(clip, layer);
                json out{{"clip_id", clip},
                         {"layer", layer},
                         {"frames", mu.shape()[0]},
                         {"dims", mu.shape()[1]},
                         {"mu", tensor_rows(mu)},
                         {"importance_hint", importance_hint(layer)}};
                if (req.has_param("sample")) {
                  std::uint64_t seed = 0;
                  try {
                    seed = std::stoull(req.get_param_value("sample"));
                  } catch (const std::exception &) {
                    throw HttpError{400, "bad_query", "sample must be an unsigned integer seed"};
                  }
                  NoGradGuard no_grad;
                  RngStream rng = RngStream::named(seed, "serve-sample");
                  const Tensor &wave = corpus_.clips[clip_index(clip)].samples;
                  ForwardResult fr = forward_full(
                      model_, wave.reshaped({1, 1, wave.numel()}), EncodeMode::sample, &rng);
                  const Tensor &z = fr.modules[layer - 1].z.value();
                  out["z"] = tensor_rows(z.reshaped({z.shape()[1], z.shape()[2]}));
                  out["sample_seed"] = seed;
                }
                res.set_content(out.dump(), "application/json");
              }));

  server.Post("/decode", guarded([this, modules, need_decoder](const httplib::Request &req,
                                                               httplib::Response &res) {
                const json body = parse_body(req);
                const std::size_t layer = layer_field(body, modules);
                const Decoder &dec = need_decoder(layer);
                if (!body.contains("latent") || !body["latent"].is_array())
                  throw HttpError{400, "missing_field", "missing array field 'latent'",
                                  {{"field", "latent"}}};
                const json &rows = body["latent"];
                const std::size_t t = dec.frames(), d = dec.config().channels;
                json expected = {t, d};
                std::size_t width = rows.empty() || !rows[0].is_array() ? 0 : rows[0].size();
                bool ragged = false;
                for (const auto &r : rows)
                  if (!r.is_array() || r.size() != width) ragged = true;
                if (ragged || rows.size() != t || width != d)
                  throw HttpError{422, "shape_mismatch",
                                  "latent shape does not match the layer " +
                                      std::to_string(layer) + " decoder",
                                  {{"expected", expected},
                                   {"got", ragged ? json("ragged")
                                                  : json{rows.size(), width}}}};
                Tensor z({t, d});
                for (std::size_t i = 0; i < t; ++i)
                  for (std::size_t j = 0; j < d; ++j) {
                    if (!rows[i][j].is_number())
                      throw HttpError{422, "bad_value", "latent entries must be numbers",
                                      {{"row", i}, {"col", j}}};
                    z.at(i, j) = rows[i][j].get<float>();
                  }
                NoGradGuard no_grad;
                send_wav(res, decode(dec, z), layer);
              }));

  server.Post("/interpolate", guarded([this, modules, need_decoder](const httplib::Request &req,
                                                                    httplib::Response &res) {
                const json body = parse_body(req);
                const std::size_t layer = layer_field(body, modules);
                const Decoder &dec = need_decoder(layer);
                const double alpha = field<double>(body, "alpha");
                if (!(alpha >= 0.0 && alpha <= 1.0))
                  throw HttpError{422, "bad_alpha", "alpha must lie in [0, 1]", {{"alpha", alpha}}};
                const Tensor za = latent(field<std::string>(body, "clip_a"), layer);
                const Tensor zb = latent(field<std::string>(body, "clip_b"), layer);
                const std::size_t t = za.shape()[0], d = za.shape()[1];
                std::vector<double> diff(d, 0.0);
                for (std::size_t i = 0; i < t; ++i)
                  for (std::size_t j = 0; j < d; ++j)
                    diff[j] += std::fabs(static_cast<double>(za.at(i, j)) - zb.at(i, j)) /
                               static_cast<double>(t);
                const auto ranking = rank_importance(za, zb);
                json preview = json::array();
                for (std::size_t r = 0; r < std::min(d, kImportanceHint); ++r)
                  preview.push_back({{"dim", ranking[r]}, {"mean_abs_diff", diff[ranking[r]]}});
                NoGradGuard no_grad;
                const json meta{{"alpha", alpha}, {"delta_preview", preview}};
                send_wav(res, decode(dec, interpolate(za, zb, alpha)), layer, &meta);
              }));

  server.Post("/traverse", guarded([this, modules, need_decoder](const httplib::Request &req,
                                                                 httplib::Response &res) {
                const json body = parse_body(req);
                const std::size_t layer = layer_field(body, modules);
                const Decoder &dec = need_decoder(layer);
                Tensor z = latent(field<std::string>(body, "clip_id"), layer);
                const std::size_t d = z.shape()[1];
                const json edits = body.value("edits", json::array());
                if (!edits.is_array())
                  throw HttpError{400, "bad_field", "edits must be an array", {{"field", "edits"}}};
                for (const auto &e : edits) {
                  if (!e.is_object() || !e.contains("dim") || !e.contains("value") ||
                      !e["dim"].is_number_integer() || !e["value"].is_number())
                    throw HttpError{400, "bad_field", "each edit needs integer dim and numeric value",
                                    {{"edit", e}}};
                  const auto dim = e["dim"].get<long long>();
                  if (dim < 0 || static_cast<std::size_t>(dim) >= d)
                    throw HttpError{422, "bad_dim",
                                    "dim " + std::to_string(dim) + " outside [0, " +
                                        std::to_string(d) + ")",
                                    {{"dim", dim}, {"dims", d}}};
                  const float v = e["value"].get<float>();
                  for (std::size_t t = 0; t < z.shape()[0]; ++t)
                    z.at(t, static_cast<std::size_t>(dim)) = v;
                }
                NoGradGuard no_grad;
                send_wav(res, decode(dec, z), layer);
              }));

  server.Post("/partial_swap", guarded([this, modules, need_decoder](const httplib::Request &req,
                                                                     httplib::Response &res) {
                const json body = parse_body(req);
                const std::size_t layer = layer_field(body, modules);
                const Decoder &dec = need_decoder(layer);
                const Tensor za = latent(field<std::string>(body, "clip_a"), layer);
                const Tensor zb = latent(field<std::string>(body, "clip_b"), layer);
                const auto n = field<long long>(body, "n");
                const std::size_t d = za.shape()[1];
                if (n < 0 || static_cast<std::size_t>(n) > d)
                  throw HttpError{422, "bad_n", "n must lie in [0, " + std::to_string(d) + "]",
                                  {{"n", n}}};
                NoGradGuard no_grad;
                const auto ranking = rank_importance(za, zb);
                const Tensor swapped = partial_swap(za, zb, ranking, static_cast<std::size_t>(n));
                const Tensor xa = decode(dec, swapped);
                const auto r = relative_error(decode(dec, za), decode(dec, zb), xa);
                json top = json::array();
                for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) top.push_back(ranking[i]);
                const json meta{{"n", n},
                                {"delta", r ? json(*r) : json(nullptr)},
                                {"swapped_dims", top}};
                send_wav(res, xa, layer, &meta);
              }));

  server.Get(R"(/audio/([A-Za-z0-9_\-]+))",
             guarded([this](const httplib::Request &req, httplib::Response &res) {
               const std::string id = req.matches[1];
               const Clip &clip = corpus_.clips[clip_index(id)];
               std::ifstream in(data_dir_ / clip.filename(), std::ios::binary);
               if (!in)
                 throw HttpError{404, "missing_audio", "audio file for '" + id + "' is missing",
                                 {{"clip_id", id}}};
               std::string bytes((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
               res.set_content(bytes, "audio/wav");
             }));
}

std::pair<std::string, int> parse_bind(const std::string &bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == bind.size())
    throw std::invalid_argument("bind address must be host:port, got '" + bind + "'");
  int port = 0;
  try {
    std::size_t pos = 0;
    port = std::stoi(bind.substr(colon + 1), &pos);
    if (pos != bind.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception &) {
    throw std::invalid_argument("bad port in bind address '" + bind + "'");
  }
  if (port < 0 || port > 65535) throw std::invalid_argument("port out of range in '" + bind + "'");
  return {bind.substr(0, colon), port};
}

void serve(InspectService &service, const std::string &bind_addr,
           const std::function<void(httplib::Server &, int)> &on_ready) {
  const auto [host, port] = parse_bind(bind_addr);
  httplib::Server server;
  service.register_routes(server);
  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
  } else if (!server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + bind_addr + " (port busy?)");
  }
  if (on_ready) on_ready(server, bound);
  server.listen_after_bind();
}

}  // namespace sim
