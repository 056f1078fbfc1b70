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

// Read-only HTTP inspection service over a trained model and its decoders.
//
//   GET  /health                 {"status":"ok"}
//   GET  /clips                  [{id, word, vowels, split}]
//   POST /encode                 {clip_id, layer} [?sample=seed]
//   POST /decode                 {layer, latent: [[...]]}          -> audio/wav
//   POST /interpolate            {clip_a, clip_b, layer, alpha}    -> audio/wav
//   POST /traverse               {clip_id, layer, edits: [{dim, value}]} -> audio/wav
//   POST /partial_swap           {clip_a, clip_b, layer, n}        -> audio/wav
//   GET  /audio/{clip_id}        original clip bytes
//
// WAV responses carry X-Latent-Layer; /interpolate and /partial_swap add an
// X-Metadata header with a JSON object. Errors are {code, message, detail}.

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "sim/decoder.hpp"
#include "sim/model.hpp"
#include "sim/syllabgen.hpp"

namespace httplib {
class Server;
}

namespace sim {

inline constexpr std::size_t kImportanceHint = 32;

class InspectService {
 public:
  InspectService(Model model, std::vector<Decoder> decoders, Corpus corpus,
                 std::filesystem::path data_dir);

  /// Loads a checkpoint, decoders and a corpus directory. Throws when the
  /// checkpoint is corrupt or no decoder loads.
  static std::unique_ptr<InspectService> open(const std::filesystem::path &checkpoint,
                                              const std::vector<std::filesystem::path> &decoders,
                                              const std::filesystem::path &data_dir);

  void register_routes(httplib::Server &server);

  const Model &model() const { return model_; }
  const Corpus &corpus() const { return corpus_; }
  const Decoder *decoder(std::size_t layer) const;

  /// Mean-mode latent [T, D] of a clip at a layer (cached, write-once).
  Tensor latent(const std::string &clip_id, std::size_t layer);
  /// Top dims by variance over every frame of every clip at a layer.
  std::vector<std::size_t> importance_hint(std::size_t layer);

 private:
  std::size_t clip_index(const std::string &id) const;

  Model model_;
  std::map<std::size_t, Decoder> decoders_;
  Corpus corpus_;
  std::filesystem::path data_dir_;
  std::map<std::string, std::size_t> clip_by_id_;

  std::shared_mutex cache_mutex_;
  std::map<std::pair<std::size_t, std::size_t>, Tensor> latent_cache_;
  std::map<std::size_t, std::vector<std::size_t>> hint_cache_;
};

/// Splits "host:port". Throws std::invalid_argument on a malformed address.
std::pair<std::string, int> parse_bind(const std::string &bind);

/// Blocks serving `service` on bind_addr until stop() is called on the
/// server. `on_ready` receives the bound port. Throws if the port is busy.
void serve(InspectService &service, const std::string &bind_addr,
           const std::function<void(httplib::Server &, int)> &on_ready = {});

}  // namespace sim
