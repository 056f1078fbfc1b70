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

#include "sim/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sim {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in host order");

namespace {

constexpr char kMagic[8] = {'S', 'I', 'M', 'C', 'K', 'P', 'T', '1'};

std::vector<std::size_t> shape_from_json(const nlohmann::json &j) {
  std::vector<std::size_t> s;
  for (const auto &d : j) s.push_back(d.get<std::size_t>());
  return s;
}

template <class P>
void check_against(const std::map<std::string, Tensor> &tensors, const std::vector<P *> &params) {
  if (tensors.size() != params.size())
    throw CheckpointError("checkpoint holds " + std::to_string(tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  for (auto *p : params) {
    auto it = tensors.find(p->id);
    if (it == tensors.end()) throw CheckpointError("checkpoint is missing tensor " + p->id);
    if (it->second.shape() != p->value().shape())
      throw CheckpointError("shape mismatch for tensor " + p->id + ": file has " +
                            shape_string(it->second.shape()) + ", config implies " +
                            shape_string(p->value().shape()));
  }
}

TensorFile decode_kind(std::span<const std::uint8_t> bytes, const char *kind) {
  TensorFile file = decode_tensor_file(bytes);
  const auto &h = file.header;
  if (!h.contains("format_version") || h["format_version"] != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint format_version " +
                          (h.contains("format_version") ? h["format_version"].dump() : "<none>"));
  if (h.value("kind", "") != kind)
    throw CheckpointError(std::string("expected a ") + kind + " checkpoint, got '" +
                          h.value("kind", "") + "'");
  return file;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor_file(const TensorFile &file) {
  nlohmann::json header = file.header;
  nlohmann::json index = nlohmann::json::object();
  std::size_t offset = 0;
  for (const auto &[name, t] : file.tensors) {
    index[name] = {{"dtype", "f32"}, {"shape", t.shape()}, {"offset", offset}};
    offset += t.numel() * sizeof(float);
  }
  header["tensors"] = index;
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(sizeof kMagic + 8 + text.size() + offset);
  std::memcpy(out.data(), kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  std::memcpy(out.data() + 8, &len, 8);
  std::memcpy(out.data() + 16, text.data(), text.size());
  std::uint8_t *payload = out.data() + 16 + text.size();
  for (const auto &[name, t] : file.tensors) {
    std::memcpy(payload, t.ptr(), t.numel() * sizeof(float));
    payload += t.numel() * sizeof(float);
  }
  return out;
}

TensorFile decode_tensor_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError("not a checkpoint file (bad magic)");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  if (len > bytes.size() - 16) throw CheckpointError("corrupt checkpoint: truncated header");
  TensorFile file;
  try {
    file.header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + len);
  } catch (const nlohmann::json::exception &e) {
    throw CheckpointError(std::string("corrupt checkpoint: header is not JSON (") + e.what() +
                          ")");
  }
  const auto payload = bytes.subspan(16 + len);
  if (!file.header.contains("tensors") || !file.header["tensors"].is_object())
    throw CheckpointError("corrupt checkpoint: no tensor index");
  std::size_t expected = 0;
  for (const auto &[name, entry] : file.header["tensors"].items()) {
    if (entry.value("dtype", "") != "f32")
      throw CheckpointError("tensor " + name + " has unsupported dtype " + entry["dtype"].dump());
    const Shape shape = shape_from_json(entry.at("shape"));
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t nbytes = shape_numel(shape) * sizeof(float);
    if (offset + nbytes > payload.size())
      throw CheckpointError("corrupt checkpoint: tensor " + name + " is truncated");
    Tensor t(shape);
    std::memcpy(t.ptr(), payload.data() + offset, nbytes);
    file.tensors.emplace(name, std::move(t));
    expected += nbytes;
  }
  if (expected != payload.size())
    throw CheckpointError("corrupt checkpoint: payload is " + std::to_string(payload.size()) +
                          " bytes, index describes " + std::to_string(expected));
  file.header.erase("tensors");
  return file;
}

std::vector<std::uint8_t> serialize_model(const Model &model) {
  TensorFile file;
  file.header = {{"format_version", kCheckpointVersion},
                 {"kind", "model"},
                 {"model_config", model.config().to_json()}};
  for (const auto *p : model.parameters()) file.tensors.emplace(p->id, p->value());
  return encode_tensor_file(file);
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
  TensorFile file = decode_kind(bytes, "model");
  Model model(ModelConfig::from_json(file.header.at("model_config")));
  auto params = model.parameters();
  check_against(file.tensors, params);
  for (auto *p : params) p->value() = file.tensors.at(p->id);
  return model;
}

void save_checkpoint(const Model &model, const std::filesystem::path &path) {
  write_file(path, serialize_model(model));
}

Model load_checkpoint(const std::filesystem::path &path) {
  return deserialize_model(read_file(path));
}

void save_decoder(const Decoder &decoder, const std::filesystem::path &path) {
  TensorFile file;
  file.header = {{"format_version", kCheckpointVersion},
                 {"kind", "decoder"},
                 {"model_config", decoder.config().to_json()},
                 {"module_index", decoder.module_index()}};
  for (const auto *p : decoder.parameters()) file.tensors.emplace(p->id, p->value());
  write_file(path, encode_tensor_file(file));
}

Decoder load_decoder(const std::filesystem::path &path) {
  TensorFile file = decode_kind(read_file(path), "decoder");
  Decoder decoder = build_mirror_decoder(ModelConfig::from_json(file.header.at("model_config")),
                                         file.header.at("module_index").get<std::size_t>());
  auto params = decoder.parameters();
  check_against(file.tensors, params);
  for (auto *p : params) p->value() = file.tensors.at(p->id);
  return decoder;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path &path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace sim
