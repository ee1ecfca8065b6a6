// Copyright 2026 The prefalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prefalign/lm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace prefalign::lm {

namespace {

using json = nlohmann::ordered_json;
using Kind = CheckpointError::Kind;

constexpr char kMagic[4] = {'P', 'R', 'F', 'A'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

json config_to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size},         {"embed_dim", c.embed_dim},
              {"num_layers", c.num_layers},         {"num_heads", c.num_heads},
              {"context_length", c.context_length}, {"feedforward_dim", c.feedforward_dim},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.context_length = j.at("context_length").get<std::size_t>();
  c.feedforward_dim = j.at("feedforward_dim").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string encode_checkpoint(const ModelParams& params, const std::optional<Vocabulary>& vocab) {
  json meta;
  meta["format"] = "prefalign-checkpoint";
  meta["config"] = config_to_json(params.config);
  json blocks = json::array();
  for (const auto& b : params.weights.blocks()) {
    blocks.push_back({{"name", b.name}, {"rows", b.value.rows}, {"cols", b.value.cols}});
  }
  meta["blocks"] = std::move(blocks);
  if (vocab) {
    meta["vocabulary"] = {{"scheme", std::string(to_string(vocab->scheme()))},
                          {"tokens", vocab->tokens()}};
  }
  const std::string meta_text = meta.dump();

  std::string out(kMagic, sizeof(kMagic));
  out.push_back(static_cast<char>(kCheckpointVersion));
  put_u64(out, meta_text.size());
  out += meta_text;
  out.reserve(out.size() + 8 * params.weights.num_scalars());
  for (const auto& b : params.weights.blocks()) {
    for (double v : b.value.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(Kind::kBadMagic, "checkpoint: bad magic (expected \"PRFA\")");
  }
  if (bytes.size() < 5) throw CheckpointError(Kind::kTruncated, "checkpoint: truncated header");
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::kVersionMismatch,
                          "checkpoint: unsupported format version " + std::to_string(version) +
                              " (this build reads version " +
                              std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < 13) throw CheckpointError(Kind::kTruncated, "checkpoint: truncated header");
  const std::uint64_t meta_len = get_u64(bytes, 5);
  if (meta_len > bytes.size() - 13) {
    throw CheckpointError(Kind::kTruncated, "checkpoint: truncated metadata block");
  }
  const json meta = json::parse(bytes.begin() + 13,
                                bytes.begin() + 13 + static_cast<std::ptrdiff_t>(meta_len),
                                nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) {
    throw CheckpointError(Kind::kMalformed, "checkpoint: metadata is not a JSON object");
  }

  Checkpoint ck;
  std::vector<BlockShape> shapes;
  try {
    ck.params.config = config_from_json(meta.at("config"));
    for (const auto& b : meta.at("blocks")) {
      shapes.push_back({b.at("name").get<std::string>(), b.at("rows").get<std::size_t>(),
                        b.at("cols").get<std::size_t>()});
    }
    if (meta.contains("vocabulary")) {
      const auto& v = meta.at("vocabulary");
      ck.vocab.emplace(parse_token_scheme(v.at("scheme").get<std::string>()),
                       v.at("tokens").get<std::vector<std::string>>());
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::kMalformed, std::string("checkpoint: bad metadata: ") + e.what());
  }

  try {
    ck.params.config.validate();
  } catch (const Error& e) {
    throw CheckpointError(Kind::kShapeMismatch, std::string("checkpoint: ") + e.what());
  }
  const auto expected = parameter_layout(ck.params.config);
  if (expected.size() != shapes.size()) {
    throw CheckpointError(Kind::kShapeMismatch,
                          "checkpoint: " + std::to_string(shapes.size()) +
                              " blocks recorded but the config implies " +
                              std::to_string(expected.size()));
  }
  std::uint64_t scalars = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].name != expected[i].name || shapes[i].rows != expected[i].rows ||
        shapes[i].cols != expected[i].cols) {
      throw CheckpointError(Kind::kShapeMismatch,
                            "checkpoint: block '" + shapes[i].name + "' " +
                                std::to_string(shapes[i].rows) + "x" +
                                std::to_string(shapes[i].cols) + " does not match config ('" +
                                expected[i].name + "' " + std::to_string(expected[i].rows) +
                                "x" + std::to_string(expected[i].cols) + ")");
    }
    scalars += shapes[i].rows * shapes[i].cols;
  }
  if (ck.vocab && ck.vocab->size() != ck.params.config.vocab_size) {
    throw CheckpointError(Kind::kShapeMismatch,
                          "checkpoint: vocabulary size differs from config vocab_size");
  }

  const std::size_t payload_start = 13 + meta_len;
  const std::size_t payload = bytes.size() - payload_start;
  if (payload < 8 * scalars) {
    throw CheckpointError(Kind::kTruncated, "checkpoint: truncated payload (" +
                                                std::to_string(payload) + " of " +
                                                std::to_string(8 * scalars) + " bytes)");
  }
  if (payload > 8 * scalars) {
    throw CheckpointError(Kind::kMalformed, "checkpoint: trailing bytes after payload");
  }
  std::size_t pos = payload_start;
  for (const auto& s : shapes) {
    numerics::Tensor t(s.rows, s.cols);
    for (double& v : t.data) {
      v = std::bit_cast<double>(get_u64(bytes, pos));
      pos += 8;
    }
    ck.params.weights.add(s.name, std::move(t));
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const std::optional<Vocabulary>& vocab) {
  const std::string bytes = encode_checkpoint(params, vocab);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::kIo, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::kIo, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::kIo, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace prefalign::lm
