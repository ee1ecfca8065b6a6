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

#ifndef PREFALIGN_LM_CHECKPOINT_HPP_
#define PREFALIGN_LM_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "prefalign/error.hpp"
#include "prefalign/lm/model.hpp"
#include "prefalign/lm/vocabulary.hpp"

namespace prefalign::lm {

// Checkpoint layout:
//   "PRFA"                      4 bytes
//   version                     1 byte (kCheckpointVersion)
//   metadata length             8 bytes, little-endian
//   metadata                    UTF-8 JSON: config, block names and shapes,
//                               optional vocabulary
//   parameters                  little-endian IEEE-754 doubles, blocks in
//                               metadata order, row-major
inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  enum class Kind { kIo, kBadMagic, kVersionMismatch, kTruncated, kShapeMismatch, kMalformed };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Checkpoint {
  ModelParams params;
  std::optional<Vocabulary> vocab;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const std::optional<Vocabulary>& vocab = std::nullopt);

Checkpoint load_checkpoint(const std::filesystem::path& path);

// In-memory forms of the same encoding.
std::string encode_checkpoint(const ModelParams& params,
                              const std::optional<Vocabulary>& vocab = std::nullopt);
Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace prefalign::lm

#endif  // PREFALIGN_LM_CHECKPOINT_HPP_
