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

#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "support/oracles.hpp"

namespace prefalign::lm {
namespace {

using Kind = CheckpointError::Kind;

ModelParams sample_params() {
  ModelConfig c;
  c.vocab_size = 6;
  c.embed_dim = 8;
  c.num_layers = 1;
  c.num_heads = 2;
  c.context_length = 10;
  c.feedforward_dim = 12;
  c.seed = 3;
  ModelParams p = init_params(c);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t i = 0; i < p.weights.num_scalars(); ++i) p.weights.at(i) = n(rng);
  p.weights.at(0) = -0.0;
  p.weights.at(1) = 1e-310;
  return p;
}

Vocabulary sample_vocab() {
  return Vocabulary(TokenScheme::kWord, {"<bos>", "<eos>", "<pad>", "a", "b", "c"});
}

Kind decode_kind(const std::string& bytes) {
  try {
    decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode succeeded";
  return Kind::kIo;
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const ModelParams p = sample_params();
  const Checkpoint ck = decode_checkpoint(encode_checkpoint(p));
  EXPECT_EQ(ck.params.config, p.config);
  EXPECT_TRUE(ck.params.weights.bit_identical(p.weights));
  EXPECT_FALSE(ck.vocab.has_value());
}

TEST(Checkpoint, RoundTripWithVocabulary) {
  const ModelParams p = sample_params();
  const Checkpoint ck = decode_checkpoint(encode_checkpoint(p, sample_vocab()));
  ASSERT_TRUE(ck.vocab.has_value());
  EXPECT_EQ(ck.vocab->tokens(), sample_vocab().tokens());
  EXPECT_EQ(ck.vocab->scheme(), TokenScheme::kWord);
  EXPECT_TRUE(ck.params.weights.bit_identical(p.weights));
}

TEST(Checkpoint, EncodingIsDeterministic) {
  const ModelParams p = sample_params();
  EXPECT_EQ(encode_checkpoint(p, sample_vocab()), encode_checkpoint(p, sample_vocab()));
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = oracle::temp_dir("checkpoint");
  const ModelParams p = sample_params();
  save_checkpoint(dir / "m.ckpt", p, sample_vocab());
  const Checkpoint ck = load_checkpoint(dir / "m.ckpt");
  EXPECT_TRUE(ck.params.weights.bit_identical(p.weights));
  EXPECT_EQ(ck.params.weights.sha256(), p.weights.sha256());
}

TEST(Checkpoint, TruncatedPayload) {
  std::string bytes = encode_checkpoint(sample_params());
  bytes.resize(bytes.size() - 8);
  try {
    decode_checkpoint(bytes);
    FAIL() << "decode succeeded";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), Kind::kTruncated);
    EXPECT_NE(std::string(e.what()).find("truncated payload"), std::string::npos);
  }
}

TEST(Checkpoint, TruncatedHeaderAndMetadata) {
  const std::string bytes = encode_checkpoint(sample_params());
  EXPECT_EQ(decode_kind(bytes.substr(0, 9)), Kind::kTruncated);
  EXPECT_EQ(decode_kind(bytes.substr(0, 40)), Kind::kTruncated);
}

TEST(Checkpoint, BadMagic) {
  std::string bytes = encode_checkpoint(sample_params());
  bytes[0] = 'X';
  EXPECT_EQ(decode_kind(bytes), Kind::kBadMagic);
  EXPECT_EQ(decode_kind(""), Kind::kBadMagic);
}

TEST(Checkpoint, UnknownVersion) {
  std::string bytes = encode_checkpoint(sample_params());
  bytes[4] = static_cast<char>(kCheckpointVersion + 1);
  EXPECT_EQ(decode_kind(bytes), Kind::kVersionMismatch);
}

TEST(Checkpoint, ShapeMismatch) {
  std::string bytes = encode_checkpoint(sample_params());
  const auto pos = bytes.find("\"embed_dim\":8");
  ASSERT_NE(pos, std::string::npos);
  bytes[pos + 12] = '4';
  EXPECT_EQ(decode_kind(bytes), Kind::kShapeMismatch);
}

TEST(Checkpoint, TrailingBytes) {
  std::string bytes = encode_checkpoint(sample_params());
  bytes.push_back('\0');
  EXPECT_EQ(decode_kind(bytes), Kind::kMalformed);
}

TEST(Checkpoint, MissingFile) {
  try {
    load_checkpoint(oracle::temp_dir("checkpoint_missing") / "absent.ckpt");
    FAIL() << "load succeeded";
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), Kind::kIo);
  }
}

}  // namespace
}  // namespace prefalign::lm
