/* Copyright (c) 2026 The MarrNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <array>

#include "marrnet/common.hpp"

namespace marrnet::model {

/// Network hyperparameters for the cmUNet + Siamese stack.
///
/// Encoders: three blocks of (conv-BN-ReLU) x2 + max-pool, channel widths
/// base, 2*base, 4*base, then a full-width conv (+BN+ReLU) collapsing the
/// (4*base, L/8) map into a bottleneck_dim vector. Decoders mirror this with
/// transposed convolutions and consume skip maps by channel concatenation.
/// Discriminators reuse the first disc_blocks encoder blocks plus a 2-way
/// linear head. The Siamese extractor reads the bottleneck reshaped to
/// (bottleneck_dim/8 channels, length 8).
struct ArchConfig {
  int input_length = 1024;
  int encoder_blocks = 3;
  int base_channels = 16;
  int bottleneck_dim = 128;
  int kernel_size = 3;
  std::array<int, 3> siamese_channels = {16, 32, 64};
  int embedding_dim = 128;
  int disc_blocks = 2;

  int block_channels(int i) const { return base_channels << i; }
  int pooled_length() const { return input_length >> encoder_blocks; }
  int siamese_seq_len() const { return 8; }
  int siamese_in_channels() const { return bottleneck_dim / siamese_seq_len(); }

  void validate() const {
    if (encoder_blocks != 3)
      throw InvalidConfig("ArchConfig: encoder_blocks must be 3");
    if (input_length < 8 || input_length % (1 << encoder_blocks) != 0)
      throw InvalidConfig("ArchConfig: input_length must be a positive multiple of 8");
    if (base_channels < 1 || bottleneck_dim < 1 || embedding_dim < 1)
      throw InvalidConfig("ArchConfig: dimensions must be positive");
    if (kernel_size < 1 || kernel_size % 2 == 0)
      throw InvalidConfig("ArchConfig: kernel_size must be odd and positive");
    if (bottleneck_dim % siamese_seq_len() != 0)
      throw InvalidConfig("ArchConfig: bottleneck_dim must be divisible by 8");
    if (disc_blocks < 1 || disc_blocks > encoder_blocks)
      throw InvalidConfig("ArchConfig: disc_blocks must be in [1, 3]");
    for (int c : siamese_channels)
      if (c < 1) throw InvalidConfig("ArchConfig: siamese_channels must be positive");
  }

  /// Small configuration used by gradient checks and fast tests.
  static ArchConfig tiny() {
    ArchConfig cfg;
    cfg.input_length = 16;
    cfg.base_channels = 2;
    cfg.bottleneck_dim = 8;
    cfg.siamese_channels = {2, 4, 8};
    cfg.embedding_dim = 8;
    return cfg;
  }

  bool operator==(const ArchConfig&) const = default;
};

}  // namespace marrnet::model
