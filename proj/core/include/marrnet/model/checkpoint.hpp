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

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "marrnet/model/cmunet.hpp"

namespace marrnet::model {

/// On-disk container: 8-byte magic, u32 version, u64 JSON header length, the
/// JSON header (role, architecture, named tensor index with shapes), then
/// the raw little-endian doubles in index order. Round-trips bit-exactly.
struct ArchiveEntry {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
};

struct Archive {
  std::string format;       // "checkpoint" or "train_state"
  std::string role;         // "full" or "inference" (checkpoints)
  ArchConfig arch;
  std::string extra_json;   // format-specific metadata (JSON object text)
  std::vector<ArchiveEntry> entries;
};

void save_archive(const std::filesystem::path& path, const Archive& archive);
Archive load_archive(const std::filesystem::path& path);

/// Full model checkpoint (all seven sub-networks, params + BN statistics).
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
/// Inference checkpoint (encoders + Siamese only).
void save_checkpoint(const std::filesystem::path& path, const InferenceParams& params);

std::unique_ptr<ModelParams> load_full_checkpoint(const std::filesystem::path& path);
/// Accepts either role; a full checkpoint is stripped on load.
std::unique_ptr<InferenceParams> load_inference_checkpoint(const std::filesystem::path& path);

}  // namespace marrnet::model
