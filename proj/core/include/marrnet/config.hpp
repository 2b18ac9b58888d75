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

#include <string>
#include <vector>

#include "marrnet/model/arch.hpp"
#include "marrnet/synth/synth.hpp"
#include "marrnet/train/trainer.hpp"

namespace marrnet {

struct DatasetConfig {
  std::string source = "synth";  // "synth" | "manifest"
  std::string manifest_path;     // when source == "manifest"
  synth::SynthSpec synth;        // when source == "synth"
  data::GridConfig grid;

  bool operator==(const DatasetConfig&) const = default;
};

struct GammaRow {
  double g16 = 0.01;    // gamma1 = gamma6
  double g2345 = 0.001; // gamma2 = gamma3 = gamma4 = gamma5
  double g7 = 1.0;

  bool operator==(const GammaRow&) const = default;
};

/// One config file drives every subcommand; all artifacts are reproducible
/// from (config, seed). The root seed is split per purpose: splits, weight
/// init, batch sampling/augmentation and mask draws each get derived streams.
/// The synthetic dataset keeps its own seed so the data stays fixed while
/// training seeds vary.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  DatasetConfig dataset;
  model::ArchConfig arch;
  train::TrainConfig train;  // train.seed is derived per replicate at run time
  std::vector<int> replicates = {0, 1, 2, 3, 4};
  std::vector<int> eval_ks = {1, 3, 5};
  std::vector<double> occlusion_ratios = {0.1, 0.3, 0.5, 0.7};
  int occlusion_n_masks = 100;
  double occlusion_fill = 0.0;
  std::vector<GammaRow> gamma_rows;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& json_text);
/// Canonical serialization; parse(serialize(c)) == c and re-serialization is
/// byte-identical.
std::string serialize_config(const ExperimentConfig& cfg);

ExperimentConfig load_config_file(const std::string& path);
void save_config_file(const ExperimentConfig& cfg, const std::string& path);

/// Applies a "dotted.path=value" override to a config JSON document; value
/// is parsed as JSON when possible, else taken as a string.
std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& overrides);

}  // namespace marrnet
