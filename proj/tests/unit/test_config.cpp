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

#include <doctest.h>

#include "marrnet/config.hpp"

using namespace marrnet;

namespace {

ExperimentConfig sample_config() {
  ExperimentConfig c;
  c.seed = 99;
  c.output_dir = "runs/exp1";
  c.dataset.source = "synth";
  c.dataset.synth.n_classes = 50;
  c.dataset.synth.gap_level = 0.6;
  c.dataset.synth.noise_sigma = 0.0123456789012345;
  c.dataset.grid = data::GridConfig{0, 1, 16};
  c.arch = model::ArchConfig::tiny();
  c.train.max_epochs = 7;
  c.train.lr_main = 3.33e-4;
  c.train.weights.gamma = {0.01, 0.001, 0.001, 0.001, 0.001, 0.01, 1.0};
  c.replicates = {0, 2, 4};
  c.eval_ks = {1, 3, 5};
  c.occlusion_ratios = {0.1, 0.3, 0.5, 0.7};
  c.gamma_rows = {{0.01, 0.001, 1.0}, {0.02, 0.001, 1.0}};
  return c;
}

}  // namespace

TEST_CASE("config round-trips losslessly through serialize/parse") {
  const ExperimentConfig c = sample_config();
  const std::string text = serialize_config(c);
  const ExperimentConfig back = parse_config(text);
  CHECK(back == c);
  // Canonical form: re-serialization is byte-identical.
  CHECK(serialize_config(back) == text);
}

TEST_CASE("config validation catches inconsistencies") {
  ExperimentConfig c = sample_config();
  c.dataset.grid.length = 32;  // != arch.input_length
  CHECK_THROWS_AS(parse_config(serialize_config(c)), InvalidConfig);

  c = sample_config();
  c.replicates = {0, 0};
  CHECK_THROWS_AS(parse_config(serialize_config(c)), InvalidConfig);

  c = sample_config();
  c.replicates = {5};
  CHECK_THROWS_AS(parse_config(serialize_config(c)), InvalidConfig);

  c = sample_config();
  c.dataset.source = "database";
  CHECK_THROWS_AS(parse_config(serialize_config(c)), InvalidConfig);

  c = sample_config();
  c.occlusion_ratios = {1.0};
  CHECK_THROWS_AS(parse_config(serialize_config(c)), InvalidConfig);

  CHECK_THROWS_AS(parse_config("{not json"), InvalidConfig);
  CHECK_THROWS_AS(parse_config("{}"), InvalidConfig);
}

TEST_CASE("scalar overrides rewrite nested fields") {
  const ExperimentConfig c = sample_config();
  const std::string text = serialize_config(c);
  const std::string patched =
      apply_overrides(text, {"train.max_epochs=11", "dataset.synth.gap_level=0.25",
                             "output_dir=elsewhere"});
  const ExperimentConfig back = parse_config(patched);
  CHECK(back.train.max_epochs == 11);
  CHECK(back.dataset.synth.gap_level == 0.25);
  CHECK(back.output_dir == "elsewhere");
  // Untouched fields survive.
  CHECK(back.train.lr_main == c.train.lr_main);

  CHECK_THROWS_AS(apply_overrides(text, {"no_equals_sign"}), InvalidConfig);
}
