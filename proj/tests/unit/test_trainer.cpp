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

#include <cmath>
#include <filesystem>

#include "marrnet/data/io.hpp"
#include "marrnet/eval/metrics.hpp"
#include "marrnet/model/checkpoint.hpp"
#include "marrnet/synth/synth.hpp"
#include "marrnet/train/trainer.hpp"

using namespace marrnet;
using namespace marrnet::train;

namespace {

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.max_epochs = 4;
  cfg.batch_pairs = 4;
  cfg.weights.triplets_per_batch = 3;
  cfg.augment.shift_max = 1;
  cfg.augment.noise_sigma = 0.005;
  cfg.seed = 17;
  return cfg;
}

data::Dataset tiny_dataset(double gap = 0.3, double noise = 0.01, int n_classes = 12) {
  synth::SynthSpec spec;
  spec.n_classes = n_classes;
  spec.per_class_m1 = 2;
  spec.per_class_m2 = 2;
  spec.gap_level = gap;
  spec.noise_sigma = noise;
  spec.seed = 5;
  // n_classes >= 10 per the generator contract; grid matches the tiny arch.
  return synth::gen_dataset(spec, data::GridConfig{0, 1, 16});
}

struct StepInputs {
  PairBatch pairs;
  data::TripletBatch trip;
  data::TripletBatch mirror;
};

StepInputs sample_inputs(const data::Dataset& ds, const TrainConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  StepInputs in;
  in.pairs = sample_pair_batch(ds, cfg.batch_pairs, rng);
  in.trip = data::sample_triplet_batch(ds, cfg.weights.triplets_per_batch, rng, Modality::M1);
  in.mirror = data::sample_triplet_batch(ds, cfg.weights.triplets_per_batch, rng, Modality::M2);
  return in;
}

}  // namespace

TEST_CASE("lr_at follows the 25%-every-10-epochs schedule") {
  TrainConfig cfg;
  CHECK(lr_at(0, 1e-4, cfg) == 1e-4);
  CHECK(lr_at(9, 1e-4, cfg) == 1e-4);
  CHECK(lr_at(10, 1e-4, cfg) == doctest::Approx(7.5e-5).epsilon(1e-12));
  CHECK(lr_at(25, 1e-3, cfg) == doctest::Approx(1e-3 * 0.75 * 0.75).epsilon(1e-12));
  // Closed form over the whole protocol range.
  for (int epoch = 0; epoch <= 600; ++epoch) {
    CHECK(lr_at(epoch, 1e-3, cfg) ==
          doctest::Approx(1e-3 * std::pow(0.75, epoch / 10)).epsilon(1e-12));
  }
}

TEST_CASE("train_step is deterministic given state and batches") {
  const model::ArchConfig arch = model::ArchConfig::tiny();
  const TrainConfig cfg = tiny_train_config();
  const data::Dataset ds = tiny_dataset();
  const StepInputs in = sample_inputs(ds, cfg, 3);

  TrainState a = make_train_state(arch, cfg);
  TrainState b = make_train_state(arch, cfg);
  for (int step = 0; step < 3; ++step) {
    const loss::LossReport ra = train_step(a, cfg, in.pairs, in.trip, &in.mirror);
    const loss::LossReport rb = train_step(b, cfg, in.pairs, in.trip, &in.mirror);
    CHECK(ra.total == rb.total);
    CHECK(ra.rec_1 == rb.rec_1);
    CHECK(ra.triplet == rb.triplet);
  }
  std::vector<double> va, vb;
  a.params->visit_all([&](const std::string&, nn::Param& p) {
    va.insert(va.end(), p.value.begin(), p.value.end());
  });
  b.params->visit_all([&](const std::string&, nn::Param& p) {
    vb.insert(vb.end(), p.value.begin(), p.value.end());
  });
  CHECK(va == vb);
}

TEST_CASE("triplet-only weights move only the encoder/Siamese paths") {
  const model::ArchConfig arch = model::ArchConfig::tiny();
  TrainConfig cfg = tiny_train_config();
  cfg.weights.gamma = {0, 0, 0, 0, 0, 0, 1.0};
  const data::Dataset ds = tiny_dataset();
  const StepInputs in = sample_inputs(ds, cfg, 4);

  TrainState state = make_train_state(arch, cfg);
  StepDebug debug;
  (void)train_step(state, cfg, in.pairs, in.trip, &in.mirror, &debug);

  CHECK(debug.phase1_grad_norm.at("d1") == 0.0);
  CHECK(debug.phase1_grad_norm.at("d2") == 0.0);
  CHECK(debug.phase2_grad_norm.at("g1") == 0.0);
  CHECK(debug.phase2_grad_norm.at("g2") == 0.0);
  CHECK(debug.phase2_grad_norm.at("d1") == 0.0);
  CHECK(debug.phase2_grad_norm.at("d2") == 0.0);
  CHECK(debug.phase2_grad_norm.at("e1") > 0.0);
  CHECK(debug.phase2_grad_norm.at("e2") > 0.0);
  CHECK(debug.phase2_grad_norm.at("s") > 0.0);
}

TEST_CASE("discriminators update in phase 1 and stay frozen in phase 2") {
  const model::ArchConfig arch = model::ArchConfig::tiny();
  const TrainConfig cfg = tiny_train_config();
  const data::Dataset ds = tiny_dataset();
  const StepInputs in = sample_inputs(ds, cfg, 5);

  TrainState state = make_train_state(arch, cfg);
  std::vector<double> before;
  state.params->visit_params(
      [&](const std::string&, nn::Param& p) {
        before.insert(before.end(), p.value.begin(), p.value.end());
      },
      model::ModelParams::kDiscRoles);

  StepDebug debug;
  (void)train_step(state, cfg, in.pairs, in.trip, &in.mirror, &debug);

  std::vector<double> after;
  state.params->visit_params(
      [&](const std::string&, nn::Param& p) {
        after.insert(after.end(), p.value.begin(), p.value.end());
      },
      model::ModelParams::kDiscRoles);

  CHECK(debug.disc_values_after_phase1 != before);  // phase 1 moved D
  CHECK(debug.disc_values_after_phase1 == after);   // phase 2 left D alone
  CHECK(debug.phase2_grad_norm.at("e1") > 0.0);     // main nets did train
}

TEST_CASE("fit smoke run: loadable best checkpoint, sane history") {
  const model::ArchConfig arch = model::ArchConfig::tiny();
  TrainConfig cfg = tiny_train_config();
  cfg.max_epochs = 2;
  const data::Dataset ds = tiny_dataset();
  const data::SplitPlan split = data::make_splits(ds.class_ids(), 9, 0);

  const auto dir = std::filesystem::temp_directory_path() / "marrnet_fit_smoke";
  std::filesystem::remove_all(dir);
  FitOptions opts;
  opts.history_path = dir / "history.jsonl";
  TrainState state = fit(arch, cfg, ds, split, opts);

  CHECK(state.history.size() == 2);
  CHECK(state.next_epoch == 2);
  REQUIRE(state.best_params != nullptr);
  CHECK(state.best_epoch >= 0);

  // Best-validation selection rule: best >= every epoch's validation score.
  for (const auto& rec : state.history) CHECK(state.best_val_recall1 >= rec.val_recall1);

  // Checkpoint round trip.
  model::save_checkpoint(dir / "best.mnck", *state.best_params);
  auto loaded = model::load_full_checkpoint(dir / "best.mnck");
  std::vector<double> a, b;
  state.best_params->visit_all([&](const std::string&, nn::Param& p) {
    a.insert(a.end(), p.value.begin(), p.value.end());
  });
  loaded->visit_all([&](const std::string&, nn::Param& p) {
    b.insert(b.end(), p.value.begin(), p.value.end());
  });
  CHECK(a == b);

  // History JSONL has one parseable record per epoch.
  const std::string text = data::read_text_file(opts.history_path);
  int lines = 0;
  for (char ch : text) lines += ch == '\n';
  CHECK(lines == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("training loss decreases on easy synthetic data") {
  const model::ArchConfig arch = model::ArchConfig::tiny();
  TrainConfig cfg = tiny_train_config();
  // Desk-scale run: a larger learning rate than the full protocol's so the
  // trend is visible within few epochs on the tiny net.
  cfg.max_epochs = 60;
  cfg.lr_main = 2e-3;
  cfg.lr_disc = 5e-3;
  cfg.seed = 23;
  const data::Dataset ds = tiny_dataset(0.0, 0.0);
  const data::SplitPlan split = data::make_splits(ds.class_ids(), 9, 0);
  TrainState state = fit(arch, cfg, ds, split);

  const auto mean_total = [&](int from, int to) {
    double acc = 0.0;
    for (int i = from; i < to; ++i) acc += state.history[i].losses.total;
    return acc / (to - from);
  };
  CHECK(mean_total(50, 60) < mean_total(0, 10));
}

TEST_CASE("interrupted fit resumes to the identical final state") {
  const model::ArchConfig arch = model::ArchConfig::tiny();
  TrainConfig cfg = tiny_train_config();
  cfg.max_epochs = 4;
  const data::Dataset ds = tiny_dataset();
  const data::SplitPlan split = data::make_splits(ds.class_ids(), 9, 1);

  const auto dir = std::filesystem::temp_directory_path() / "marrnet_resume";
  std::filesystem::remove_all(dir);

  // Uninterrupted reference run.
  TrainState full = fit(arch, cfg, ds, split);

  // Interrupted: stop after 2 epochs, then resume from disk.
  FitOptions opts;
  opts.state_path = dir / "state.mnst";
  opts.history_path = dir / "history.jsonl";
  opts.stop_epoch = 2;
  (void)fit(arch, cfg, ds, split, opts);
  opts.stop_epoch = -1;
  TrainState resumed = fit(arch, cfg, ds, split, opts);

  std::vector<double> a, b;
  full.params->visit_all([&](const std::string&, nn::Param& p) {
    a.insert(a.end(), p.value.begin(), p.value.end());
  });
  resumed.params->visit_all([&](const std::string&, nn::Param& p) {
    b.insert(b.end(), p.value.begin(), p.value.end());
  });
  CHECK(a == b);
  CHECK(resumed.history.size() == full.history.size());
  for (size_t i = 0; i < full.history.size(); ++i) {
    CHECK(resumed.history[i].losses.total == full.history[i].losses.total);
    CHECK(resumed.history[i].val_recall1 == full.history[i].val_recall1);
  }

  // Resuming under a different config is rejected.
  TrainConfig other = cfg;
  other.lr_main *= 2;
  CHECK_THROWS_AS((void)fit(arch, other, ds, split, opts), InvalidConfig);
  std::filesystem::remove_all(dir);
}

TEST_CASE("strip_for_inference embeds bit-identically and drops the rest") {
  const model::ArchConfig arch = model::ArchConfig::tiny();
  auto params = model::init_params(arch, 77);
  auto inf = strip_for_inference(*params);

  Rng rng(3);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> values(arch.input_length);
    for (double& v : values) v = dist(rng);
    const Modality m = trial % 2 ? Modality::M1 : Modality::M2;
    CHECK(model::embed_values(*params, values, m) == model::embed_values(*inf, values, m));
  }

  const auto dir = std::filesystem::temp_directory_path() / "marrnet_strip";
  std::filesystem::remove_all(dir);
  model::save_checkpoint(dir / "full.mnck", *params);
  model::save_checkpoint(dir / "inference.mnck", *inf);
  CHECK(std::filesystem::file_size(dir / "inference.mnck") <
        std::filesystem::file_size(dir / "full.mnck"));

  // An inference checkpoint cannot be loaded as a full model.
  CHECK_THROWS_AS(model::load_full_checkpoint(dir / "inference.mnck"), MalformedFile);
  // Both roles load for inference.
  auto inf2 = model::load_inference_checkpoint(dir / "full.mnck");
  auto inf3 = model::load_inference_checkpoint(dir / "inference.mnck");
  std::vector<double> values(arch.input_length, 0.25);
  CHECK(model::embed_values(*inf2, values, Modality::M1) ==
        model::embed_values(*inf3, values, Modality::M1));
  std::filesystem::remove_all(dir);
}

TEST_CASE("validate_split_coverage rejects classes missing a modality") {
  data::Dataset ds = tiny_dataset();
  // Remove all M2 spectra of one class.
  const int victim = ds.class_ids().front();
  std::erase_if(ds.spectra, [&](const data::Spectrum& s) {
    return s.class_id == victim && s.modality == Modality::M2;
  });
  const data::SplitPlan split = data::make_splits(tiny_dataset().class_ids(), 9, 0);
  CHECK_THROWS_AS(validate_split_coverage(ds, split), InsufficientClasses);
}
