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
#include <map>
#include <optional>

#include "marrnet/data/pipeline.hpp"
#include "marrnet/data/split.hpp"
#include "marrnet/data/triplet.hpp"
#include "marrnet/loss/losses.hpp"
#include "marrnet/model/checkpoint.hpp"

namespace marrnet::train {

struct TrainConfig {
  int max_epochs = 600;
  double lr_main = 1e-4;  // E1, E2, G1, G2, S
  double lr_disc = 1e-3;  // D1, D2
  double lr_decay = 0.75;
  int lr_decay_every = 10;
  int batch_pairs = 16;
  loss::LossWeights weights;
  /// Also train the mirrored triplet direction (anchors in M2) and average
  /// the two terms.
  bool triplet_bidirectional = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  data::AugmentPolicy augment;
  std::uint64_t seed = 0;

  void validate() const;
  /// Canonical field dump used to verify resume compatibility.
  std::string fingerprint() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Stepped learning-rate schedule: base * lr_decay^floor(epoch / every).
double lr_at(int epoch, double base, const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double lr_main = 0, lr_disc = 0;
  loss::LossReport losses;  // epoch means
  double val_recall1 = 0;
};

/// Adam with bias correction over one parameter group.
class Adam {
 public:
  void bind(const model::ModelParams& params, std::span<const std::string> roles);
  void step(double lr, double beta1, double beta2, double eps);
  std::int64_t step_count() const { return t_; }

  // Serialization access (moments aligned with the bound visit order).
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::vector<double>>& moments_m() const { return m_; }
  const std::vector<std::vector<double>>& moments_v() const { return v_; }
  std::vector<std::vector<double>>& moments_m() { return m_; }
  std::vector<std::vector<double>>& moments_v() { return v_; }
  void set_step_count(std::int64_t t) { t_ = t; }

 private:
  std::vector<std::string> names_;
  std::vector<nn::Param*> params_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t t_ = 0;
};

struct TrainState {
  model::ArchConfig arch;
  std::unique_ptr<model::ModelParams> params;
  std::unique_ptr<model::ModelParams> best_params;
  double best_val_recall1 = -1.0;
  int best_epoch = -1;
  int next_epoch = 0;
  Adam adam_main, adam_disc;
  std::vector<EpochRecord> history;
};

/// Fresh state with seed-deterministic weights and bound optimizers.
TrainState make_train_state(const model::ArchConfig& arch, const TrainConfig& cfg);

/// Bit-exact state persistence for resumable training.
void save_train_state(const std::filesystem::path& path, const TrainState& state,
                      const TrainConfig& cfg);
TrainState load_train_state(const std::filesystem::path& path, const TrainConfig& cfg);

/// B class-paired (M1, M2) couples; entry b of each vector shares a class.
struct PairBatch {
  std::vector<data::Spectrum> m1, m2;

  int size() const { return static_cast<int>(m1.size()); }
  void validate() const;
};

PairBatch sample_pair_batch(const data::Dataset& train_set, int batch_pairs, Rng& rng);

/// Test/diagnostic probes captured from one step.
struct StepDebug {
  std::map<std::string, double> phase1_grad_norm;  // per role, before the disc update
  std::map<std::string, double> phase2_grad_norm;  // per role, before the main update
  std::vector<double> disc_values_after_phase1;    // flattened D1+D2 params
};

Tensor stack_spectra(const std::vector<data::Spectrum>& specs);

/// Cross-modality transforms of a pair batch: (G1(E2(x2)), G2(E1(x1))),
/// train-mode forward. Optionally updates BN running statistics.
std::pair<Tensor, Tensor> compute_cross_fakes(const model::ModelParams& params, const Tensor& x1,
                                              const Tensor& x2, bool stats_update);

struct DiscLosses {
  double disc_1 = 0, disc_2 = 0;
};

/// Discriminator losses on real vs generated samples; optionally accumulates
/// the gamma-weighted gradients into D1/D2 (generated samples are constants).
DiscLosses disc_losses_and_grads(const model::ModelParams& params, const loss::LossWeights& w,
                                 const Tensor& x1, const Tensor& fake1, const Tensor& x2,
                                 const Tensor& fake2, bool stats_update, bool accumulate);

/// Phase-2 components: reconstruction, cross-transform, generator
/// adversarial and triplet terms; optionally accumulates the gamma-weighted
/// gradients into {E1, E2, G1, G2, S} with the discriminators frozen.
/// disc_1/disc_2/total are left at 0 for the caller to fill.
loss::LossReport main_losses_and_grads(const model::ModelParams& params, const TrainConfig& cfg,
                                       const Tensor& x1, const Tensor& x2,
                                       const data::TripletBatch& triplets,
                                       const data::TripletBatch* mirrored, bool accumulate);

/// One optimization step: phase 1 updates D1/D2 on the discriminator losses
/// (generated samples treated as constants), phase 2 updates
/// {E1, E2, G1, G2, S} on the weighted total with the discriminators frozen.
/// Batches must already be augmented. Deterministic given (state, inputs).
loss::LossReport train_step(TrainState& state, const TrainConfig& cfg, const PairBatch& pairs,
                            const data::TripletBatch& triplets,
                            const data::TripletBatch* mirrored = nullptr,
                            StepDebug* debug = nullptr);

struct FitOptions {
  /// When set, per-epoch state is persisted here and an existing compatible
  /// state file is resumed from.
  std::filesystem::path state_path;
  /// When set, one JSON record per epoch is (re)written here.
  std::filesystem::path history_path;
  bool resume = true;
  /// Stop once validation Recall@1 reaches this value (< 0 disables).
  double stop_at_val_recall1 = -1.0;
  /// Train only epochs [0, stop_epoch) in this call (-1 = cfg.max_epochs).
  /// Used to exercise interruption + resume.
  int stop_epoch = -1;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Full training run per the protocol: per-epoch loss means, per-epoch
/// validation Recall@1, best-validation checkpointing, resumability.
TrainState fit(const model::ArchConfig& arch, const TrainConfig& cfg,
               const data::Dataset& dataset, const data::SplitPlan& split,
               const FitOptions& opts = {});

/// Keeps only {E1, E2, S}; embeddings are bit-identical to the full model's.
std::unique_ptr<model::InferenceParams> strip_for_inference(const model::ModelParams& params);

/// Verifies that every split class has both modalities present.
void validate_split_coverage(const data::Dataset& dataset, const data::SplitPlan& split);

std::string epoch_record_to_json(const EpochRecord& rec);
EpochRecord epoch_record_from_json(const std::string& line);

}  // namespace marrnet::train
