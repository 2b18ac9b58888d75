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
#include <span>
#include <vector>

#include "marrnet/tensor.hpp"

namespace marrnet::loss {

/// The seven balance coefficients plus the triplet margin and triplet count.
/// gamma[0] weighs the direction-1 adversarial pair (discriminator +
/// generator terms), gamma[5] the direction-2 pair; gamma[1]/gamma[4] the
/// cross-transform terms, gamma[2]/gamma[3] the reconstructions and
/// gamma[6] the triplet term.
struct LossWeights {
  std::array<double, 7> gamma = {0.01, 0.001, 0.001, 0.001, 0.001, 0.01, 1.0};
  double alpha = 1.0;
  int triplets_per_batch = 5;

  void validate() const {
    for (double g : gamma)
      if (!(g >= 0.0)) throw InvalidConfig("LossWeights: gamma must be >= 0");
    if (!(gamma[6] > 0.0)) throw InvalidConfig("LossWeights: gamma7 must be > 0");
    if (!(alpha >= 0.0)) throw InvalidConfig("LossWeights: alpha must be >= 0");
    if (triplets_per_batch < 1) throw InvalidConfig("LossWeights: K must be >= 1");
  }
  bool operator==(const LossWeights&) const = default;
};

/// All loss components of one training step plus their weighted total.
struct LossReport {
  double rec_1 = 0, rec_2 = 0;
  double cross_12 = 0, cross_21 = 0;
  double disc_1 = 0, gen_1 = 0;  // direction-1 adversarial pair
  double disc_2 = 0, gen_2 = 0;  // direction-2 adversarial pair
  double triplet = 0;
  double total = 0;

  bool all_finite() const;
  /// Name of the first non-finite component, or nullptr.
  const char* first_non_finite() const;
};

/// Mean absolute error. Used for both in-modality reconstruction and
/// cross-modality transform losses (they differ only in their arguments).
double rec_loss(std::span<const double> reconstruction, std::span<const double> target);
double cross_loss(std::span<const double> transformed, std::span<const double> target);

/// Probability that a 2-logit output calls its input real: softmax over
/// (fake, real) logits reduced to sigmoid(real - fake).
double prob_real(std::span<const double, 2> logits);

/// Binary adversarial losses in logit space (numerically stable):
///   discriminator: -[log D(real) + log(1 - D(fake))]
///   generator (non-saturating): -log D(fake)
double adv_disc_loss(std::span<const double, 2> real_logits,
                     std::span<const double, 2> fake_logits);
double adv_gen_loss(std::span<const double, 2> fake_logits);

/// Sum over K triplets of max(||a-p||^2 - ||a-n||^2 + alpha, 0) with squared
/// Euclidean distances.
double triplet_loss(const std::vector<std::vector<double>>& anchors,
                    const std::vector<std::vector<double>>& positives,
                    const std::vector<std::vector<double>>& negatives, double alpha);

/// Weighted combination of all components; writes report.total and returns it.
double total_loss(LossReport& report, const LossWeights& weights);

// Batched forms with gradients, used by the trainer. Losses are means over
// batch x length so the gamma defaults stay size-independent.

/// Returns mean |a - b| and fills d_a with the gradient w.r.t. a.
double l1_mean(const Tensor& a, const Tensor& b, Tensor* d_a = nullptr);

struct AdvDiscGrads {
  double value = 0;
  Tensor d_real_logits;  // (N, 2, 1)
  Tensor d_fake_logits;
};
/// Batch-mean discriminator loss over (N, 2, 1) logit tensors.
AdvDiscGrads adv_disc_loss_batch(const Tensor& real_logits, const Tensor& fake_logits);

struct AdvGenGrads {
  double value = 0;
  Tensor d_fake_logits;
};
AdvGenGrads adv_gen_loss_batch(const Tensor& fake_logits);

struct TripletGrads {
  double value = 0;
  Tensor d_anchor, d_positive, d_negative;  // (K, E, 1)
};
TripletGrads triplet_loss_batch(const Tensor& anchor, const Tensor& positive,
                                const Tensor& negative, double alpha);

}  // namespace marrnet::loss
