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

#include "marrnet/eval/metrics.hpp"

namespace marrnet::eval {

/// Accuracy as a function of mask size. stderr_per_ratio holds the binomial
/// Monte-Carlo standard error of each estimate.
struct OcclusionCurve {
  std::vector<double> mask_ratios;
  std::vector<double> accuracy;
  std::vector<double> stderr_per_ratio;
  std::vector<long> n_draws;
  int masks_per_sample = 100;
  double fill_value = 0.0;

  void validate() const;
};

/// Sets a contiguous window of floor(ratio * L) grid points starting at
/// `position` to `fill`. ratio 0 is the identity. Throws InvalidWindow when
/// the window does not fit or the ratio is outside [0, 1).
data::Spectrum mask_spectrum(const data::Spectrum& s, double ratio, int position, double fill);

/// Cross-modality occlusion protocol: queries that are correctly matched
/// unmasked (both directions pooled) are kept; each surviving query is
/// masked n_masks times per ratio at uniform random positions and re-matched
/// against the unmasked other-modality gallery. Accuracy pools all
/// (query, mask) draws. Deterministic per seed.
OcclusionCurve occlusion_test(const Embedder& embedder, const data::Dataset& test_set,
                              const std::vector<double>& ratios, int n_masks, double fill,
                              std::uint64_t seed);

/// Within-modality baseline: a sample's masked embedding is matched against
/// the unmasked embeddings of its own modality; a draw succeeds when the
/// sample itself attains the minimum distance. The input spectra must all
/// share one modality.
OcclusionCurve within_modality_baseline(const Embedder& embedder,
                                        const std::vector<data::Spectrum>& spectra,
                                        const std::vector<double>& ratios, int n_masks,
                                        double fill, std::uint64_t seed);

}  // namespace marrnet::eval
