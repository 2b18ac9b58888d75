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

#include "marrnet/data/spectrum.hpp"

namespace marrnet::data {

/// Training-time augmentation knobs. Mild, label-preserving perturbations:
/// a small grid shift, additive Gaussian noise and a global intensity scale.
struct AugmentPolicy {
  int shift_max = 16;
  double noise_sigma = 0.01;
  double scale_min = 0.9;
  double scale_max = 1.1;
  bool enabled = true;

  void validate() const {
    if (shift_max < 0) throw InvalidConfig("AugmentPolicy: shift_max must be >= 0");
    if (noise_sigma < 0) throw InvalidConfig("AugmentPolicy: noise_sigma must be >= 0");
    if (!(scale_min > 0) || !(scale_max >= scale_min))
      throw InvalidConfig("AugmentPolicy: scale range must be positive");
  }
  bool operator==(const AugmentPolicy&) const = default;
};

/// Parses a two-column spectrum file: lines of "position<sep>intensity" with
/// sep in {',', whitespace}; lines starting with '#' or '=' are comments.
/// Positions are sorted ascending and duplicate positions averaged.
RawSpectrum parse_spectrum_file(const std::string& text, Modality modality, int class_id,
                                const std::string& source_id = "");

/// Linear interpolation of a raw spectrum onto length uniform grid points
/// spanning [grid.min, grid.max] inclusive; zero outside the raw support.
/// Output is NOT yet normalized.
Spectrum resample(const RawSpectrum& raw, const GridConfig& grid);

/// Per-spectrum min-max normalization to [0,1]; a constant spectrum maps to
/// all zeros.
Spectrum normalize(const Spectrum& s);

/// Shift + noise + scale, then clip back to [0,1]. Identity when disabled or
/// when all knobs are zero/unit. Deterministic per rng state.
Spectrum augment(const Spectrum& s, const AugmentPolicy& policy, Rng& rng);

}  // namespace marrnet::data
