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

#include <vector>

#include "marrnet/data/spectrum.hpp"

namespace marrnet::synth {

/// Per-class peak fingerprint on the fractional grid (0,1).
struct ClassTemplate {
  int class_id = 0;
  std::vector<double> peak_positions;   // distinct, in (0,1)
  std::vector<double> peak_widths;      // > 0, fractional
  std::vector<double> peak_amplitudes;  // > 0

  void validate() const;
};

/// Controls the synthetic modality gap. gap_level 0 means M1 and M2 render
/// identically (identity warp, unit amplitude remap, no baselines); 1 means
/// the strongest configured distortion.
struct GapModel {
  double gap_level = 0.5;
  double noise_sigma = 0.0;
  std::vector<double> warp_knots_x;  // strictly increasing, 0..1 inclusive
  std::vector<double> warp_knots_y;  // strictly increasing, 0..1 inclusive
  std::vector<double> baseline_m1;   // cosine-mix coefficients (amp, freq, phase) triples
  std::vector<double> baseline_m2;
  std::uint64_t remap_seed = 0;      // per-(class, peak) amplitude multipliers derive from this
  double remap_log_sigma = 0.0;      // log-std of the multipliers, grows with gap_level

  /// Monotone position warp applied to M2 peak positions.
  double warp(double t) const;
  /// Smooth nonnegative baseline for the modality, scaled by gap_level.
  double baseline(Modality m, double t) const;
  /// Log-normal amplitude multiplier for peak p of class c (1 when gap is 0).
  double amplitude_remap(int class_id, int peak) const;
  void validate() const;
};

/// Random gap model for a dataset; deterministic per (seed, gap_level).
GapModel make_gap_model(double gap_level, double noise_sigma, std::uint64_t seed);

/// 3..12 Gaussian peaks with distinct positions; deterministic per
/// (class_id, seed).
ClassTemplate gen_class_template(int class_id, std::uint64_t seed);

/// Rasterizes the template for one modality onto the grid, applies the gap
/// model and per-draw noise, and normalizes. Pure given (inputs, rng state).
data::Spectrum render(const ClassTemplate& tpl, Modality modality, const GapModel& gap,
                      const data::GridConfig& grid, Rng& rng, const std::string& source_id = "");

struct SynthSpec {
  int n_classes = 50;
  double per_class_m1 = 4.0;  // mean spectra per class (>= 1 each, randomized when fractional)
  double per_class_m2 = 2.0;
  double gap_level = 0.5;
  double noise_sigma = 0.01;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_classes < 10) throw InvalidConfig("SynthSpec: n_classes must be >= 10");
    if (per_class_m1 < 1.0 || per_class_m2 < 1.0)
      throw InvalidConfig("SynthSpec: per-class means must be >= 1");
    if (gap_level < 0.0 || gap_level > 1.0)
      throw InvalidConfig("SynthSpec: gap_level must be in [0,1]");
    if (noise_sigma < 0.0) throw InvalidConfig("SynthSpec: noise_sigma must be >= 0");
  }
  bool operator==(const SynthSpec&) const = default;
};

/// Full labeled paired dataset. Every class gets at least one spectrum per
/// modality; fractional per-class means are realized as 1 + Poisson(mean-1).
data::Dataset gen_dataset(const SynthSpec& spec, const data::GridConfig& grid);

}  // namespace marrnet::synth
