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

#include "marrnet/synth/synth.hpp"

#include <algorithm>
#include <cmath>

#include "marrnet/data/pipeline.hpp"

namespace marrnet::synth {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void ClassTemplate::validate() const {
  const size_t n = peak_positions.size();
  if (n < 3) throw Error("ClassTemplate: need >= 3 peaks");
  if (peak_widths.size() != n || peak_amplitudes.size() != n)
    throw ShapeMismatch("ClassTemplate: field sizes differ");
  for (double p : peak_positions)
    if (!(p > 0.0 && p < 1.0)) throw Error("ClassTemplate: peak position outside (0,1)");
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (peak_positions[i] == peak_positions[j]) throw Error("ClassTemplate: duplicate position");
  for (double w : peak_widths)
    if (!(w > 0.0)) throw Error("ClassTemplate: non-positive width");
  for (double a : peak_amplitudes)
    if (!(a > 0.0)) throw Error("ClassTemplate: non-positive amplitude");
}

double GapModel::warp(double t) const {
  // Exact identity at zero gap so paired renders stay bitwise equal.
  if (gap_level == 0.0 || warp_knots_x.empty()) return t;
  if (t <= warp_knots_x.front()) return warp_knots_y.front();
  if (t >= warp_knots_x.back()) return warp_knots_y.back();
  size_t i = 1;
  while (warp_knots_x[i] < t) ++i;
  const double x0 = warp_knots_x[i - 1], x1 = warp_knots_x[i];
  const double y0 = warp_knots_y[i - 1], y1 = warp_knots_y[i];
  return y0 + (t - x0) / (x1 - x0) * (y1 - y0);
}

double GapModel::baseline(Modality m, double t) const {
  const std::vector<double>& coef = (m == Modality::M1) ? baseline_m1 : baseline_m2;
  double acc = 0.0;
  for (size_t i = 0; i + 2 < coef.size(); i += 3) {
    const double amp = coef[i], freq = coef[i + 1], phase = coef[i + 2];
    acc += amp * 0.5 * (1.0 + std::cos(2.0 * kPi * freq * t + phase));
  }
  return gap_level * acc;
}

double GapModel::amplitude_remap(int class_id, int peak) const {
  if (remap_log_sigma == 0.0) return 1.0;
  Rng rng(derive_seed(remap_seed, "amp-remap",
                      (static_cast<std::uint64_t>(class_id) << 16) ^ static_cast<std::uint64_t>(peak)));
  std::normal_distribution<double> z(0.0, 1.0);
  return std::exp(remap_log_sigma * z(rng));
}

void GapModel::validate() const {
  if (gap_level < 0.0 || gap_level > 1.0) throw InvalidConfig("GapModel: gap_level in [0,1]");
  if (noise_sigma < 0.0) throw InvalidConfig("GapModel: noise_sigma >= 0");
  if (warp_knots_x.size() != warp_knots_y.size())
    throw ShapeMismatch("GapModel: warp knot arrays differ");
  for (size_t i = 1; i < warp_knots_x.size(); ++i) {
    if (!(warp_knots_x[i] > warp_knots_x[i - 1]) || !(warp_knots_y[i] > warp_knots_y[i - 1]))
      throw Error("GapModel: warp knots must be strictly increasing");
  }
}

GapModel make_gap_model(double gap_level, double noise_sigma, std::uint64_t seed) {
  if (gap_level < 0.0 || gap_level > 1.0)
    throw InvalidConfig("make_gap_model: gap_level must be in [0,1]");
  GapModel gm;
  gm.gap_level = gap_level;
  gm.noise_sigma = noise_sigma;
  gm.remap_seed = derive_seed(seed, "gap-remap");
  // Log-normal amplitude multipliers: Var(log R) grows linearly with the gap.
  gm.remap_log_sigma = std::sqrt(0.25 * gap_level);

  Rng rng = make_rng(seed, "gap-warp");
  constexpr int kSegments = 8;
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> weights(kSegments);
  double total = 0.0;
  for (double& w : weights) {
    w = u(rng);
    total += w;
  }
  gm.warp_knots_x.resize(kSegments + 1);
  gm.warp_knots_y.resize(kSegments + 1);
  double cum = 0.0;
  for (int i = 0; i <= kSegments; ++i) {
    const double x = static_cast<double>(i) / kSegments;
    gm.warp_knots_x[i] = x;
    // Blend of identity and a random monotone map; identity at gap 0.
    gm.warp_knots_y[i] = (1.0 - gap_level) * x + gap_level * cum / total;
    if (i < kSegments) cum += weights[i];
  }
  gm.warp_knots_y.back() = 1.0;

  std::uniform_real_distribution<double> amp(0.08, 0.25), freq(0.5, 3.0), phase(0.0, 2.0 * kPi);
  for (auto* coef : {&gm.baseline_m1, &gm.baseline_m2}) {
    for (int j = 0; j < 3; ++j) {
      coef->push_back(amp(rng));
      coef->push_back(freq(rng));
      coef->push_back(phase(rng));
    }
  }
  gm.validate();
  return gm;
}

ClassTemplate gen_class_template(int class_id, std::uint64_t seed) {
  Rng rng = make_rng(seed, "class-template", static_cast<std::uint64_t>(class_id));
  ClassTemplate tpl;
  tpl.class_id = class_id;
  std::uniform_int_distribution<int> n_peaks_dist(3, 12);
  const int n_peaks = n_peaks_dist(rng);
  std::uniform_real_distribution<double> pos(0.05, 0.95);
  std::uniform_real_distribution<double> width(0.005, 0.02);
  std::uniform_real_distribution<double> ampl(0.2, 1.0);
  for (int p = 0; p < n_peaks; ++p) {
    double candidate = pos(rng);
    // Enforce a minimum separation so peaks stay resolvable on the grid.
    bool ok = false;
    while (!ok) {
      ok = true;
      for (double existing : tpl.peak_positions) {
        if (std::abs(existing - candidate) < 0.012) {
          candidate = pos(rng);
          ok = false;
          break;
        }
      }
    }
    tpl.peak_positions.push_back(candidate);
    tpl.peak_widths.push_back(width(rng));
    tpl.peak_amplitudes.push_back(ampl(rng));
  }
  tpl.validate();
  return tpl;
}

data::Spectrum render(const ClassTemplate& tpl, Modality modality, const GapModel& gap,
                      const data::GridConfig& grid, Rng& rng, const std::string& source_id) {
  tpl.validate();
  gap.validate();
  grid.validate();

  data::Spectrum s;
  s.modality = modality;
  s.class_id = tpl.class_id;
  s.source_id = source_id;
  s.values.assign(grid.length, 0.0);

  const bool warped = modality == Modality::M2;
  for (size_t p = 0; p < tpl.peak_positions.size(); ++p) {
    const double center = warped ? gap.warp(tpl.peak_positions[p]) : tpl.peak_positions[p];
    const double amp =
        tpl.peak_amplitudes[p] *
        (warped ? gap.amplitude_remap(tpl.class_id, static_cast<int>(p)) : 1.0);
    const double w = tpl.peak_widths[p];
    for (int i = 0; i < grid.length; ++i) {
      const double t = static_cast<double>(i) / (grid.length - 1);
      const double d = (t - center) / w;
      if (std::abs(d) < 8.0) s.values[i] += amp * std::exp(-0.5 * d * d);
    }
  }
  for (int i = 0; i < grid.length; ++i) {
    const double t = static_cast<double>(i) / (grid.length - 1);
    s.values[i] += gap.baseline(modality, t);
  }
  if (gap.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, gap.noise_sigma);
    for (double& v : s.values) v += noise(rng);
  }
  return data::normalize(s);
}

data::Dataset gen_dataset(const SynthSpec& spec, const data::GridConfig& grid) {
  spec.validate();
  const GapModel gap = make_gap_model(spec.gap_level, spec.noise_sigma,
                                      derive_seed(spec.seed, "gap-model"));

  // Integer means give exact per-class counts; fractional means randomize as
  // 1 + Poisson(mean - 1), which keeps the mean and guarantees >= 1.
  const auto count_for = [](double mean, Rng& rng) {
    if (mean == std::floor(mean)) return static_cast<int>(mean);
    std::poisson_distribution<int> extra(mean - 1.0);
    return 1 + extra(rng);
  };

  data::Dataset ds;
  ds.grid = grid;
  for (int c = 0; c < spec.n_classes; ++c) {
    const ClassTemplate tpl = gen_class_template(c, derive_seed(spec.seed, "templates"));
    Rng count_rng = make_rng(spec.seed, "counts", static_cast<std::uint64_t>(c));
    const int n1 = count_for(spec.per_class_m1, count_rng);
    const int n2 = count_for(spec.per_class_m2, count_rng);
    for (int i = 0; i < n1; ++i) {
      Rng rng = make_rng(spec.seed, "render-m1",
                         (static_cast<std::uint64_t>(c) << 20) ^ static_cast<std::uint64_t>(i));
      ds.spectra.push_back(render(tpl, Modality::M1, gap, grid, rng,
                                  "c" + std::to_string(c) + "_m1_" + std::to_string(i)));
    }
    for (int i = 0; i < n2; ++i) {
      Rng rng = make_rng(spec.seed, "render-m2",
                         (static_cast<std::uint64_t>(c) << 20) ^ static_cast<std::uint64_t>(i));
      ds.spectra.push_back(render(tpl, Modality::M2, gap, grid, rng,
                                  "c" + std::to_string(c) + "_m2_" + std::to_string(i)));
    }
  }
  ds.validate();
  return ds;
}

}  // namespace marrnet::synth
