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

#include "marrnet/eval/occlusion.hpp"

#include <algorithm>
#include <cmath>

namespace marrnet::eval {

void OcclusionCurve::validate() const {
  if (mask_ratios.size() != accuracy.size())
    throw ShapeMismatch("OcclusionCurve: ratio/accuracy size mismatch");
  for (double a : accuracy)
    if (a < 0.0 || a > 1.0) throw Error("OcclusionCurve: accuracy outside [0,1]");
}

data::Spectrum mask_spectrum(const data::Spectrum& s, double ratio, int position, double fill) {
  if (!(ratio >= 0.0 && ratio < 1.0))
    throw InvalidWindow("mask_spectrum: ratio must be in [0, 1)");
  const int L = s.length();
  const int len = static_cast<int>(std::floor(ratio * L));
  if (position < 0 || position + len > L)
    throw InvalidWindow("mask_spectrum: window [" + std::to_string(position) + ", " +
                        std::to_string(position + len) + ") does not fit in length " +
                        std::to_string(L));
  data::Spectrum out = s;
  std::fill(out.values.begin() + position, out.values.begin() + position + len, fill);
  return out;
}

namespace {

struct RatioTally {
  long successes = 0;
  long draws = 0;
};

OcclusionCurve tally_to_curve(const std::vector<double>& ratios,
                              const std::vector<RatioTally>& tally, int n_masks, double fill) {
  OcclusionCurve curve;
  curve.mask_ratios = ratios;
  curve.masks_per_sample = n_masks;
  curve.fill_value = fill;
  for (const auto& t : tally) {
    const double p = t.draws > 0 ? static_cast<double>(t.successes) / t.draws : 0.0;
    curve.accuracy.push_back(p);
    curve.stderr_per_ratio.push_back(t.draws > 0 ? std::sqrt(p * (1.0 - p) / t.draws) : 0.0);
    curve.n_draws.push_back(t.draws);
  }
  curve.validate();
  return curve;
}

}  // namespace

OcclusionCurve occlusion_test(const Embedder& embedder, const data::Dataset& test_set,
                              const std::vector<double>& ratios, int n_masks, double fill,
                              std::uint64_t seed) {
  if (n_masks < 1) throw InvalidConfig("occlusion_test: n_masks must be >= 1");
  const int L = test_set.grid.length;
  const EmbeddingTable table = embed_all(embedder, test_set);

  // Split into per-modality galleries (unmasked embeddings).
  EmbeddingTable gallery_m1, gallery_m2;
  std::vector<int> labels_m1, labels_m2;
  for (const auto& r : table.rows) {
    if (r.modality == Modality::M1) {
      gallery_m1.rows.push_back(r);
      labels_m1.push_back(r.class_id);
    } else {
      gallery_m2.rows.push_back(r);
      labels_m2.push_back(r.class_id);
    }
  }
  if (gallery_m1.rows.empty() || gallery_m2.rows.empty())
    throw EmptyGallery("occlusion_test: a modality side is empty");

  // Keep only queries whose unmasked top-1 match is correct.
  struct Query {
    const data::Spectrum* spectrum;
    const EmbeddingTable* gallery;
    const std::vector<int>* gallery_labels;
  };
  std::vector<Query> queries;
  for (size_t i = 0; i < test_set.spectra.size(); ++i) {
    const data::Spectrum& s = test_set.spectra[i];
    const EmbeddingTable& gal = s.modality == Modality::M1 ? gallery_m2 : gallery_m1;
    const std::vector<int>& gl = s.modality == Modality::M1 ? labels_m2 : labels_m1;
    const auto order = rank(table.rows[i].embedding, gal);
    if (gl[order[0]] == s.class_id) queries.push_back({&s, &gal, &gl});
  }

  std::vector<RatioTally> tally(ratios.size());
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    const Query& q = queries[qi];
    for (size_t ri = 0; ri < ratios.size(); ++ri) {
      const int len = static_cast<int>(std::floor(ratios[ri] * L));
      Rng rng = make_rng(seed, "occlusion-mask", (static_cast<std::uint64_t>(qi) << 16) ^ ri);
      std::uniform_int_distribution<int> pos_dist(0, L - len);
      for (int m = 0; m < n_masks; ++m) {
        const data::Spectrum masked = mask_spectrum(*q.spectrum, ratios[ri], pos_dist(rng), fill);
        const auto order = rank(embedder(masked), *q.gallery);
        tally[ri].draws++;
        if ((*q.gallery_labels)[order[0]] == q.spectrum->class_id) tally[ri].successes++;
      }
    }
  }
  return tally_to_curve(ratios, tally, n_masks, fill);
}

OcclusionCurve within_modality_baseline(const Embedder& embedder,
                                        const std::vector<data::Spectrum>& spectra,
                                        const std::vector<double>& ratios, int n_masks,
                                        double fill, std::uint64_t seed) {
  if (spectra.size() < 2)
    throw InvalidConfig("within_modality_baseline: need >= 2 spectra");
  if (n_masks < 1) throw InvalidConfig("within_modality_baseline: n_masks must be >= 1");
  for (const auto& s : spectra)
    if (s.modality != spectra.front().modality)
      throw Error("within_modality_baseline: spectra must share one modality");
  const int L = spectra.front().length();

  std::vector<std::vector<double>> ref;
  ref.reserve(spectra.size());
  for (const auto& s : spectra) ref.push_back(embedder(s));

  const auto sq_dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
  };

  std::vector<RatioTally> tally(ratios.size());
  for (size_t si = 0; si < spectra.size(); ++si) {
    for (size_t ri = 0; ri < ratios.size(); ++ri) {
      const int len = static_cast<int>(std::floor(ratios[ri] * L));
      Rng rng = make_rng(seed, "within-mask", (static_cast<std::uint64_t>(si) << 16) ^ ri);
      std::uniform_int_distribution<int> pos_dist(0, L - len);
      for (int m = 0; m < n_masks; ++m) {
        const data::Spectrum masked = mask_spectrum(spectra[si], ratios[ri], pos_dist(rng), fill);
        const std::vector<double> emb = embedder(masked);
        double best = sq_dist(emb, ref[0]);
        for (size_t j = 1; j < ref.size(); ++j) best = std::min(best, sq_dist(emb, ref[j]));
        tally[ri].draws++;
        // Success when the sample itself attains the minimum distance.
        if (sq_dist(emb, ref[si]) <= best) tally[ri].successes++;
      }
    }
  }
  return tally_to_curve(ratios, tally, n_masks, fill);
}

}  // namespace marrnet::eval
