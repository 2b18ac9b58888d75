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

namespace marrnet::data {

/// K (anchor, positive, negative) triplets. Anchors carry anchor_modality;
/// positives and negatives carry the other modality. positive_k shares the
/// anchor's class, negative_k does not.
struct TripletBatch {
  Modality anchor_modality = Modality::M1;
  std::vector<Spectrum> anchors;
  std::vector<Spectrum> positives;
  std::vector<Spectrum> negatives;

  int k() const { return static_cast<int>(anchors.size()); }
  void validate() const;
};

/// Draws K triplets with anchor class uniform over classes that have both
/// modalities and negative class uniform over the remaining such classes
/// (no hard mining). Spectra within a class are drawn uniformly.
TripletBatch sample_triplet_batch(const Dataset& train_set, int k, Rng& rng,
                                  Modality anchor_modality = Modality::M1);

}  // namespace marrnet::data
