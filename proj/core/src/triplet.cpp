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

#include "marrnet/data/triplet.hpp"

namespace marrnet::data {

void TripletBatch::validate() const {
  if (anchors.size() != positives.size() || anchors.size() != negatives.size())
    throw ShapeMismatch("TripletBatch: anchor/positive/negative counts differ");
  if (anchors.empty()) throw ShapeMismatch("TripletBatch: empty batch");
  const Modality pm = other(anchor_modality);
  for (size_t i = 0; i < anchors.size(); ++i) {
    if (anchors[i].modality != anchor_modality)
      throw Error("TripletBatch: anchor modality mismatch at " + std::to_string(i));
    if (positives[i].modality != pm || negatives[i].modality != pm)
      throw Error("TripletBatch: positive/negative modality mismatch at " + std::to_string(i));
    if (anchors[i].class_id != positives[i].class_id)
      throw Error("TripletBatch: positive class differs from anchor at " + std::to_string(i));
    if (anchors[i].class_id == negatives[i].class_id)
      throw Error("TripletBatch: negative class equals anchor at " + std::to_string(i));
  }
}

TripletBatch sample_triplet_batch(const Dataset& train_set, int k, Rng& rng,
                                  Modality anchor_modality) {
  if (k < 1) throw InvalidConfig("sample_triplet_batch: k must be >= 1");
  const std::vector<int> eligible = train_set.pairable_classes();
  if (eligible.size() < 2)
    throw NotEnoughClasses("sample_triplet_batch: need >= 2 classes with both modalities");

  const Modality pm = other(anchor_modality);
  std::uniform_int_distribution<size_t> class_dist(0, eligible.size() - 1);

  TripletBatch batch;
  batch.anchor_modality = anchor_modality;
  batch.anchors.reserve(k);
  batch.positives.reserve(k);
  batch.negatives.reserve(k);
  for (int i = 0; i < k; ++i) {
    const size_t ai = class_dist(rng);
    size_t ni = class_dist(rng);
    while (ni == ai) ni = class_dist(rng);

    const auto pick = [&](int class_id, Modality m) -> const Spectrum& {
      const auto idx = train_set.find(class_id, m);
      std::uniform_int_distribution<size_t> d(0, idx.size() - 1);
      return train_set.spectra[idx[d(rng)]];
    };
    batch.anchors.push_back(pick(eligible[ai], anchor_modality));
    batch.positives.push_back(pick(eligible[ai], pm));
    batch.negatives.push_back(pick(eligible[ni], pm));
  }
  batch.validate();
  return batch;
}

}  // namespace marrnet::data
