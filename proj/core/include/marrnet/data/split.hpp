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

/// Disjoint class partition for one experiment replicate. With 360 classes
/// the sizes are 300/30/30; smaller datasets keep the same 10:1:1 ratio
/// (val and test get round(n/12) classes each, at least one, and train takes
/// the rest).
struct SplitPlan {
  std::uint64_t partition_seed = 0;
  int replicate_index = 0;
  std::vector<int> train_classes;
  std::vector<int> val_classes;
  std::vector<int> test_classes;

  void validate(const std::vector<int>& all_classes) const;
};

/// Deterministic partition of class ids for the given (seed, replicate).
/// Replicates 0..4 with one seed yield the protocol's five random partitions.
SplitPlan make_splits(const std::vector<int>& class_ids, std::uint64_t seed, int replicate);

/// Subset of the dataset restricted to the given classes (order preserved).
Dataset subset(const Dataset& full, const std::vector<int>& classes);

}  // namespace marrnet::data
