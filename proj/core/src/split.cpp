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

#include "marrnet/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

namespace marrnet::data {

void SplitPlan::validate(const std::vector<int>& all_classes) const {
  std::set<int> seen;
  for (const auto* part : {&train_classes, &val_classes, &test_classes}) {
    for (int c : *part) {
      if (!seen.insert(c).second)
        throw Error("SplitPlan: class " + std::to_string(c) + " appears in two parts");
    }
  }
  if (seen.size() != all_classes.size())
    throw Error("SplitPlan: parts do not exhaust the class set");
  for (int c : all_classes)
    if (!seen.count(c)) throw Error("SplitPlan: class " + std::to_string(c) + " missing");
}

SplitPlan make_splits(const std::vector<int>& class_ids, std::uint64_t seed, int replicate) {
  if (replicate < 0 || replicate > 4)
    throw InvalidConfig("make_splits: replicate must be in 0..4");
  const int n = static_cast<int>(class_ids.size());
  if (n < 12) throw InsufficientClasses("make_splits: need >= 12 classes, got " + std::to_string(n));

  // 10:1:1 class ratio; exact 300/30/30 at the canonical 360.
  const int n_val = std::max(1, static_cast<int>(std::lround(n / 12.0)));
  const int n_test = n_val;
  const int n_train = n - n_val - n_test;

  std::vector<int> order(class_ids);
  std::sort(order.begin(), order.end());
  Rng rng = make_rng(seed, "split", static_cast<std::uint64_t>(replicate));
  std::shuffle(order.begin(), order.end(), rng);

  SplitPlan plan;
  plan.partition_seed = seed;
  plan.replicate_index = replicate;
  plan.train_classes.assign(order.begin(), order.begin() + n_train);
  plan.val_classes.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  plan.test_classes.assign(order.begin() + n_train + n_val, order.end());
  std::sort(plan.train_classes.begin(), plan.train_classes.end());
  std::sort(plan.val_classes.begin(), plan.val_classes.end());
  std::sort(plan.test_classes.begin(), plan.test_classes.end());
  plan.validate(class_ids);
  return plan;
}

Dataset subset(const Dataset& full, const std::vector<int>& classes) {
  std::unordered_set<int> keep(classes.begin(), classes.end());
  Dataset out;
  out.grid = full.grid;
  for (const auto& s : full.spectra)
    if (keep.count(s.class_id)) out.spectra.push_back(s);
  return out;
}

}  // namespace marrnet::data
