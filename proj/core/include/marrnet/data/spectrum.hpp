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

#include <string>
#include <vector>

#include "marrnet/common.hpp"

namespace marrnet::data {

/// A spectrum as read from disk: discrete (position, intensity) samples on
/// an arbitrary ascending axis (Raman shift or wavenumber, cm^-1).
struct RawSpectrum {
  std::vector<double> positions;
  std::vector<double> intensities;
  Modality modality = Modality::M1;
  int class_id = 0;
  std::string source_id;

  void validate() const;
};

/// A spectrum on the common grid: fixed length, min-max normalized to [0,1].
/// The unit of all matching.
struct Spectrum {
  std::vector<double> values;
  Modality modality = Modality::M1;
  int class_id = 0;
  std::string source_id;

  int length() const { return static_cast<int>(values.size()); }
};

/// The resampling grid shared by both modalities.
struct GridConfig {
  double min = 100.0;
  double max = 4000.0;
  int length = 1024;

  void validate() const {
    if (length < 2 || !(min < max)) throw DegenerateGrid("GridConfig: need length >= 2 and min < max");
  }
  bool operator==(const GridConfig&) const = default;
};

/// Full in-memory dataset; spectra are kept in a stable order.
struct Dataset {
  std::vector<Spectrum> spectra;
  GridConfig grid;

  std::vector<int> class_ids() const;
  /// Indices of spectra with the given class and modality.
  std::vector<size_t> find(int class_id, Modality m) const;
  /// Classes that have at least one spectrum of each modality.
  std::vector<int> pairable_classes() const;
  void validate() const;
};

}  // namespace marrnet::data
