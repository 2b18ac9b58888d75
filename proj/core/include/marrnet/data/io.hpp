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

#include <filesystem>
#include <string>
#include <vector>

#include "marrnet/data/spectrum.hpp"

namespace marrnet::data {

/// One dataset manifest entry: a spectrum file plus its labels. Paths are
/// relative to the manifest's directory.
struct ManifestRecord {
  std::string path;
  Modality modality = Modality::M1;
  int class_id = 0;
};

/// Manifest JSON schema (documented in the README):
///   {"version": 1,
///    "grid": {"min": ..., "max": ..., "length": ...},
///    "records": [{"path": ..., "modality": "M1"|"M2", "class_id": ...}, ...]}
struct Manifest {
  GridConfig grid;
  std::vector<ManifestRecord> records;
};

Manifest read_manifest(const std::filesystem::path& manifest_path);
/// Serialization is canonical (fixed key order, stable float formatting), so
/// rewriting an identical manifest is byte-identical.
void write_manifest(const Manifest& manifest, const std::filesystem::path& manifest_path);

/// Two-column spectrum file ("position,intensity" lines, '#' comments).
/// Doubles are written with round-trip precision.
void write_spectrum_file(const std::filesystem::path& path, const std::vector<double>& positions,
                         const std::vector<double>& intensities);

/// Loads every manifest record through parse -> resample -> normalize.
Dataset load_dataset(const std::filesystem::path& manifest_path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace marrnet::data
