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

#include "marrnet/data/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "marrnet/data/pipeline.hpp"

#include <json.hpp>

namespace marrnet::data {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

Manifest read_manifest(const std::filesystem::path& manifest_path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(manifest_path.string() + ": " + e.what());
  }
  Manifest m;
  try {
    m.grid.min = j.at("grid").at("min").get<double>();
    m.grid.max = j.at("grid").at("max").get<double>();
    m.grid.length = j.at("grid").at("length").get<int>();
    for (const auto& r : j.at("records")) {
      ManifestRecord rec;
      rec.path = r.at("path").get<std::string>();
      rec.modality = modality_from_string(r.at("modality").get<std::string>());
      rec.class_id = r.at("class_id").get<int>();
      if (rec.class_id < 0) throw MalformedFile("manifest: negative class_id");
      m.records.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(manifest_path.string() + ": " + e.what());
  }
  m.grid.validate();
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& manifest_path) {
  ordered_json j;
  j["version"] = 1;
  j["grid"] = {{"min", manifest.grid.min}, {"max", manifest.grid.max},
               {"length", manifest.grid.length}};
  j["records"] = ordered_json::array();
  for (const auto& r : manifest.records) {
    j["records"].push_back(
        {{"path", r.path}, {"modality", to_string(r.modality)}, {"class_id", r.class_id}});
  }
  write_text_file(manifest_path, j.dump(2) + "\n");
}

void write_spectrum_file(const std::filesystem::path& path, const std::vector<double>& positions,
                         const std::vector<double>& intensities) {
  if (positions.size() != intensities.size())
    throw ShapeMismatch("write_spectrum_file: positions/intensities size mismatch");
  std::string out;
  out.reserve(positions.size() * 24);
  for (size_t i = 0; i < positions.size(); ++i) {
    out += format_double(positions[i]);
    out += ',';
    out += format_double(intensities[i]);
    out += '\n';
  }
  write_text_file(path, out);
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();
  Dataset ds;
  ds.grid = m.grid;
  ds.spectra.reserve(m.records.size());
  for (const auto& rec : m.records) {
    const std::filesystem::path file = base / rec.path;
    RawSpectrum raw = parse_spectrum_file(read_text_file(file), rec.modality, rec.class_id,
                                          rec.path);
    ds.spectra.push_back(normalize(resample(raw, ds.grid)));
  }
  ds.validate();
  return ds;
}

}  // namespace marrnet::data
