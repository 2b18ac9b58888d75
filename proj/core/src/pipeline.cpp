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

#include "marrnet/data/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace marrnet::data {

void RawSpectrum::validate() const {
  if (positions.size() != intensities.size() || positions.size() < 2)
    throw MalformedFile("RawSpectrum: need >= 2 (position, intensity) pairs");
  for (size_t i = 0; i + 1 < positions.size(); ++i)
    if (!(positions[i] < positions[i + 1]))
      throw MalformedFile("RawSpectrum: positions must be strictly ascending");
  for (double p : positions)
    if (!std::isfinite(p)) throw NonFiniteValue("RawSpectrum: non-finite position");
  for (double v : intensities)
    if (!std::isfinite(v)) throw NonFiniteValue("RawSpectrum: non-finite intensity");
}

std::vector<int> Dataset::class_ids() const {
  std::set<int> ids;
  for (const auto& s : spectra) ids.insert(s.class_id);
  return std::vector<int>(ids.begin(), ids.end());
}

std::vector<size_t> Dataset::find(int class_id, Modality m) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < spectra.size(); ++i)
    if (spectra[i].class_id == class_id && spectra[i].modality == m) out.push_back(i);
  return out;
}

std::vector<int> Dataset::pairable_classes() const {
  std::map<int, std::pair<bool, bool>> seen;
  for (const auto& s : spectra) {
    auto& f = seen[s.class_id];
    (s.modality == Modality::M1 ? f.first : f.second) = true;
  }
  std::vector<int> out;
  for (const auto& [id, f] : seen)
    if (f.first && f.second) out.push_back(id);
  return out;
}

void Dataset::validate() const {
  grid.validate();
  for (const auto& s : spectra) {
    if (s.length() != grid.length)
      throw ShapeMismatch("Dataset: spectrum length " + std::to_string(s.length()) +
                          " != grid length " + std::to_string(grid.length));
    for (double v : s.values) {
      if (!std::isfinite(v)) throw NonFiniteValue("Dataset: non-finite value in " + s.source_id);
      if (v < 0.0 || v > 1.0) throw Error("Dataset: value out of [0,1] in " + s.source_id);
    }
  }
}

namespace {

bool parse_double(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

RawSpectrum parse_spectrum_file(const std::string& text, Modality modality, int class_id,
                                const std::string& source_id) {
  std::map<double, std::pair<double, int>> acc;  // position -> (sum, count)
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    if (line[start] == '#' || line[start] == '=') continue;

    std::string body = line.substr(start);
    std::replace(body.begin(), body.end(), ',', ' ');
    std::istringstream ls(body);
    std::string a, b, extra;
    if (!(ls >> a >> b))
      throw MalformedFile(source_id + ": expected 'position, intensity', got: " + line);
    if (ls >> extra)
      throw MalformedFile(source_id + ": trailing token '" + extra + "' in: " + line);
    double pos = 0, val = 0;
    if (!parse_double(a, pos) || !parse_double(b, val))
      throw MalformedFile(source_id + ": non-numeric token in: " + line);
    if (!std::isfinite(pos) || !std::isfinite(val))
      throw NonFiniteValue(source_id + ": non-finite value in: " + line);
    auto& slot = acc[pos];
    slot.first += val;
    slot.second += 1;
  }
  if (acc.size() < 2) throw MalformedFile(source_id + ": fewer than 2 data points");

  RawSpectrum raw;
  raw.modality = modality;
  raw.class_id = class_id;
  raw.source_id = source_id;
  raw.positions.reserve(acc.size());
  raw.intensities.reserve(acc.size());
  for (const auto& [pos, sv] : acc) {
    raw.positions.push_back(pos);
    raw.intensities.push_back(sv.first / sv.second);
  }
  raw.validate();
  return raw;
}

Spectrum resample(const RawSpectrum& raw, const GridConfig& grid) {
  grid.validate();
  raw.validate();
  Spectrum s;
  s.modality = raw.modality;
  s.class_id = raw.class_id;
  s.source_id = raw.source_id;
  s.values.resize(grid.length);

  const double lo = raw.positions.front(), hi = raw.positions.back();
  const double step = (grid.max - grid.min) / (grid.length - 1);
  size_t seg = 0;
  for (int i = 0; i < grid.length; ++i) {
    const double x = grid.min + i * step;
    if (x < lo || x > hi) {
      s.values[i] = 0.0;
      continue;
    }
    while (seg + 2 < raw.positions.size() && raw.positions[seg + 1] < x) ++seg;
    const double x0 = raw.positions[seg], x1 = raw.positions[seg + 1];
    const double y0 = raw.intensities[seg], y1 = raw.intensities[seg + 1];
    const double t = (x - x0) / (x1 - x0);
    s.values[i] = y0 + t * (y1 - y0);
  }
  return s;
}

Spectrum normalize(const Spectrum& s) {
  for (double v : s.values)
    if (!std::isfinite(v)) throw NonFiniteValue("normalize: non-finite input");
  Spectrum out = s;
  const auto [mn_it, mx_it] = std::minmax_element(s.values.begin(), s.values.end());
  const double mn = *mn_it, mx = *mx_it;
  if (mx == mn) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  // True division so the max lands on exactly 1.0 and repeated
  // normalization is a bitwise no-op.
  const double range = mx - mn;
  for (double& v : out.values) v = (v - mn) / range;
  return out;
}

Spectrum augment(const Spectrum& s, const AugmentPolicy& policy, Rng& rng) {
  policy.validate();
  if (!policy.enabled) return s;
  Spectrum out = s;
  const int L = s.length();

  if (policy.shift_max > 0) {
    std::uniform_int_distribution<int> dist(-policy.shift_max, policy.shift_max);
    const int shift = dist(rng);
    if (shift != 0) {
      std::vector<double> shifted(L, 0.0);
      for (int i = 0; i < L; ++i) {
        const int j = i - shift;
        if (j >= 0 && j < L) shifted[i] = s.values[j];
      }
      out.values = std::move(shifted);
    }
  }
  if (policy.noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, policy.noise_sigma);
    for (double& v : out.values) v += noise(rng);
  }
  if (policy.scale_min != 1.0 || policy.scale_max != 1.0) {
    std::uniform_real_distribution<double> dist(policy.scale_min, policy.scale_max);
    const double scale = dist(rng);
    for (double& v : out.values) v *= scale;
  }
  for (double& v : out.values) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace marrnet::data
