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

// Central finite-difference gradient oracle shared by the unit tests and the
// acceptance suite. Independent of the library's backward passes: it only
// calls forward code through the supplied closure.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "marrnet/tensor.hpp"

namespace fdcheck {

struct Result {
  std::size_t checked = 0;
  std::size_t passed = 0;
  double worst_rel_err = 0.0;

  double pass_rate() const { return checked == 0 ? 1.0 : double(passed) / double(checked); }
};

/// Central difference (f(x+h) - f(x-h)) / 2h on the coordinates given; the
/// analytic gradient must already be stored in `analytic`. A coordinate
/// passes when |analytic - fd| <= atol + tol * max(|analytic|, |fd|); the
/// absolute floor absorbs FD cancellation noise on exactly-zero gradients
/// (e.g. a conv bias feeding a batch-norm layer).
inline Result compare_gradient(const std::function<double()>& f, double* x,
                               const double* analytic, const std::vector<std::size_t>& coords,
                               double h = 1e-6, double tol = 1e-4, double atol = 1e-7) {
  Result res;
  for (std::size_t i : coords) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f();
    x[i] = orig - h;
    const double fm = f();
    x[i] = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double diff = std::abs(analytic[i] - fd);
    const double rel = diff / std::max({1e-9, std::abs(analytic[i]), std::abs(fd)});
    res.checked++;
    if (diff <= atol + tol * std::max(std::abs(analytic[i]), std::abs(fd))) res.passed++;
    res.worst_rel_err = std::max(res.worst_rel_err, rel);
  }
  return res;
}

/// Evenly strided sample of up to n coordinate indices from [0, size).
inline std::vector<std::size_t> sample_coords(std::size_t size, std::size_t n) {
  std::vector<std::size_t> coords;
  if (size == 0) return coords;
  const std::size_t stride = std::max<std::size_t>(1, size / std::max<std::size_t>(1, n));
  for (std::size_t i = 0; i < size && coords.size() < n; i += stride) coords.push_back(i);
  return coords;
}

inline void fill_uniform(std::vector<double>& v, marrnet::Rng& rng, double lo = -1.0,
                         double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& x : v) x = dist(rng);
}

inline marrnet::Tensor random_tensor(int n, int c, int l, marrnet::Rng& rng, double lo = -1.0,
                                     double hi = 1.0) {
  marrnet::Tensor t(n, c, l);
  fill_uniform(t.v, rng, lo, hi);
  return t;
}

/// Weighted sum <y, r> used to reduce a tensor-valued op to a scalar so its
/// input gradient is r-weighted and checkable coordinate-wise.
inline double weighted_sum(const marrnet::Tensor& y, const marrnet::Tensor& r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * r.v[i];
  return acc;
}

}  // namespace fdcheck
