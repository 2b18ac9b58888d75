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

#include <cmath>
#include <cstddef>
#include <vector>

#include "marrnet/common.hpp"

namespace marrnet {

/// Dense (batch, channels, length) tensor of doubles, row-major with length
/// fastest. Double precision keeps finite-difference gradient checks tight.
struct Tensor {
  int n = 0;
  int c = 0;
  int l = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int n_, int c_, int l_) : n(n_), c(c_), l(l_), v(static_cast<size_t>(n_) * c_ * l_, 0.0) {}

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.n, t.c, t.l); }

  size_t size() const { return v.size(); }

  double& at(int i, int j, int x) { return v[(static_cast<size_t>(i) * c + j) * l + x]; }
  double at(int i, int j, int x) const { return v[(static_cast<size_t>(i) * c + j) * l + x]; }

  double* row(int i, int j) { return v.data() + (static_cast<size_t>(i) * c + j) * l; }
  const double* row(int i, int j) const {
    return v.data() + (static_cast<size_t>(i) * c + j) * l;
  }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && l == o.l; }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }

  Tensor& operator+=(const Tensor& o) {
    if (!same_shape(o)) throw ShapeMismatch("Tensor += shape mismatch");
    for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    return *this;
  }

  Tensor& scale(double s) {
    for (double& x : v) x *= s;
    return *this;
  }
};

inline void require_shape(const Tensor& t, int n, int c, int l, const char* who) {
  if (t.n != n || t.c != c || t.l != l)
    throw ShapeMismatch(std::string(who) + ": expected (" + std::to_string(n) + "," +
                        std::to_string(c) + "," + std::to_string(l) + "), got (" +
                        std::to_string(t.n) + "," + std::to_string(t.c) + "," +
                        std::to_string(t.l) + ")");
}

}  // namespace marrnet
