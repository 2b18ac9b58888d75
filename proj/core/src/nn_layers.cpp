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

#include "marrnet/nn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace marrnet::nn {

void init_fan_in_uniform(Param& w, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : w.value) x = dist(rng);
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(int in_c_, int out_c_, int k_)
    : in_c(in_c_), out_c(out_c_), k(k_), w({out_c_, in_c_, k_}), b({out_c_}) {
  if (k % 2 == 0) throw InvalidConfig("Conv1d kernel must be odd");
}

Tensor Conv1d::forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts&) {
  if (x.c != in_c) throw ShapeMismatch("Conv1d: channel mismatch");
  const int L = x.l, pad = k / 2;
  Tensor y(x.n, out_c, L);
  for (int n = 0; n < x.n; ++n) {
    for (int co = 0; co < out_c; ++co) {
      double* yr = y.row(n, co);
      const double bias = b.value[co];
      for (int xx = 0; xx < L; ++xx) yr[xx] = bias;
      for (int ci = 0; ci < in_c; ++ci) {
        const double* xr = x.row(n, ci);
        const double* wr = &w.value[(static_cast<size_t>(co) * in_c + ci) * k];
        for (int t = 0; t < k; ++t) {
          const double wt = wr[t];
          const int off = t - pad;
          const int lo = std::max(0, -off), hi = std::min(L, L - off);
          for (int xx = lo; xx < hi; ++xx) yr[xx] += wt * xr[xx + off];
        }
      }
    }
  }
  ctx.t = {x};
  return y;
}

Tensor Conv1d::backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) {
  const Tensor& x = ctx.t[0];
  const int L = x.l, pad = k / 2;
  require_shape(dy, x.n, out_c, L, "Conv1d::backward");
  Tensor dx(x.n, in_c, L);
  for (int n = 0; n < x.n; ++n) {
    for (int co = 0; co < out_c; ++co) {
      const double* dyr = dy.row(n, co);
      if (accum_params) {
        double sum = 0.0;
        for (int xx = 0; xx < L; ++xx) sum += dyr[xx];
        b.grad[co] += sum;
      }
      for (int ci = 0; ci < in_c; ++ci) {
        const double* xr = x.row(n, ci);
        double* dxr = dx.row(n, ci);
        const size_t wbase = (static_cast<size_t>(co) * in_c + ci) * k;
        for (int t = 0; t < k; ++t) {
          const int off = t - pad;
          const int lo = std::max(0, -off), hi = std::min(L, L - off);
          const double wt = w.value[wbase + t];
          double gw = 0.0;
          for (int xx = lo; xx < hi; ++xx) {
            dxr[xx + off] += wt * dyr[xx];
            gw += dyr[xx] * xr[xx + off];
          }
          if (accum_params) w.grad[wbase + t] += gw;
        }
      }
    }
  }
  return dx;
}

void Conv1d::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".w", w);
  fn(prefix + ".b", b);
}

void Conv1d::init_weights(Rng& rng) { init_fan_in_uniform(w, in_c * k, rng); }

// ------------------------------------------------------- ConvTranspose2x

ConvTranspose2x::ConvTranspose2x(int in_c_, int out_c_)
    : in_c(in_c_), out_c(out_c_), w({in_c_, out_c_, 2}), b({out_c_}) {}

Tensor ConvTranspose2x::forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts&) {
  if (x.c != in_c) throw ShapeMismatch("ConvTranspose2x: channel mismatch");
  const int L = x.l;
  Tensor y(x.n, out_c, 2 * L);
  for (int n = 0; n < x.n; ++n) {
    for (int co = 0; co < out_c; ++co) {
      double* yr = y.row(n, co);
      const double bias = b.value[co];
      for (int j = 0; j < 2 * L; ++j) yr[j] = bias;
      for (int ci = 0; ci < in_c; ++ci) {
        const double* xr = x.row(n, ci);
        const double w0 = w.value[(static_cast<size_t>(ci) * out_c + co) * 2];
        const double w1 = w.value[(static_cast<size_t>(ci) * out_c + co) * 2 + 1];
        for (int i = 0; i < L; ++i) {
          yr[2 * i] += w0 * xr[i];
          yr[2 * i + 1] += w1 * xr[i];
        }
      }
    }
  }
  ctx.t = {x};
  return y;
}

Tensor ConvTranspose2x::backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) {
  const Tensor& x = ctx.t[0];
  const int L = x.l;
  require_shape(dy, x.n, out_c, 2 * L, "ConvTranspose2x::backward");
  Tensor dx(x.n, in_c, L);
  for (int n = 0; n < x.n; ++n) {
    for (int co = 0; co < out_c; ++co) {
      const double* dyr = dy.row(n, co);
      if (accum_params) {
        double sum = 0.0;
        for (int j = 0; j < 2 * L; ++j) sum += dyr[j];
        b.grad[co] += sum;
      }
      for (int ci = 0; ci < in_c; ++ci) {
        const double* xr = x.row(n, ci);
        double* dxr = dx.row(n, ci);
        const size_t wbase = (static_cast<size_t>(ci) * out_c + co) * 2;
        const double w0 = w.value[wbase], w1 = w.value[wbase + 1];
        double g0 = 0.0, g1 = 0.0;
        for (int i = 0; i < L; ++i) {
          const double d0 = dyr[2 * i], d1 = dyr[2 * i + 1];
          dxr[i] += w0 * d0 + w1 * d1;
          g0 += d0 * xr[i];
          g1 += d1 * xr[i];
        }
        if (accum_params) {
          w.grad[wbase] += g0;
          w.grad[wbase + 1] += g1;
        }
      }
    }
  }
  return dx;
}

void ConvTranspose2x::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".w", w);
  fn(prefix + ".b", b);
}

void ConvTranspose2x::init_weights(Rng& rng) { init_fan_in_uniform(w, in_c * 2, rng); }

// ----------------------------------------------------------- BatchNorm1d

BatchNorm1d::BatchNorm1d(int c_, double eps_, double momentum_)
    : c(c_), eps(eps_), momentum(momentum_), gamma({c_}), beta({c_}),
      running_mean({c_}), running_var({c_}) {
  std::fill(gamma.value.begin(), gamma.value.end(), 1.0);
  std::fill(running_var.value.begin(), running_var.value.end(), 1.0);
}

Tensor BatchNorm1d::forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts& opts) {
  if (x.c != c) throw ShapeMismatch("BatchNorm1d: channel mismatch");
  const int L = x.l;
  const double m = static_cast<double>(x.n) * L;
  Tensor y(x.n, c, L);
  Tensor xhat(x.n, c, L);
  std::vector<double> invstd(c);

  if (opts.mode == Mode::kTrain) {
    for (int j = 0; j < c; ++j) {
      double mean = 0.0;
      for (int n = 0; n < x.n; ++n) {
        const double* xr = x.row(n, j);
        for (int xx = 0; xx < L; ++xx) mean += xr[xx];
      }
      mean /= m;
      double var = 0.0;
      for (int n = 0; n < x.n; ++n) {
        const double* xr = x.row(n, j);
        for (int xx = 0; xx < L; ++xx) {
          const double d = xr[xx] - mean;
          var += d * d;
        }
      }
      var /= m;
      const double is = 1.0 / std::sqrt(var + eps);
      invstd[j] = is;
      const double g = gamma.value[j], bb = beta.value[j];
      for (int n = 0; n < x.n; ++n) {
        const double* xr = x.row(n, j);
        double* hr = xhat.row(n, j);
        double* yr = y.row(n, j);
        for (int xx = 0; xx < L; ++xx) {
          hr[xx] = (xr[xx] - mean) * is;
          yr[xx] = g * hr[xx] + bb;
        }
      }
      if (opts.stats_update) {
        running_mean.value[j] = (1.0 - momentum) * running_mean.value[j] + momentum * mean;
        running_var.value[j] = (1.0 - momentum) * running_var.value[j] + momentum * var;
      }
    }
  } else {
    for (int j = 0; j < c; ++j) {
      const double is = 1.0 / std::sqrt(running_var.value[j] + eps);
      invstd[j] = is;
      const double mean = running_mean.value[j];
      const double g = gamma.value[j], bb = beta.value[j];
      for (int n = 0; n < x.n; ++n) {
        const double* xr = x.row(n, j);
        double* hr = xhat.row(n, j);
        double* yr = y.row(n, j);
        for (int xx = 0; xx < L; ++xx) {
          hr[xx] = (xr[xx] - mean) * is;
          yr[xx] = g * hr[xx] + bb;
        }
      }
    }
  }

  ctx.t = {std::move(xhat)};
  ctx.d = {std::move(invstd)};
  ctx.idx = {{opts.mode == Mode::kTrain ? 1 : 0}};
  return y;
}

Tensor BatchNorm1d::backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) {
  const Tensor& xhat = ctx.t[0];
  const std::vector<double>& invstd = ctx.d[0];
  const bool train_mode = ctx.idx[0][0] == 1;
  require_shape(dy, xhat.n, c, xhat.l, "BatchNorm1d::backward");
  const int L = xhat.l;
  const double m = static_cast<double>(xhat.n) * L;
  Tensor dx(xhat.n, c, L);

  for (int j = 0; j < c; ++j) {
    double sdy = 0.0, sdyx = 0.0;
    for (int n = 0; n < xhat.n; ++n) {
      const double* dyr = dy.row(n, j);
      const double* hr = xhat.row(n, j);
      for (int xx = 0; xx < L; ++xx) {
        sdy += dyr[xx];
        sdyx += dyr[xx] * hr[xx];
      }
    }
    if (accum_params) {
      gamma.grad[j] += sdyx;
      beta.grad[j] += sdy;
    }
    const double g = gamma.value[j], is = invstd[j];
    if (train_mode) {
      const double c1 = sdy / m, c2 = sdyx / m;
      for (int n = 0; n < xhat.n; ++n) {
        const double* dyr = dy.row(n, j);
        const double* hr = xhat.row(n, j);
        double* dxr = dx.row(n, j);
        for (int xx = 0; xx < L; ++xx) dxr[xx] = g * is * (dyr[xx] - c1 - hr[xx] * c2);
      }
    } else {
      // Running statistics are constants in eval mode.
      for (int n = 0; n < xhat.n; ++n) {
        const double* dyr = dy.row(n, j);
        double* dxr = dx.row(n, j);
        for (int xx = 0; xx < L; ++xx) dxr[xx] = g * is * dyr[xx];
      }
    }
  }
  return dx;
}

void BatchNorm1d::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".gamma", gamma);
  fn(prefix + ".beta", beta);
}

void BatchNorm1d::visit_buffers(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".running_mean", running_mean);
  fn(prefix + ".running_var", running_var);
}

// ------------------------------------------------------------ activations

Tensor ReLU::forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts&) {
  Tensor y = x;
  for (double& v : y.v) v = v > 0.0 ? v : 0.0;
  ctx.t = {x};
  return y;
}

Tensor ReLU::backward(const LayerCtx& ctx, const Tensor& dy, bool) {
  const Tensor& x = ctx.t[0];
  if (!dy.same_shape(x)) throw ShapeMismatch("ReLU::backward");
  Tensor dx = dy;
  for (size_t i = 0; i < dx.v.size(); ++i)
    if (x.v[i] <= 0.0) dx.v[i] = 0.0;
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts&) {
  Tensor y = x;
  for (double& v : y.v) v = 1.0 / (1.0 + std::exp(-v));
  ctx.t = {y};
  return y;
}

Tensor Sigmoid::backward(const LayerCtx& ctx, const Tensor& dy, bool) {
  const Tensor& y = ctx.t[0];
  if (!dy.same_shape(y)) throw ShapeMismatch("Sigmoid::backward");
  Tensor dx = dy;
  for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= y.v[i] * (1.0 - y.v[i]);
  return dx;
}

// --------------------------------------------------------------- MaxPool2

Tensor MaxPool2::forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts&) {
  if (x.l % 2 != 0) throw ShapeMismatch("MaxPool2 requires even length");
  const int L = x.l / 2;
  Tensor y(x.n, x.c, L);
  std::vector<int> arg(static_cast<size_t>(x.n) * x.c * L);
  size_t a = 0;
  for (int n = 0; n < x.n; ++n) {
    for (int j = 0; j < x.c; ++j) {
      const double* xr = x.row(n, j);
      double* yr = y.row(n, j);
      for (int xx = 0; xx < L; ++xx) {
        const double l = xr[2 * xx], r = xr[2 * xx + 1];
        if (l >= r) {
          yr[xx] = l;
          arg[a++] = 2 * xx;
        } else {
          yr[xx] = r;
          arg[a++] = 2 * xx + 1;
        }
      }
    }
  }
  ctx.idx = {std::move(arg), {x.n, x.c, x.l}};
  return y;
}

Tensor MaxPool2::backward(const LayerCtx& ctx, const Tensor& dy, bool) {
  const int sn = ctx.idx[1][0], sc = ctx.idx[1][1], sl = ctx.idx[1][2];
  require_shape(dy, sn, sc, sl / 2, "MaxPool2::backward");
  Tensor dx(sn, sc, sl);
  const std::vector<int>& arg = ctx.idx[0];
  size_t a = 0;
  for (int n = 0; n < sn; ++n) {
    for (int j = 0; j < sc; ++j) {
      const double* dyr = dy.row(n, j);
      double* dxr = dx.row(n, j);
      for (int xx = 0; xx < sl / 2; ++xx) dxr[arg[a++]] += dyr[xx];
    }
  }
  return dx;
}

// ----------------------------------------------------------------- Linear

Linear::Linear(int in_features_, int out_features_)
    : in_features(in_features_), out_features(out_features_),
      w({out_features_, in_features_}), b({out_features_}) {}

Tensor Linear::forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts&) {
  if (x.c * x.l != in_features) throw ShapeMismatch("Linear: feature size mismatch");
  Tensor y(x.n, out_features, 1);
  for (int n = 0; n < x.n; ++n) {
    const double* xr = x.row(n, 0);
    for (int o = 0; o < out_features; ++o) {
      const double* wr = &w.value[static_cast<size_t>(o) * in_features];
      double acc = b.value[o];
      for (int f = 0; f < in_features; ++f) acc += wr[f] * xr[f];
      y.at(n, o, 0) = acc;
    }
  }
  ctx.t = {x};
  return y;
}

Tensor Linear::backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) {
  const Tensor& x = ctx.t[0];
  require_shape(dy, x.n, out_features, 1, "Linear::backward");
  Tensor dx(x.n, x.c, x.l);
  for (int n = 0; n < x.n; ++n) {
    const double* xr = x.row(n, 0);
    double* dxr = dx.row(n, 0);
    for (int o = 0; o < out_features; ++o) {
      const double g = dy.at(n, o, 0);
      const size_t wbase = static_cast<size_t>(o) * in_features;
      if (accum_params) {
        b.grad[o] += g;
        for (int f = 0; f < in_features; ++f) w.grad[wbase + f] += g * xr[f];
      }
      for (int f = 0; f < in_features; ++f) dxr[f] += w.value[wbase + f] * g;
    }
  }
  return dx;
}

void Linear::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".w", w);
  fn(prefix + ".b", b);
}

void Linear::init_weights(Rng& rng) { init_fan_in_uniform(w, in_features, rng); }

// ---------------------------------------------------------------- Reshape

Tensor Reshape::forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts&) {
  if (x.c * x.l != c_out * l_out) throw ShapeMismatch("Reshape: element count mismatch");
  Tensor y(x.n, c_out, l_out);
  y.v = x.v;
  ctx.idx = {{x.c, x.l}};
  return y;
}

Tensor Reshape::backward(const LayerCtx& ctx, const Tensor& dy, bool) {
  const int ci = ctx.idx[0][0], li = ctx.idx[0][1];
  require_shape(dy, dy.n, c_out, l_out, "Reshape::backward");
  Tensor dx(dy.n, ci, li);
  dx.v = dy.v;
  return dx;
}

// ------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, std::vector<LayerCtx>& ctx,
                           const ForwardOpts& opts) const {
  ctx.assign(layers_.size(), LayerCtx{});
  Tensor cur = x;
  for (size_t i = 0; i < layers_.size(); ++i) cur = layers_[i]->forward(cur, ctx[i], opts);
  return cur;
}

Tensor Sequential::backward(const std::vector<LayerCtx>& ctx, const Tensor& dy,
                            bool accum_params) const {
  Tensor cur = dy;
  for (size_t i = layers_.size(); i-- > 0;) cur = layers_[i]->backward(ctx[i], cur, accum_params);
  return cur;
}

void Sequential::visit_params(const std::string& prefix, const ParamVisitor& fn) const {
  for (size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->visit_params(prefix + "." + std::to_string(i), fn);
}

void Sequential::visit_buffers(const std::string& prefix, const ParamVisitor& fn) const {
  for (size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->visit_buffers(prefix + "." + std::to_string(i), fn);
}

void Sequential::init_weights(Rng& rng) const {
  for (const auto& l : layers_) l->init_weights(rng);
}

}  // namespace marrnet::nn
