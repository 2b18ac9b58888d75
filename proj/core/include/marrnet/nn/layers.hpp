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

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "marrnet/common.hpp"
#include "marrnet/tensor.hpp"

namespace marrnet::nn {

enum class Mode { kTrain, kEval };

struct ForwardOpts {
  Mode mode = Mode::kEval;
  // When false, batch-norm running statistics are left untouched even in
  // train mode, so a train-mode forward is a pure function. Gradient checks
  // rely on this.
  bool stats_update = false;
};

/// A named dense array with its gradient accumulator.
struct Param {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;

  Param() = default;
  explicit Param(std::vector<int> s) : shape(std::move(s)) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    value.assign(n, 0.0);
    grad.assign(n, 0.0);
  }
  size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

using ParamVisitor = std::function<void(const std::string&, Param&)>;

/// Per-pass activation cache. Layers are stateless across passes: every
/// forward writes what its backward needs into the ctx it was handed, so a
/// single layer instance can have several in-flight passes (the encoders are
/// traversed by pair batches and triplet batches within one step).
struct LayerCtx {
  std::vector<Tensor> t;
  std::vector<std::vector<int>> idx;
  std::vector<std::vector<double>> d;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts& opts) = 0;
  /// Maps the upstream gradient dy to the input gradient. Parameter
  /// gradients are accumulated (+=) when accum_params is set; callers zero
  /// them at step boundaries.
  virtual Tensor backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) = 0;
  virtual void visit_params(const std::string& prefix, const ParamVisitor& fn) {
    (void)prefix;
    (void)fn;
  }
  virtual void visit_buffers(const std::string& prefix, const ParamVisitor& fn) {
    (void)prefix;
    (void)fn;
  }
  /// Draws fresh weights from rng (fan-in scaled uniform); layers without
  /// trainable weights keep their defaults.
  virtual void init_weights(Rng& rng) { (void)rng; }
};

/// 1D convolution, stride 1, odd kernel, zero-padded so length is preserved.
class Conv1d final : public Layer {
 public:
  Conv1d(int in_c, int out_c, int k);
  Tensor forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts& opts) override;
  Tensor backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;
  void init_weights(Rng& rng) override;

  int in_c, out_c, k;
  Param w;  // (out_c, in_c, k)
  Param b;  // (out_c)
};

/// Transposed 1D convolution with kernel 2 and stride 2: exact 2x upsampling
/// with non-overlapping taps.
class ConvTranspose2x final : public Layer {
 public:
  ConvTranspose2x(int in_c, int out_c);
  Tensor forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts& opts) override;
  Tensor backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;
  void init_weights(Rng& rng) override;

  int in_c, out_c;
  Param w;  // (in_c, out_c, 2)
  Param b;  // (out_c)
};

/// Per-channel batch normalization over (batch, length). Uses biased
/// variance for both batch statistics and running estimates.
class BatchNorm1d final : public Layer {
 public:
  explicit BatchNorm1d(int c, double eps = 1e-5, double momentum = 0.1);
  Tensor forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts& opts) override;
  Tensor backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;
  void visit_buffers(const std::string& prefix, const ParamVisitor& fn) override;

  int c;
  double eps, momentum;
  Param gamma, beta;               // (c)
  Param running_mean, running_var; // (c), buffers
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts& opts) override;
  Tensor backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) override;
};

class Sigmoid final : public Layer {
 public:
  Tensor forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts& opts) override;
  Tensor backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) override;
};

/// Max pooling with window 2 and stride 2. Requires even input length; ties
/// resolve to the left element.
class MaxPool2 final : public Layer {
 public:
  Tensor forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts& opts) override;
  Tensor backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) override;
};

/// Dense layer over the flattened (channels x length) features. Output has
/// spatial size 1 so it composes with the conv layers; a full-width valid
/// convolution is exactly this map.
class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features);
  Tensor forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts& opts) override;
  Tensor backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;
  void init_weights(Rng& rng) override;

  int in_features, out_features;
  Param w;  // (out, in)
  Param b;  // (out)
};

/// Lossless (channels, length) reshape.
class Reshape final : public Layer {
 public:
  Reshape(int c_out, int l_out) : c_out(c_out), l_out(l_out) {}
  Tensor forward(const Tensor& x, LayerCtx& ctx, const ForwardOpts& opts) override;
  Tensor backward(const LayerCtx& ctx, const Tensor& dy, bool accum_params) override;

  int c_out, l_out;
};

/// Ordered layer chain. Its ctx is one LayerCtx per layer.
class Sequential {
 public:
  Sequential() = default;

  template <typename L, typename... Args>
  L* add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L* raw = layer.get();
    layers_.push_back(std::move(layer));
    return raw;
  }

  Tensor forward(const Tensor& x, std::vector<LayerCtx>& ctx, const ForwardOpts& opts) const;
  Tensor backward(const std::vector<LayerCtx>& ctx, const Tensor& dy, bool accum_params) const;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) const;
  void visit_buffers(const std::string& prefix, const ParamVisitor& fn) const;
  void init_weights(Rng& rng) const;
  size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Fan-in scaled uniform initialization for conv/linear weights.
void init_fan_in_uniform(Param& w, int fan_in, Rng& rng);

}  // namespace marrnet::nn
