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

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "marrnet/model/arch.hpp"
#include "marrnet/nn/layers.hpp"
#include "marrnet/tensor.hpp"

namespace marrnet::model {

using nn::ForwardOpts;
using nn::LayerCtx;
using nn::Mode;
using nn::Param;
using nn::ParamVisitor;

/// Encoder output: the bottleneck feature vector plus the three pre-pooling
/// skip maps. Skip i has length L / 2^i... : (L, base), (L/2, 2*base),
/// (L/4, 4*base). Decoders concatenate these regardless of which encoder
/// produced them; that is how cross-modality shortcuts are realized.
struct EncodeOutput {
  Tensor bottleneck;               // (N, bottleneck_dim, 1)
  std::array<Tensor, 3> skips;     // skips[i]: (N, base<<i, L>>i)

  int batch() const { return bottleneck.n; }
  /// Bottleneck of sample i as a flat vector.
  std::vector<double> bottleneck_vec(int i = 0) const;
};

struct EncoderCtx {
  std::array<std::vector<LayerCtx>, 3> block;
  std::array<LayerCtx, 3> pool;
  std::vector<LayerCtx> bneck;
};

class Encoder {
 public:
  explicit Encoder(const ArchConfig& cfg);
  EncodeOutput forward(const Tensor& x, EncoderCtx& ctx, const ForwardOpts& opts) const;
  /// d_skips entries may be empty tensors (treated as zero).
  Tensor backward(const EncoderCtx& ctx, const Tensor& d_bottleneck,
                  const std::array<Tensor, 3>& d_skips, bool accum_params) const;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) const;
  void visit_buffers(const std::string& prefix, const ParamVisitor& fn) const;
  void init_weights(Rng& rng) const;

 private:
  ArchConfig cfg_;
  std::array<nn::Sequential, 3> blocks_;
  std::array<std::unique_ptr<nn::MaxPool2>, 3> pools_;
  nn::Sequential bneck_;
};

struct DecoderCtx {
  std::vector<LayerCtx> expand;
  std::array<std::vector<LayerCtx>, 3> up;
  std::array<std::vector<LayerCtx>, 3> post;
  std::vector<LayerCtx> head;
  std::array<int, 3> skip_channels = {0, 0, 0};
};

struct DecoderGrads {
  Tensor d_bottleneck;
  std::array<Tensor, 3> d_skips;
};

class Decoder {
 public:
  explicit Decoder(const ArchConfig& cfg);
  Tensor forward(const EncodeOutput& enc, DecoderCtx& ctx, const ForwardOpts& opts) const;
  DecoderGrads backward(const DecoderCtx& ctx, const Tensor& d_out, bool accum_params) const;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) const;
  void visit_buffers(const std::string& prefix, const ParamVisitor& fn) const;
  void init_weights(Rng& rng) const;

 private:
  ArchConfig cfg_;
  nn::Sequential expand_;                  // bottleneck -> (4*base, L/8)
  std::array<nn::Sequential, 3> up_;       // transposed conv + BN + ReLU
  std::array<nn::Sequential, 3> post_;     // conv after skip concat + BN + ReLU
  nn::Sequential head_;                    // 1x1 conv + sigmoid
};

class Discriminator {
 public:
  explicit Discriminator(const ArchConfig& cfg);
  /// (N, 1, L) -> (N, 2, 1) logits.
  Tensor forward(const Tensor& x, std::vector<LayerCtx>& ctx, const ForwardOpts& opts) const;
  Tensor backward(const std::vector<LayerCtx>& ctx, const Tensor& dy, bool accum_params) const;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) const;
  void visit_buffers(const std::string& prefix, const ParamVisitor& fn) const;
  void init_weights(Rng& rng) const;

 private:
  nn::Sequential net_;
};

class Siamese {
 public:
  explicit Siamese(const ArchConfig& cfg);
  /// (N, bottleneck_dim, 1) -> (N, embedding_dim, 1).
  Tensor forward(const Tensor& bottleneck, std::vector<LayerCtx>& ctx,
                 const ForwardOpts& opts) const;
  Tensor backward(const std::vector<LayerCtx>& ctx, const Tensor& dy, bool accum_params) const;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) const;
  void visit_buffers(const std::string& prefix, const ParamVisitor& fn) const;
  void init_weights(Rng& rng) const;

 private:
  nn::Sequential net_;
};

/// All trainable state: encoders E1/E2, decoders G1/G2, discriminators
/// D1/D2 and the shared Siamese extractor S.
class ModelParams {
 public:
  explicit ModelParams(const ArchConfig& cfg);
  ModelParams(const ModelParams&) = delete;
  ModelParams& operator=(const ModelParams&) = delete;
  ModelParams(ModelParams&&) = default;
  ModelParams& operator=(ModelParams&&) = default;

  const ArchConfig& cfg() const { return cfg_; }

  const Encoder& encoder(Modality m) const { return m == Modality::M1 ? *e1_ : *e2_; }
  const Decoder& decoder(Modality m) const { return m == Modality::M1 ? *g1_ : *g2_; }
  const Discriminator& discriminator(Modality m) const { return m == Modality::M1 ? *d1_ : *d2_; }
  const Siamese& siamese() const { return *s_; }

  /// Visits trainable parameters of the named sub-networks ("e1", "g2", ...;
  /// empty filter = all), in a fixed order.
  void visit_params(const ParamVisitor& fn, std::span<const std::string> roles = {}) const;
  void visit_buffers(const ParamVisitor& fn, std::span<const std::string> roles = {}) const;
  /// Trainable params and buffers together (serialization order).
  void visit_all(const ParamVisitor& fn, std::span<const std::string> roles = {}) const;

  void zero_grads() const;
  std::unique_ptr<ModelParams> clone() const;
  bool all_finite() const;
  /// Draws fresh weights for every sub-network in a fixed order.
  void init_weights(Rng& rng) const;

  static const std::array<std::string, 5> kMainRoles;  // e1 e2 g1 g2 s
  static const std::array<std::string, 2> kDiscRoles;  // d1 d2

 private:
  ArchConfig cfg_;
  std::unique_ptr<Encoder> e1_, e2_;
  std::unique_ptr<Decoder> g1_, g2_;
  std::unique_ptr<Discriminator> d1_, d2_;
  std::unique_ptr<Siamese> s_;
};

/// Weights kept for inference: encoders and Siamese only. Decoding and
/// discrimination are not available on this type.
class InferenceParams {
 public:
  explicit InferenceParams(const ArchConfig& cfg);
  InferenceParams(const InferenceParams&) = delete;
  InferenceParams& operator=(const InferenceParams&) = delete;
  InferenceParams(InferenceParams&&) = default;

  const ArchConfig& cfg() const { return cfg_; }
  const Encoder& encoder(Modality m) const { return m == Modality::M1 ? *e1_ : *e2_; }
  const Siamese& siamese() const { return *s_; }

  void visit_all(const ParamVisitor& fn) const;

 private:
  ArchConfig cfg_;
  std::unique_ptr<Encoder> e1_, e2_;
  std::unique_ptr<Siamese> s_;
};

/// Fresh random weights, deterministic per seed. Convolution and linear
/// weights use fan-in scaled uniform draws; batch-norm starts at scale 1,
/// shift 0, running stats (0, 1).
std::unique_ptr<ModelParams> init_params(const ArchConfig& cfg, std::uint64_t seed);

/// Eval-mode single-sample forward passes (pure functions of params+input).
EncodeOutput encode(const ModelParams& params, std::span<const double> values, Modality m);
std::vector<double> decode(const ModelParams& params, const EncodeOutput& enc,
                           Modality target);
std::array<double, 2> discriminate(const ModelParams& params, std::span<const double> values,
                                   Modality m);
std::vector<double> embed(const ModelParams& params, std::span<const double> bottleneck);
std::vector<double> embed(const InferenceParams& params, std::span<const double> bottleneck);

/// Eval-mode end-to-end embedding of one spectrum's values.
std::vector<double> embed_values(const InferenceParams& params, std::span<const double> values,
                                 Modality m);
std::vector<double> embed_values(const ModelParams& params, std::span<const double> values,
                                 Modality m);

Tensor tensor_from_values(std::span<const double> values);

}  // namespace marrnet::model
