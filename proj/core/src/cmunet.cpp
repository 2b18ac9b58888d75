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

#include "marrnet/model/cmunet.hpp"

#include <algorithm>
#include <cstring>
#include <map>

namespace marrnet::model {

namespace {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n != b.n || a.l != b.l) throw ShapeMismatch("concat_channels: batch/length mismatch");
  Tensor y(a.n, a.c + b.c, a.l);
  for (int n = 0; n < a.n; ++n) {
    std::memcpy(y.row(n, 0), a.row(n, 0), sizeof(double) * a.c * a.l);
    std::memcpy(y.row(n, a.c), b.row(n, 0), sizeof(double) * b.c * b.l);
  }
  return y;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& d, int c_first) {
  Tensor da(d.n, c_first, d.l), db(d.n, d.c - c_first, d.l);
  for (int n = 0; n < d.n; ++n) {
    std::memcpy(da.row(n, 0), d.row(n, 0), sizeof(double) * c_first * d.l);
    std::memcpy(db.row(n, 0), d.row(n, c_first), sizeof(double) * (d.c - c_first) * d.l);
  }
  return {std::move(da), std::move(db)};
}

void add_conv_bn_relu(nn::Sequential& seq, int in_c, int out_c, int k) {
  seq.add<nn::Conv1d>(in_c, out_c, k);
  seq.add<nn::BatchNorm1d>(out_c);
  seq.add<nn::ReLU>();
}

}  // namespace

std::vector<double> EncodeOutput::bottleneck_vec(int i) const {
  std::vector<double> out(bottleneck.c);
  for (int j = 0; j < bottleneck.c; ++j) out[j] = bottleneck.at(i, j, 0);
  return out;
}

// ------------------------------------------------------------------ Encoder

Encoder::Encoder(const ArchConfig& cfg) : cfg_(cfg) {
  int in_c = 1;
  for (int i = 0; i < 3; ++i) {
    const int c = cfg.block_channels(i);
    add_conv_bn_relu(blocks_[i], in_c, c, cfg.kernel_size);
    add_conv_bn_relu(blocks_[i], c, c, cfg.kernel_size);
    pools_[i] = std::make_unique<nn::MaxPool2>();
    in_c = c;
  }
  // Full-width convolution: collapses the pooled map to the bottleneck vector.
  bneck_.add<nn::Linear>(cfg.block_channels(2) * cfg.pooled_length(), cfg.bottleneck_dim);
  bneck_.add<nn::BatchNorm1d>(cfg.bottleneck_dim);
  bneck_.add<nn::ReLU>();
}

EncodeOutput Encoder::forward(const Tensor& x, EncoderCtx& ctx, const ForwardOpts& opts) const {
  require_shape(x, x.n, 1, cfg_.input_length, "Encoder::forward");
  EncodeOutput out;
  Tensor cur = x;
  for (int i = 0; i < 3; ++i) {
    Tensor skip = blocks_[i].forward(cur, ctx.block[i], opts);
    ctx.pool[i] = LayerCtx{};
    cur = pools_[i]->forward(skip, ctx.pool[i], opts);
    out.skips[i] = std::move(skip);
  }
  out.bottleneck = bneck_.forward(cur, ctx.bneck, opts);
  return out;
}

Tensor Encoder::backward(const EncoderCtx& ctx, const Tensor& d_bottleneck,
                         const std::array<Tensor, 3>& d_skips, bool accum_params) const {
  Tensor d = bneck_.backward(ctx.bneck, d_bottleneck, accum_params);
  for (int i = 2; i >= 0; --i) {
    Tensor d_skip = pools_[i]->backward(ctx.pool[i], d, accum_params);
    if (d_skips[i].size() > 0) {
      d_skip += d_skips[i];
    }
    d = blocks_[i].backward(ctx.block[i], d_skip, accum_params);
  }
  return d;
}

void Encoder::visit_params(const std::string& prefix, const ParamVisitor& fn) const {
  for (int i = 0; i < 3; ++i) blocks_[i].visit_params(prefix + ".block" + std::to_string(i), fn);
  bneck_.visit_params(prefix + ".bneck", fn);
}

void Encoder::visit_buffers(const std::string& prefix, const ParamVisitor& fn) const {
  for (int i = 0; i < 3; ++i) blocks_[i].visit_buffers(prefix + ".block" + std::to_string(i), fn);
  bneck_.visit_buffers(prefix + ".bneck", fn);
}

void Encoder::init_weights(Rng& rng) const {
  for (int i = 0; i < 3; ++i) blocks_[i].init_weights(rng);
  bneck_.init_weights(rng);
}

// ------------------------------------------------------------------ Decoder

Decoder::Decoder(const ArchConfig& cfg) : cfg_(cfg) {
  const int c0 = cfg.block_channels(0), c1 = cfg.block_channels(1), c2 = cfg.block_channels(2);
  const int lp = cfg.pooled_length();

  expand_.add<nn::Linear>(cfg.bottleneck_dim, c2 * lp);
  expand_.add<nn::Reshape>(c2, lp);
  expand_.add<nn::BatchNorm1d>(c2);
  expand_.add<nn::ReLU>();

  const int up_in[3] = {c2, c2, c1};
  const int up_out[3] = {c2, c1, c0};
  for (int j = 0; j < 3; ++j) {
    up_[j].add<nn::ConvTranspose2x>(up_in[j], up_out[j]);
    up_[j].add<nn::BatchNorm1d>(up_out[j]);
    up_[j].add<nn::ReLU>();
    // Skip concatenation doubles the channel count before this conv.
    add_conv_bn_relu(post_[j], 2 * up_out[j], up_out[j], cfg.kernel_size);
  }

  head_.add<nn::Conv1d>(c0, 1, 1);
  head_.add<nn::Sigmoid>();
}

Tensor Decoder::forward(const EncodeOutput& enc, DecoderCtx& ctx, const ForwardOpts& opts) const {
  require_shape(enc.bottleneck, enc.bottleneck.n, cfg_.bottleneck_dim, 1, "Decoder::forward");
  for (int i = 0; i < 3; ++i)
    require_shape(enc.skips[i], enc.bottleneck.n, cfg_.block_channels(i),
                  cfg_.input_length >> i, "Decoder::forward skip");

  Tensor cur = expand_.forward(enc.bottleneck, ctx.expand, opts);
  for (int j = 0; j < 3; ++j) {
    cur = up_[j].forward(cur, ctx.up[j], opts);
    const Tensor& skip = enc.skips[2 - j];
    ctx.skip_channels[j] = cur.c;
    cur = concat_channels(cur, skip);
    cur = post_[j].forward(cur, ctx.post[j], opts);
  }
  return head_.forward(cur, ctx.head, opts);
}

DecoderGrads Decoder::backward(const DecoderCtx& ctx, const Tensor& d_out,
                               bool accum_params) const {
  DecoderGrads g;
  Tensor d = head_.backward(ctx.head, d_out, accum_params);
  for (int j = 2; j >= 0; --j) {
    d = post_[j].backward(ctx.post[j], d, accum_params);
    auto [d_up, d_skip] = split_channels(d, ctx.skip_channels[j]);
    g.d_skips[2 - j] = std::move(d_skip);
    d = up_[j].backward(ctx.up[j], d_up, accum_params);
  }
  g.d_bottleneck = expand_.backward(ctx.expand, d, accum_params);
  return g;
}

void Decoder::visit_params(const std::string& prefix, const ParamVisitor& fn) const {
  expand_.visit_params(prefix + ".expand", fn);
  for (int j = 0; j < 3; ++j) {
    up_[j].visit_params(prefix + ".up" + std::to_string(j), fn);
    post_[j].visit_params(prefix + ".post" + std::to_string(j), fn);
  }
  head_.visit_params(prefix + ".head", fn);
}

void Decoder::visit_buffers(const std::string& prefix, const ParamVisitor& fn) const {
  expand_.visit_buffers(prefix + ".expand", fn);
  for (int j = 0; j < 3; ++j) {
    up_[j].visit_buffers(prefix + ".up" + std::to_string(j), fn);
    post_[j].visit_buffers(prefix + ".post" + std::to_string(j), fn);
  }
  head_.visit_buffers(prefix + ".head", fn);
}

void Decoder::init_weights(Rng& rng) const {
  expand_.init_weights(rng);
  for (int j = 0; j < 3; ++j) {
    up_[j].init_weights(rng);
    post_[j].init_weights(rng);
  }
  head_.init_weights(rng);
}

// ------------------------------------------------------------ Discriminator

Discriminator::Discriminator(const ArchConfig& cfg) {
  int in_c = 1;
  for (int i = 0; i < cfg.disc_blocks; ++i) {
    const int c = cfg.block_channels(i);
    add_conv_bn_relu(net_, in_c, c, cfg.kernel_size);
    add_conv_bn_relu(net_, c, c, cfg.kernel_size);
    net_.add<nn::MaxPool2>();
    in_c = c;
  }
  const int flat = in_c * (cfg.input_length >> cfg.disc_blocks);
  net_.add<nn::Linear>(flat, 2);
}

Tensor Discriminator::forward(const Tensor& x, std::vector<LayerCtx>& ctx,
                              const ForwardOpts& opts) const {
  return net_.forward(x, ctx, opts);
}

Tensor Discriminator::backward(const std::vector<LayerCtx>& ctx, const Tensor& dy,
                               bool accum_params) const {
  return net_.backward(ctx, dy, accum_params);
}

void Discriminator::visit_params(const std::string& prefix, const ParamVisitor& fn) const {
  net_.visit_params(prefix, fn);
}

void Discriminator::visit_buffers(const std::string& prefix, const ParamVisitor& fn) const {
  net_.visit_buffers(prefix, fn);
}

void Discriminator::init_weights(Rng& rng) const { net_.init_weights(rng); }

// ------------------------------------------------------------------ Siamese

Siamese::Siamese(const ArchConfig& cfg) {
  net_.add<nn::Reshape>(cfg.siamese_in_channels(), cfg.siamese_seq_len());
  int in_c = cfg.siamese_in_channels();
  for (int i = 0; i < 3; ++i) {
    const int c = cfg.siamese_channels[static_cast<size_t>(i)];
    add_conv_bn_relu(net_, in_c, c, cfg.kernel_size);
    add_conv_bn_relu(net_, c, c, cfg.kernel_size);
    net_.add<nn::MaxPool2>();
    in_c = c;
  }
  net_.add<nn::Linear>(in_c, cfg.embedding_dim);  // seq length is 1 after 3 pools
}

Tensor Siamese::forward(const Tensor& bottleneck, std::vector<LayerCtx>& ctx,
                        const ForwardOpts& opts) const {
  return net_.forward(bottleneck, ctx, opts);
}

Tensor Siamese::backward(const std::vector<LayerCtx>& ctx, const Tensor& dy,
                         bool accum_params) const {
  return net_.backward(ctx, dy, accum_params);
}

void Siamese::visit_params(const std::string& prefix, const ParamVisitor& fn) const {
  net_.visit_params(prefix, fn);
}

void Siamese::visit_buffers(const std::string& prefix, const ParamVisitor& fn) const {
  net_.visit_buffers(prefix, fn);
}

void Siamese::init_weights(Rng& rng) const { net_.init_weights(rng); }

// -------------------------------------------------------------- ModelParams

const std::array<std::string, 5> ModelParams::kMainRoles = {"e1", "e2", "g1", "g2", "s"};
const std::array<std::string, 2> ModelParams::kDiscRoles = {"d1", "d2"};

ModelParams::ModelParams(const ArchConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  e1_ = std::make_unique<Encoder>(cfg_);
  e2_ = std::make_unique<Encoder>(cfg_);
  g1_ = std::make_unique<Decoder>(cfg_);
  g2_ = std::make_unique<Decoder>(cfg_);
  d1_ = std::make_unique<Discriminator>(cfg_);
  d2_ = std::make_unique<Discriminator>(cfg_);
  s_ = std::make_unique<Siamese>(cfg_);
}

namespace {

bool role_selected(const std::string& role, std::span<const std::string> roles) {
  if (roles.empty()) return true;
  return std::find(roles.begin(), roles.end(), role) != roles.end();
}

}  // namespace

void ModelParams::visit_params(const ParamVisitor& fn, std::span<const std::string> roles) const {
  if (role_selected("e1", roles)) e1_->visit_params("e1", fn);
  if (role_selected("e2", roles)) e2_->visit_params("e2", fn);
  if (role_selected("g1", roles)) g1_->visit_params("g1", fn);
  if (role_selected("g2", roles)) g2_->visit_params("g2", fn);
  if (role_selected("d1", roles)) d1_->visit_params("d1", fn);
  if (role_selected("d2", roles)) d2_->visit_params("d2", fn);
  if (role_selected("s", roles)) s_->visit_params("s", fn);
}

void ModelParams::visit_buffers(const ParamVisitor& fn, std::span<const std::string> roles) const {
  if (role_selected("e1", roles)) e1_->visit_buffers("e1", fn);
  if (role_selected("e2", roles)) e2_->visit_buffers("e2", fn);
  if (role_selected("g1", roles)) g1_->visit_buffers("g1", fn);
  if (role_selected("g2", roles)) g2_->visit_buffers("g2", fn);
  if (role_selected("d1", roles)) d1_->visit_buffers("d1", fn);
  if (role_selected("d2", roles)) d2_->visit_buffers("d2", fn);
  if (role_selected("s", roles)) s_->visit_buffers("s", fn);
}

void ModelParams::visit_all(const ParamVisitor& fn, std::span<const std::string> roles) const {
  visit_params(fn, roles);
  visit_buffers(fn, roles);
}

void ModelParams::zero_grads() const {
  visit_params([](const std::string&, Param& p) { p.zero_grad(); });
}

std::unique_ptr<ModelParams> ModelParams::clone() const {
  auto copy = std::make_unique<ModelParams>(cfg_);
  std::vector<Param*> src, dst;
  visit_all([&](const std::string&, Param& p) { src.push_back(&p); });
  copy->visit_all([&](const std::string&, Param& p) { dst.push_back(&p); });
  for (size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
  return copy;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  visit_all([&](const std::string&, Param& p) {
    for (double v : p.value)
      if (!std::isfinite(v)) ok = false;
  });
  return ok;
}

void ModelParams::init_weights(Rng& rng) const {
  e1_->init_weights(rng);
  e2_->init_weights(rng);
  g1_->init_weights(rng);
  g2_->init_weights(rng);
  d1_->init_weights(rng);
  d2_->init_weights(rng);
  s_->init_weights(rng);
}

// ---------------------------------------------------------- InferenceParams

InferenceParams::InferenceParams(const ArchConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  e1_ = std::make_unique<Encoder>(cfg_);
  e2_ = std::make_unique<Encoder>(cfg_);
  s_ = std::make_unique<Siamese>(cfg_);
}

void InferenceParams::visit_all(const ParamVisitor& fn) const {
  e1_->visit_params("e1", fn);
  e2_->visit_params("e2", fn);
  s_->visit_params("s", fn);
  e1_->visit_buffers("e1", fn);
  e2_->visit_buffers("e2", fn);
  s_->visit_buffers("s", fn);
}

// -------------------------------------------------------------- public ops

std::unique_ptr<ModelParams> init_params(const ArchConfig& cfg, std::uint64_t seed) {
  auto params = std::make_unique<ModelParams>(cfg);
  Rng rng = make_rng(seed, "model-init");
  params->init_weights(rng);
  return params;
}

EncodeOutput encode(const ModelParams& params, std::span<const double> values, Modality m) {
  Tensor x = tensor_from_values(values);
  require_shape(x, 1, 1, params.cfg().input_length, "encode");
  EncoderCtx ctx;
  return params.encoder(m).forward(x, ctx, ForwardOpts{Mode::kEval, false});
}

std::vector<double> decode(const ModelParams& params, const EncodeOutput& enc, Modality target) {
  DecoderCtx ctx;
  Tensor y = params.decoder(target).forward(enc, ctx, ForwardOpts{Mode::kEval, false});
  return std::vector<double>(y.v.begin(), y.v.end());
}

std::array<double, 2> discriminate(const ModelParams& params, std::span<const double> values,
                                   Modality m) {
  Tensor x = tensor_from_values(values);
  require_shape(x, 1, 1, params.cfg().input_length, "discriminate");
  std::vector<LayerCtx> ctx;
  Tensor y = params.discriminator(m).forward(x, ctx, ForwardOpts{Mode::kEval, false});
  return {y.at(0, 0, 0), y.at(0, 1, 0)};
}

namespace {

Tensor bottleneck_tensor(std::span<const double> bottleneck, int expected) {
  if (static_cast<int>(bottleneck.size()) != expected)
    throw ShapeMismatch("embed: bottleneck size mismatch");
  Tensor t(1, expected, 1);
  std::copy(bottleneck.begin(), bottleneck.end(), t.v.begin());
  return t;
}

}  // namespace

std::vector<double> embed(const ModelParams& params, std::span<const double> bottleneck) {
  Tensor t = bottleneck_tensor(bottleneck, params.cfg().bottleneck_dim);
  std::vector<LayerCtx> ctx;
  Tensor y = params.siamese().forward(t, ctx, ForwardOpts{Mode::kEval, false});
  return std::vector<double>(y.v.begin(), y.v.end());
}

std::vector<double> embed(const InferenceParams& params, std::span<const double> bottleneck) {
  Tensor t = bottleneck_tensor(bottleneck, params.cfg().bottleneck_dim);
  std::vector<LayerCtx> ctx;
  Tensor y = params.siamese().forward(t, ctx, ForwardOpts{Mode::kEval, false});
  return std::vector<double>(y.v.begin(), y.v.end());
}

std::vector<double> embed_values(const InferenceParams& params, std::span<const double> values,
                                 Modality m) {
  Tensor x = tensor_from_values(values);
  require_shape(x, 1, 1, params.cfg().input_length, "embed_values");
  EncoderCtx ectx;
  EncodeOutput enc = params.encoder(m).forward(x, ectx, ForwardOpts{Mode::kEval, false});
  std::vector<LayerCtx> sctx;
  Tensor y = params.siamese().forward(enc.bottleneck, sctx, ForwardOpts{Mode::kEval, false});
  return std::vector<double>(y.v.begin(), y.v.end());
}

std::vector<double> embed_values(const ModelParams& params, std::span<const double> values,
                                 Modality m) {
  EncodeOutput enc = encode(params, values, m);
  std::vector<LayerCtx> sctx;
  Tensor y = params.siamese().forward(enc.bottleneck, sctx, ForwardOpts{Mode::kEval, false});
  return std::vector<double>(y.v.begin(), y.v.end());
}

Tensor tensor_from_values(std::span<const double> values) {
  Tensor t(1, 1, static_cast<int>(values.size()));
  std::copy(values.begin(), values.end(), t.v.begin());
  return t;
}

}  // namespace marrnet::model
