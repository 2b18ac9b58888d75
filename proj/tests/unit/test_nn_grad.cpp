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

#include <doctest.h>

#include "fd_check.hpp"
#include "marrnet/model/cmunet.hpp"
#include "marrnet/nn/layers.hpp"

using namespace marrnet;
using nn::ForwardOpts;
using nn::LayerCtx;
using nn::Mode;

namespace {

// Checks d<y,R>/dx and d<y,R>/dparams for one layer against central
// differences. Objective and FD run through the forward pass only.
void check_layer(nn::Layer& layer, Tensor x, const ForwardOpts& opts, double tol = 1e-4) {
  Rng rng(7);
  LayerCtx ctx;
  Tensor y0 = layer.forward(x, ctx, opts);
  const Tensor r = fdcheck::random_tensor(y0.n, y0.c, y0.l, rng);

  layer.visit_params("p", [](const std::string&, nn::Param& p) { p.zero_grad(); });
  LayerCtx bctx;
  (void)layer.forward(x, bctx, opts);
  Tensor dx = layer.backward(bctx, r, true);

  const auto objective = [&]() {
    LayerCtx c;
    return fdcheck::weighted_sum(layer.forward(x, c, opts), r);
  };

  auto res = fdcheck::compare_gradient(objective, x.v.data(), dx.v.data(),
                                       fdcheck::sample_coords(x.v.size(), 64), 1e-6, tol);
  CHECK_MESSAGE(res.pass_rate() == 1.0, "input grad worst rel err ", res.worst_rel_err);

  layer.visit_params("p", [&](const std::string& name, nn::Param& p) {
    auto pres = fdcheck::compare_gradient(objective, p.value.data(), p.grad.data(),
                                          fdcheck::sample_coords(p.size(), 48), 1e-6, tol);
    CHECK_MESSAGE(pres.pass_rate() == 1.0, name, " grad worst rel err ", pres.worst_rel_err);
  });
}

}  // namespace

TEST_CASE("conv1d gradient matches finite differences") {
  Rng rng(1);
  nn::Conv1d conv(3, 4, 3);
  conv.init_weights(rng);
  fdcheck::fill_uniform(conv.b.value, rng, -0.3, 0.3);
  check_layer(conv, fdcheck::random_tensor(2, 3, 10, rng), {Mode::kEval, false});
}

TEST_CASE("conv1d with kernel 1 (decoder head)") {
  Rng rng(2);
  nn::Conv1d conv(4, 1, 1);
  conv.init_weights(rng);
  check_layer(conv, fdcheck::random_tensor(2, 4, 8, rng), {Mode::kEval, false});
}

TEST_CASE("transposed conv gradient matches finite differences") {
  Rng rng(3);
  nn::ConvTranspose2x up(3, 2);
  up.init_weights(rng);
  fdcheck::fill_uniform(up.b.value, rng, -0.3, 0.3);
  check_layer(up, fdcheck::random_tensor(2, 3, 6, rng), {Mode::kEval, false});
}

TEST_CASE("batchnorm train-mode gradient matches finite differences") {
  Rng rng(4);
  nn::BatchNorm1d bn(3);
  fdcheck::fill_uniform(bn.gamma.value, rng, 0.5, 1.5);
  fdcheck::fill_uniform(bn.beta.value, rng, -0.5, 0.5);
  // stats_update=false keeps the train-mode forward pure for the FD probe.
  check_layer(bn, fdcheck::random_tensor(3, 3, 7, rng), {Mode::kTrain, false});
}

TEST_CASE("batchnorm eval-mode gradient matches finite differences") {
  Rng rng(5);
  nn::BatchNorm1d bn(3);
  fdcheck::fill_uniform(bn.gamma.value, rng, 0.5, 1.5);
  fdcheck::fill_uniform(bn.beta.value, rng, -0.5, 0.5);
  fdcheck::fill_uniform(bn.running_mean.value, rng, -0.2, 0.2);
  fdcheck::fill_uniform(bn.running_var.value, rng, 0.5, 1.5);
  check_layer(bn, fdcheck::random_tensor(2, 3, 5, rng), {Mode::kEval, false});
}

TEST_CASE("batchnorm running stats update only when asked") {
  Rng rng(6);
  nn::BatchNorm1d bn(2);
  Tensor x = fdcheck::random_tensor(2, 2, 4, rng);
  const auto before = bn.running_mean.value;
  LayerCtx ctx;
  bn.forward(x, ctx, {Mode::kTrain, false});
  CHECK(bn.running_mean.value == before);
  bn.forward(x, ctx, {Mode::kTrain, true});
  CHECK(bn.running_mean.value != before);
}

TEST_CASE("relu, sigmoid, maxpool gradients match finite differences") {
  Rng rng(8);
  nn::ReLU relu;
  check_layer(relu, fdcheck::random_tensor(2, 3, 9, rng), {Mode::kEval, false});
  nn::Sigmoid sig;
  check_layer(sig, fdcheck::random_tensor(2, 3, 9, rng), {Mode::kEval, false});
  nn::MaxPool2 pool;
  check_layer(pool, fdcheck::random_tensor(2, 3, 10, rng), {Mode::kEval, false});
}

TEST_CASE("linear gradient matches finite differences") {
  Rng rng(9);
  nn::Linear lin(12, 5);
  lin.init_weights(rng);
  fdcheck::fill_uniform(lin.b.value, rng, -0.3, 0.3);
  check_layer(lin, fdcheck::random_tensor(3, 3, 4, rng), {Mode::kEval, false});
}

TEST_CASE("encoder forward/backward gradient on the tiny config") {
  const model::ArchConfig cfg = model::ArchConfig::tiny();
  auto params = model::init_params(cfg, 11);
  Rng rng(12);
  Tensor x = fdcheck::random_tensor(2, 1, cfg.input_length, rng, 0.0, 1.0);
  const ForwardOpts opts{Mode::kTrain, false};
  const model::Encoder& enc = params->encoder(Modality::M1);

  model::EncoderCtx ctx;
  model::EncodeOutput out = enc.forward(x, ctx, opts);
  Rng rng2(13);
  const Tensor r_b = fdcheck::random_tensor(out.bottleneck.n, out.bottleneck.c, 1, rng2);
  std::array<Tensor, 3> r_s;
  for (int i = 0; i < 3; ++i)
    r_s[i] = fdcheck::random_tensor(out.skips[i].n, out.skips[i].c, out.skips[i].l, rng2);

  params->zero_grads();
  Tensor dx = enc.backward(ctx, r_b, r_s, true);

  const auto objective = [&]() {
    model::EncoderCtx c;
    model::EncodeOutput o = enc.forward(x, c, opts);
    double acc = fdcheck::weighted_sum(o.bottleneck, r_b);
    for (int i = 0; i < 3; ++i) acc += fdcheck::weighted_sum(o.skips[i], r_s[i]);
    return acc;
  };

  auto res = fdcheck::compare_gradient(objective, x.v.data(), dx.v.data(),
                                       fdcheck::sample_coords(x.v.size(), 24));
  CHECK_MESSAGE(res.pass_rate() == 1.0, "encoder dx worst rel err ", res.worst_rel_err);

  const std::array<std::string, 1> roles = {"e1"};
  params->visit_params(
      [&](const std::string& name, nn::Param& p) {
        auto pres = fdcheck::compare_gradient(objective, p.value.data(), p.grad.data(),
                                              fdcheck::sample_coords(p.size(), 10));
        CHECK_MESSAGE(pres.pass_rate() == 1.0, name, " worst rel err ", pres.worst_rel_err);
      },
      roles);
}

TEST_CASE("decoder consumes every skip map (liveness + gradient)") {
  const model::ArchConfig cfg = model::ArchConfig::tiny();
  auto params = model::init_params(cfg, 21);
  Rng rng(22);
  const ForwardOpts opts{Mode::kTrain, false};

  model::EncodeOutput enc;
  enc.bottleneck = fdcheck::random_tensor(2, cfg.bottleneck_dim, 1, rng, 0.0, 1.0);
  for (int i = 0; i < 3; ++i)
    enc.skips[i] =
        fdcheck::random_tensor(2, cfg.block_channels(i), cfg.input_length >> i, rng, 0.0, 1.0);

  const model::Decoder& dec = params->decoder(Modality::M2);
  model::DecoderCtx ctx;
  Tensor y = dec.forward(enc, ctx, opts);
  CHECK(y.l == cfg.input_length);
  CHECK(y.c == 1);

  Rng rng2(23);
  const Tensor r = fdcheck::random_tensor(y.n, y.c, y.l, rng2);
  params->zero_grads();
  model::DecoderGrads grads = dec.backward(ctx, r, true);

  const auto objective = [&]() {
    model::DecoderCtx c;
    return fdcheck::weighted_sum(dec.forward(enc, c, opts), r);
  };

  auto bres = fdcheck::compare_gradient(objective, enc.bottleneck.v.data(),
                                        grads.d_bottleneck.v.data(),
                                        fdcheck::sample_coords(enc.bottleneck.v.size(), 16));
  CHECK_MESSAGE(bres.pass_rate() == 1.0, "bottleneck grad worst rel err ", bres.worst_rel_err);

  for (int i = 0; i < 3; ++i) {
    auto sres = fdcheck::compare_gradient(objective, enc.skips[i].v.data(),
                                          grads.d_skips[i].v.data(),
                                          fdcheck::sample_coords(enc.skips[i].v.size(), 16));
    CHECK_MESSAGE(sres.pass_rate() == 1.0, "skip ", i, " worst rel err ", sres.worst_rel_err);
    // The probe is only meaningful if the skip is actually wired in.
    double norm = 0.0;
    for (double v : grads.d_skips[i].v) norm += v * v;
    CHECK_MESSAGE(norm > 0.0, "skip ", i, " gradient is identically zero");
  }
}

TEST_CASE("discriminator and siamese gradients on the tiny config") {
  const model::ArchConfig cfg = model::ArchConfig::tiny();
  auto params = model::init_params(cfg, 31);
  Rng rng(32);
  const ForwardOpts opts{Mode::kTrain, false};

  {
    const model::Discriminator& d = params->discriminator(Modality::M2);
    Tensor x = fdcheck::random_tensor(2, 1, cfg.input_length, rng, 0.0, 1.0);
    std::vector<LayerCtx> ctx;
    Tensor y = d.forward(x, ctx, opts);
    CHECK(y.c == 2);
    Rng rng2(33);
    const Tensor r = fdcheck::random_tensor(y.n, 2, 1, rng2);
    params->zero_grads();
    Tensor dx = d.backward(ctx, r, true);
    const auto objective = [&]() {
      std::vector<LayerCtx> c;
      return fdcheck::weighted_sum(d.forward(x, c, opts), r);
    };
    auto res = fdcheck::compare_gradient(objective, x.v.data(), dx.v.data(),
                                         fdcheck::sample_coords(x.v.size(), 16));
    CHECK_MESSAGE(res.pass_rate() == 1.0, "disc dx worst rel err ", res.worst_rel_err);
  }
  {
    const model::Siamese& s = params->siamese();
    Tensor b = fdcheck::random_tensor(3, cfg.bottleneck_dim, 1, rng, 0.0, 1.0);
    std::vector<LayerCtx> ctx;
    Tensor y = s.forward(b, ctx, opts);
    CHECK(y.c == cfg.embedding_dim);
    Rng rng2(34);
    const Tensor r = fdcheck::random_tensor(y.n, y.c, 1, rng2);
    params->zero_grads();
    Tensor db = s.backward(ctx, r, true);
    const auto objective = [&]() {
      std::vector<LayerCtx> c;
      return fdcheck::weighted_sum(s.forward(b, c, opts), r);
    };
    auto res = fdcheck::compare_gradient(objective, b.v.data(), db.v.data(),
                                         fdcheck::sample_coords(b.v.size(), 16));
    CHECK_MESSAGE(res.pass_rate() == 1.0, "siamese dx worst rel err ", res.worst_rel_err);
  }
}
