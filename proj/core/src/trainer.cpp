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

#include "marrnet/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "marrnet/eval/metrics.hpp"

#include <json.hpp>

namespace marrnet::train {

using model::EncodeOutput;
using model::EncoderCtx;
using model::DecoderCtx;
using nn::ForwardOpts;
using nn::LayerCtx;
using nn::Mode;

namespace {

constexpr std::uint64_t kStepStride = 1u << 20;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}



double grad_norm(const model::ModelParams& params, const std::string& role) {
  double acc = 0.0;
  const std::array<std::string, 1> roles = {role};
  params.visit_params(
      [&](const std::string&, nn::Param& p) {
        for (double g : p.grad) acc += g * g;
      },
      roles);
  return std::sqrt(acc);
}

}  // namespace

void TrainConfig::validate() const {
  if (max_epochs < 1) throw InvalidConfig("TrainConfig: max_epochs must be >= 1");
  if (!(lr_main > 0) || !(lr_disc > 0)) throw InvalidConfig("TrainConfig: learning rates must be > 0");
  if (!(lr_decay > 0.0) || lr_decay > 1.0) throw InvalidConfig("TrainConfig: lr_decay in (0, 1]");
  if (lr_decay_every < 1) throw InvalidConfig("TrainConfig: lr_decay_every must be >= 1");
  if (batch_pairs < 1) throw InvalidConfig("TrainConfig: batch_pairs must be >= 1");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1))
    throw InvalidConfig("TrainConfig: Adam betas must be in [0, 1)");
  if (!(adam_eps > 0)) throw InvalidConfig("TrainConfig: Adam eps must be > 0");
  weights.validate();
  augment.validate();
}

std::string TrainConfig::fingerprint() const {
  std::string s = "max_epochs=" + std::to_string(max_epochs) + ";lr_main=" + fmt(lr_main) +
                  ";lr_disc=" + fmt(lr_disc) + ";lr_decay=" + fmt(lr_decay) +
                  ";lr_decay_every=" + std::to_string(lr_decay_every) +
                  ";batch_pairs=" + std::to_string(batch_pairs) + ";gamma=";
  for (double g : weights.gamma) s += fmt(g) + ",";
  s += ";alpha=" + fmt(weights.alpha) + ";K=" + std::to_string(weights.triplets_per_batch) +
       ";bidir=" + std::to_string(triplet_bidirectional) + ";b1=" + fmt(adam_beta1) +
       ";b2=" + fmt(adam_beta2) + ";eps=" + fmt(adam_eps) +
       ";aug=" + std::to_string(augment.enabled) + "," + std::to_string(augment.shift_max) + "," +
       fmt(augment.noise_sigma) + "," + fmt(augment.scale_min) + "," + fmt(augment.scale_max) +
       ";seed=" + std::to_string(seed);
  return s;
}

double lr_at(int epoch, double base, const TrainConfig& cfg) {
  if (epoch < 0) throw InvalidConfig("lr_at: epoch must be >= 0");
  return base * std::pow(cfg.lr_decay, epoch / cfg.lr_decay_every);
}

// ------------------------------------------------------------------- Adam

void Adam::bind(const model::ModelParams& params, std::span<const std::string> roles) {
  names_.clear();
  params_.clear();
  params.visit_params(
      [&](const std::string& name, nn::Param& p) {
        names_.push_back(name);
        params_.push_back(&p);
      },
      roles);
  if (m_.size() != params_.size()) {
    m_.assign(params_.size(), {});
    v_.assign(params_.size(), {});
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i]->size(), 0.0);
      v_[i].assign(params_[i]->size(), 0.0);
    }
  }
}

void Adam::step(double lr, double beta1, double beta2, double eps) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    nn::Param& p = *params_[i];
    for (size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m_[i][j] = beta1 * m_[i][j] + (1.0 - beta1) * g;
      v_[i][j] = beta2 * v_[i][j] + (1.0 - beta2) * g * g;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ------------------------------------------------------------- TrainState

TrainState make_train_state(const model::ArchConfig& arch, const TrainConfig& cfg) {
  cfg.validate();
  TrainState state;
  state.arch = arch;
  state.params = model::init_params(arch, cfg.seed);
  state.adam_main.bind(*state.params, model::ModelParams::kMainRoles);
  state.adam_disc.bind(*state.params, model::ModelParams::kDiscRoles);
  return state;
}

void save_train_state(const std::filesystem::path& path, const TrainState& state,
                      const TrainConfig& cfg) {
  model::Archive a;
  a.format = "train_state";
  a.role = "full";
  a.arch = state.arch;

  state.params->visit_all([&](const std::string& name, nn::Param& p) {
    a.entries.push_back({"param/" + name, p.shape, p.value});
  });
  if (state.best_params) {
    state.best_params->visit_all([&](const std::string& name, nn::Param& p) {
      a.entries.push_back({"best/" + name, p.shape, p.value});
    });
  }
  const auto dump_adam = [&](const Adam& adam, const std::string& tag) {
    const auto& m = adam.moments_m();
    const auto& v = adam.moments_v();
    for (size_t i = 0; i < m.size(); ++i) {
      a.entries.push_back({tag + "/m/" + adam.names()[i], {static_cast<int>(m[i].size())}, m[i]});
      a.entries.push_back({tag + "/v/" + adam.names()[i], {static_cast<int>(v[i].size())}, v[i]});
    }
  };
  dump_adam(state.adam_main, "adam_main");
  dump_adam(state.adam_disc, "adam_disc");

  nlohmann::ordered_json extra;
  extra["fingerprint"] = cfg.fingerprint();
  extra["next_epoch"] = state.next_epoch;
  extra["best_epoch"] = state.best_epoch;
  extra["best_val_recall1"] = state.best_val_recall1;
  extra["adam_main_t"] = state.adam_main.step_count();
  extra["adam_disc_t"] = state.adam_disc.step_count();
  extra["history"] = nlohmann::ordered_json::array();
  for (const auto& rec : state.history)
    extra["history"].push_back(nlohmann::ordered_json::parse(epoch_record_to_json(rec)));
  a.extra_json = extra.dump();

  const std::filesystem::path tmp = path.string() + ".tmp";
  model::save_archive(tmp, a);
  std::filesystem::rename(tmp, path);
}

TrainState load_train_state(const std::filesystem::path& path, const TrainConfig& cfg) {
  model::Archive a = model::load_archive(path);
  if (a.format != "train_state") throw MalformedFile(path.string() + ": not a train state");
  const auto extra = nlohmann::ordered_json::parse(a.extra_json);
  if (extra.at("fingerprint").get<std::string>() != cfg.fingerprint())
    throw InvalidConfig(path.string() + ": state was produced by a different train config");

  TrainState state;
  state.arch = a.arch;
  state.params = std::make_unique<model::ModelParams>(a.arch);

  std::map<std::string, const model::ArchiveEntry*> by_name;
  for (const auto& e : a.entries) by_name[e.name] = &e;
  const auto restore = [&](model::ModelParams& params, const std::string& prefix) {
    params.visit_all([&](const std::string& name, nn::Param& p) {
      auto it = by_name.find(prefix + name);
      if (it == by_name.end()) throw MalformedFile("train state: missing " + prefix + name);
      if (it->second->data.size() != p.value.size())
        throw MalformedFile("train state: size mismatch for " + prefix + name);
      p.value = it->second->data;
    });
  };
  restore(*state.params, "param/");
  state.best_epoch = extra.at("best_epoch").get<int>();
  if (by_name.count("best/e1.block0.0.w")) {
    state.best_params = std::make_unique<model::ModelParams>(a.arch);
    restore(*state.best_params, "best/");
  }
  state.best_val_recall1 = extra.at("best_val_recall1").get<double>();
  state.next_epoch = extra.at("next_epoch").get<int>();

  state.adam_main.bind(*state.params, model::ModelParams::kMainRoles);
  state.adam_disc.bind(*state.params, model::ModelParams::kDiscRoles);
  const auto restore_adam = [&](Adam& adam, const std::string& tag, std::int64_t t) {
    adam.set_step_count(t);
    for (size_t i = 0; i < adam.names().size(); ++i) {
      const auto m_it = by_name.find(tag + "/m/" + adam.names()[i]);
      const auto v_it = by_name.find(tag + "/v/" + adam.names()[i]);
      if (m_it == by_name.end() || v_it == by_name.end())
        throw MalformedFile("train state: missing optimizer moments for " + adam.names()[i]);
      adam.moments_m()[i] = m_it->second->data;
      adam.moments_v()[i] = v_it->second->data;
    }
  };
  restore_adam(state.adam_main, "adam_main", extra.at("adam_main_t").get<std::int64_t>());
  restore_adam(state.adam_disc, "adam_disc", extra.at("adam_disc_t").get<std::int64_t>());

  for (const auto& rec : extra.at("history"))
    state.history.push_back(epoch_record_from_json(rec.dump()));
  return state;
}

// -------------------------------------------------------------- PairBatch

void PairBatch::validate() const {
  if (m1.size() != m2.size() || m1.empty()) throw ShapeMismatch("PairBatch: bad sizes");
  for (size_t i = 0; i < m1.size(); ++i) {
    if (m1[i].modality != Modality::M1 || m2[i].modality != Modality::M2)
      throw Error("PairBatch: modality mismatch at " + std::to_string(i));
    if (m1[i].class_id != m2[i].class_id)
      throw Error("PairBatch: classes differ at " + std::to_string(i));
  }
}

PairBatch sample_pair_batch(const data::Dataset& train_set, int batch_pairs, Rng& rng) {
  const std::vector<int> eligible = train_set.pairable_classes();
  if (eligible.empty()) throw NotEnoughClasses("sample_pair_batch: no class has both modalities");
  std::uniform_int_distribution<size_t> class_dist(0, eligible.size() - 1);
  PairBatch batch;
  for (int b = 0; b < batch_pairs; ++b) {
    const int cls = eligible[class_dist(rng)];
    const auto i1 = train_set.find(cls, Modality::M1);
    const auto i2 = train_set.find(cls, Modality::M2);
    std::uniform_int_distribution<size_t> d1(0, i1.size() - 1), d2(0, i2.size() - 1);
    batch.m1.push_back(train_set.spectra[i1[d1(rng)]]);
    batch.m2.push_back(train_set.spectra[i2[d2(rng)]]);
  }
  batch.validate();
  return batch;
}

// -------------------------------------------------------------- train_step

Tensor stack_spectra(const std::vector<data::Spectrum>& specs) {
  if (specs.empty()) throw ShapeMismatch("stack_spectra: empty batch");
  Tensor t(static_cast<int>(specs.size()), 1, specs.front().length());
  for (size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].length() != specs.front().length())
      throw ShapeMismatch("stack_spectra: ragged lengths");
    std::copy(specs[i].values.begin(), specs[i].values.end(),
              t.v.begin() + static_cast<long>(i) * specs.front().length());
  }
  return t;
}

namespace {

struct TripletForward {
  EncoderCtx a_enc, p_enc, n_enc;
  std::vector<LayerCtx> a_s, p_s, n_s;
  Tensor emb_a, emb_p, emb_n;
  loss::TripletGrads grads;
};

/// Forward anchors through the anchor-modality encoder and pos/neg through
/// the other, then the shared Siamese; computes the triplet term + grads.
TripletForward triplet_forward(const model::ModelParams& params,
                               const data::TripletBatch& batch, double alpha,
                               const ForwardOpts& opts) {
  TripletForward f;
  const model::Encoder& ea = params.encoder(batch.anchor_modality);
  const model::Encoder& ep = params.encoder(other(batch.anchor_modality));
  const EncodeOutput enc_a = ea.forward(stack_spectra(batch.anchors), f.a_enc, opts);
  const EncodeOutput enc_p = ep.forward(stack_spectra(batch.positives), f.p_enc, opts);
  const EncodeOutput enc_n = ep.forward(stack_spectra(batch.negatives), f.n_enc, opts);
  f.emb_a = params.siamese().forward(enc_a.bottleneck, f.a_s, opts);
  f.emb_p = params.siamese().forward(enc_p.bottleneck, f.p_s, opts);
  f.emb_n = params.siamese().forward(enc_n.bottleneck, f.n_s, opts);
  f.grads = loss::triplet_loss_batch(f.emb_a, f.emb_p, f.emb_n, alpha);
  return f;
}

/// Backpropagates a scaled triplet gradient through S and the encoders.
void triplet_backward(const model::ModelParams& params, const data::TripletBatch& batch,
                      TripletForward& f, double scale) {
  const std::array<Tensor, 3> no_skips = {};
  const model::Encoder& ea = params.encoder(batch.anchor_modality);
  const model::Encoder& ep = params.encoder(other(batch.anchor_modality));

  Tensor da = f.grads.d_anchor;
  Tensor dp = f.grads.d_positive;
  Tensor dn = f.grads.d_negative;
  da.scale(scale);
  dp.scale(scale);
  dn.scale(scale);
  ea.backward(f.a_enc, params.siamese().backward(f.a_s, da, true), no_skips, true);
  ep.backward(f.p_enc, params.siamese().backward(f.p_s, dp, true), no_skips, true);
  ep.backward(f.n_enc, params.siamese().backward(f.n_s, dn, true), no_skips, true);
}

}  // namespace

std::pair<Tensor, Tensor> compute_cross_fakes(const model::ModelParams& params, const Tensor& x1,
                                              const Tensor& x2, bool stats_update) {
  const ForwardOpts opts{Mode::kTrain, stats_update};
  EncoderCtx e1_ctx, e2_ctx;
  const EncodeOutput enc1 = params.encoder(Modality::M1).forward(x1, e1_ctx, opts);
  const EncodeOutput enc2 = params.encoder(Modality::M2).forward(x2, e2_ctx, opts);
  DecoderCtx g1_ctx, g2_ctx;
  Tensor fake1 = params.decoder(Modality::M1).forward(enc2, g1_ctx, opts);
  Tensor fake2 = params.decoder(Modality::M2).forward(enc1, g2_ctx, opts);
  return {std::move(fake1), std::move(fake2)};
}

DiscLosses disc_losses_and_grads(const model::ModelParams& params, const loss::LossWeights& w,
                                 const Tensor& x1, const Tensor& fake1, const Tensor& x2,
                                 const Tensor& fake2, bool stats_update, bool accumulate) {
  const ForwardOpts opts{Mode::kTrain, stats_update};
  const auto& g = w.gamma;
  std::vector<LayerCtx> d1r, d1f, d2r, d2f;
  const model::Discriminator& d1 = params.discriminator(Modality::M1);
  const model::Discriminator& d2 = params.discriminator(Modality::M2);
  const Tensor lr1 = d1.forward(x1, d1r, opts);
  const Tensor lf1 = d1.forward(fake1, d1f, opts);
  const Tensor lr2 = d2.forward(x2, d2r, opts);
  const Tensor lf2 = d2.forward(fake2, d2f, opts);
  loss::AdvDiscGrads adv1 = loss::adv_disc_loss_batch(lr1, lf1);
  loss::AdvDiscGrads adv2 = loss::adv_disc_loss_batch(lr2, lf2);
  if (accumulate && g[0] > 0.0) {
    d1.backward(d1r, adv1.d_real_logits.scale(g[0]), true);
    d1.backward(d1f, adv1.d_fake_logits.scale(g[0]), true);
  }
  if (accumulate && g[5] > 0.0) {
    d2.backward(d2r, adv2.d_real_logits.scale(g[5]), true);
    d2.backward(d2f, adv2.d_fake_logits.scale(g[5]), true);
  }
  return {adv1.value, adv2.value};
}

loss::LossReport main_losses_and_grads(const model::ModelParams& params, const TrainConfig& cfg,
                                       const Tensor& x1, const Tensor& x2,
                                       const data::TripletBatch& triplets,
                                       const data::TripletBatch* mirrored, bool accumulate) {
  const auto& g = cfg.weights.gamma;
  const ForwardOpts opts{Mode::kTrain, false};

  EncoderCtx e1_ctx, e2_ctx;
  const EncodeOutput enc1 = params.encoder(Modality::M1).forward(x1, e1_ctx, opts);
  const EncodeOutput enc2 = params.encoder(Modality::M2).forward(x2, e2_ctx, opts);

  DecoderCtx g1_rec_ctx, g2_rec_ctx, g1_cross_ctx, g2_cross_ctx;
  const Tensor rec1 = params.decoder(Modality::M1).forward(enc1, g1_rec_ctx, opts);
  const Tensor rec2 = params.decoder(Modality::M2).forward(enc2, g2_rec_ctx, opts);
  const Tensor fake1 = params.decoder(Modality::M1).forward(enc2, g1_cross_ctx, opts);
  const Tensor fake2 = params.decoder(Modality::M2).forward(enc1, g2_cross_ctx, opts);

  TripletForward trip = triplet_forward(params, triplets, cfg.weights.alpha, opts);
  std::optional<TripletForward> trip_mirror;
  if (mirrored && cfg.triplet_bidirectional)
    trip_mirror = triplet_forward(params, *mirrored, cfg.weights.alpha, opts);

  loss::LossReport report;
  Tensor d_rec1, d_rec2, d_fake1_l1, d_fake2_l1;
  report.rec_1 = loss::l1_mean(rec1, x1, &d_rec1);
  report.rec_2 = loss::l1_mean(rec2, x2, &d_rec2);
  report.cross_12 = loss::l1_mean(fake1, x1, &d_fake1_l1);
  report.cross_21 = loss::l1_mean(fake2, x2, &d_fake2_l1);

  std::vector<LayerCtx> d1g_ctx, d2g_ctx;
  const Tensor lf1 = params.discriminator(Modality::M1).forward(fake1, d1g_ctx, opts);
  const Tensor lf2 = params.discriminator(Modality::M2).forward(fake2, d2g_ctx, opts);
  loss::AdvGenGrads gen1 = loss::adv_gen_loss_batch(lf1);
  loss::AdvGenGrads gen2 = loss::adv_gen_loss_batch(lf2);
  report.gen_1 = gen1.value;
  report.gen_2 = gen2.value;

  const double mirror_w = trip_mirror ? 0.5 : 1.0;
  report.triplet = trip.grads.value * mirror_w +
                   (trip_mirror ? trip_mirror->grads.value * mirror_w : 0.0);
  if (!accumulate) return report;

  // Gradient into each generated sample: cross term + generator adversarial
  // term back through the frozen discriminator.
  Tensor d_fake1 = d_fake1_l1;
  d_fake1.scale(g[1]);
  if (g[0] > 0.0) {
    d_fake1 += params.discriminator(Modality::M1)
                   .backward(d1g_ctx, gen1.d_fake_logits.scale(g[0]), false);
  }
  Tensor d_fake2 = d_fake2_l1;
  d_fake2.scale(g[4]);
  if (g[5] > 0.0) {
    d_fake2 += params.discriminator(Modality::M2)
                   .backward(d2g_ctx, gen2.d_fake_logits.scale(g[5]), false);
  }

  model::DecoderGrads from_g1_cross, from_g2_cross, from_g1_rec, from_g2_rec;
  bool have_g1_cross = false, have_g2_cross = false, have_g1_rec = false, have_g2_rec = false;
  const auto nonzero = [](const Tensor& t) {
    for (double v : t.v)
      if (v != 0.0) return true;
    return false;
  };
  if (nonzero(d_fake1)) {
    from_g1_cross = params.decoder(Modality::M1).backward(g1_cross_ctx, d_fake1, true);
    have_g1_cross = true;
  }
  if (nonzero(d_fake2)) {
    from_g2_cross = params.decoder(Modality::M2).backward(g2_cross_ctx, d_fake2, true);
    have_g2_cross = true;
  }
  if (g[2] > 0.0) {
    d_rec1.scale(g[2]);
    from_g1_rec = params.decoder(Modality::M1).backward(g1_rec_ctx, d_rec1, true);
    have_g1_rec = true;
  }
  if (g[3] > 0.0) {
    d_rec2.scale(g[3]);
    from_g2_rec = params.decoder(Modality::M2).backward(g2_rec_ctx, d_rec2, true);
    have_g2_rec = true;
  }

  // Encoder gradients: own-reconstruction path plus the other decoder's
  // cross path (enc1 feeds G2's transform, enc2 feeds G1's).
  const auto accumulate_enc = [&](const model::Encoder& enc, const EncoderCtx& ctx,
                                  const model::DecoderGrads* rec_part,
                                  const model::DecoderGrads* cross_part, int batch) {
    Tensor d_bneck(batch, params.cfg().bottleneck_dim, 1);
    std::array<Tensor, 3> d_skips;
    bool any = false;
    for (const model::DecoderGrads* part : {rec_part, cross_part}) {
      if (!part) continue;
      any = true;
      d_bneck += part->d_bottleneck;
      for (int i = 0; i < 3; ++i) {
        if (d_skips[i].size() == 0)
          d_skips[i] = part->d_skips[i];
        else
          d_skips[i] += part->d_skips[i];
      }
    }
    if (any) enc.backward(ctx, d_bneck, d_skips, true);
  };
  accumulate_enc(params.encoder(Modality::M1), e1_ctx, have_g1_rec ? &from_g1_rec : nullptr,
                 have_g2_cross ? &from_g2_cross : nullptr, x1.n);
  accumulate_enc(params.encoder(Modality::M2), e2_ctx, have_g2_rec ? &from_g2_rec : nullptr,
                 have_g1_cross ? &from_g1_cross : nullptr, x2.n);

  triplet_backward(params, triplets, trip, g[6] * mirror_w);
  if (trip_mirror) triplet_backward(params, *mirrored, *trip_mirror, g[6] * mirror_w);
  return report;
}

loss::LossReport train_step(TrainState& state, const TrainConfig& cfg, const PairBatch& pairs,
                            const data::TripletBatch& triplets,
                            const data::TripletBatch* mirrored, StepDebug* debug) {
  cfg.validate();
  pairs.validate();
  triplets.validate();
  if (triplets.anchor_modality != Modality::M1)
    throw InvalidConfig("train_step: primary triplet batch must anchor in M1");
  if (mirrored) {
    mirrored->validate();
    if (mirrored->anchor_modality != Modality::M2)
      throw InvalidConfig("train_step: mirrored triplet batch must anchor in M2");
  }
  model::ModelParams& params = *state.params;
  const Tensor x1 = stack_spectra(pairs.m1);
  const Tensor x2 = stack_spectra(pairs.m2);

  // Phase 1: generated samples are constants; only D1/D2 receive gradients.
  // This is the step's single BN running-statistics update.
  const auto [fake1, fake2] = compute_cross_fakes(params, x1, x2, true);
  params.zero_grads();
  const DiscLosses disc = disc_losses_and_grads(params, cfg.weights, x1, fake1, x2, fake2,
                                                true, true);
  if (debug) {
    debug->phase1_grad_norm["d1"] = grad_norm(params, "d1");
    debug->phase1_grad_norm["d2"] = grad_norm(params, "d2");
  }
  state.adam_disc.step(lr_at(state.next_epoch, cfg.lr_disc, cfg), cfg.adam_beta1, cfg.adam_beta2,
                       cfg.adam_eps);
  if (debug) {
    debug->disc_values_after_phase1.clear();
    params.visit_params(
        [&](const std::string&, nn::Param& p) {
          debug->disc_values_after_phase1.insert(debug->disc_values_after_phase1.end(),
                                                 p.value.begin(), p.value.end());
        },
        model::ModelParams::kDiscRoles);
  }

  // Phase 2: main update through the frozen, freshly-updated discriminators.
  params.zero_grads();
  loss::LossReport report = main_losses_and_grads(params, cfg, x1, x2, triplets, mirrored, true);
  report.disc_1 = disc.disc_1;
  report.disc_2 = disc.disc_2;
  try {
    loss::total_loss(report, cfg.weights);
  } catch (const NonFinite& e) {
    throw NonFiniteLoss(e.what());
  }
  if (debug) {
    for (const char* role : {"e1", "e2", "g1", "g2", "d1", "d2", "s"})
      debug->phase2_grad_norm[role] = grad_norm(params, role);
  }
  state.adam_main.step(lr_at(state.next_epoch, cfg.lr_main, cfg), cfg.adam_beta1, cfg.adam_beta2,
                       cfg.adam_eps);

  if (const char* bad = report.first_non_finite())
    throw NonFiniteLoss(std::string("train_step: non-finite loss term ") + bad);
  return report;
}

// -------------------------------------------------------------------- fit

void validate_split_coverage(const data::Dataset& dataset, const data::SplitPlan& split) {
  for (const auto* part : {&split.train_classes, &split.val_classes, &split.test_classes}) {
    for (int cls : *part) {
      if (dataset.find(cls, Modality::M1).empty() || dataset.find(cls, Modality::M2).empty())
        throw InsufficientClasses("split class " + std::to_string(cls) +
                                  " lacks a modality in the dataset");
    }
  }
}

TrainState fit(const model::ArchConfig& arch, const TrainConfig& cfg,
               const data::Dataset& dataset, const data::SplitPlan& split,
               const FitOptions& opts) {
  cfg.validate();
  arch.validate();
  dataset.validate();
  if (dataset.grid.length != arch.input_length)
    throw ShapeMismatch("fit: dataset grid length != model input length");
  validate_split_coverage(dataset, split);

  const data::Dataset train_set = data::subset(dataset, split.train_classes);
  const data::Dataset val_set = data::subset(dataset, split.val_classes);

  TrainState state;
  const bool can_resume = opts.resume && !opts.state_path.empty() &&
                          std::filesystem::exists(opts.state_path);
  if (can_resume)
    state = load_train_state(opts.state_path, cfg);
  else
    state = make_train_state(arch, cfg);

  // History log is rebuilt from the state so a resumed run converges to the
  // same file an uninterrupted run writes.
  std::ofstream history_out;
  if (!opts.history_path.empty()) {
    if (opts.history_path.has_parent_path())
      std::filesystem::create_directories(opts.history_path.parent_path());
    history_out.open(opts.history_path, std::ios::trunc);
    if (!history_out) throw IoError("cannot write " + opts.history_path.string());
    for (const auto& rec : state.history) history_out << epoch_record_to_json(rec) << "\n";
    history_out.flush();
  }

  const int n_train_m1 = [&] {
    int n = 0;
    for (const auto& s : train_set.spectra)
      if (s.modality == Modality::M1) ++n;
    return n;
  }();
  const int steps_per_epoch = std::max(1, (n_train_m1 + cfg.batch_pairs - 1) / cfg.batch_pairs);
  const int stop_epoch = opts.stop_epoch >= 0 ? std::min(opts.stop_epoch, cfg.max_epochs)
                                              : cfg.max_epochs;

  const eval::Embedder embedder = eval::make_embedder(*state.params);

  for (; state.next_epoch < stop_epoch; ) {
    const int epoch = state.next_epoch;
    loss::LossReport sum;
    for (int step = 0; step < steps_per_epoch; ++step) {
      Rng rng = make_rng(cfg.seed, "train-step",
                         static_cast<std::uint64_t>(epoch) * kStepStride + step);
      PairBatch pairs = sample_pair_batch(train_set, cfg.batch_pairs, rng);
      data::TripletBatch trip =
          data::sample_triplet_batch(train_set, cfg.weights.triplets_per_batch, rng, Modality::M1);
      std::optional<data::TripletBatch> mirror;
      if (cfg.triplet_bidirectional)
        mirror = data::sample_triplet_batch(train_set, cfg.weights.triplets_per_batch, rng,
                                            Modality::M2);
      if (cfg.augment.enabled) {
        for (auto* group : {&pairs.m1, &pairs.m2})
          for (auto& s : *group) s = data::augment(s, cfg.augment, rng);
        for (auto* group : {&trip.anchors, &trip.positives, &trip.negatives})
          for (auto& s : *group) s = data::augment(s, cfg.augment, rng);
        if (mirror)
          for (auto* group : {&mirror->anchors, &mirror->positives, &mirror->negatives})
            for (auto& s : *group) s = data::augment(s, cfg.augment, rng);
      }
      loss::LossReport rep;
      try {
        rep = train_step(state, cfg, pairs, trip, mirror ? &*mirror : nullptr);
      } catch (const NonFiniteLoss& e) {
        throw NonFiniteLoss(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step) + ")");
      }
      sum.rec_1 += rep.rec_1;
      sum.rec_2 += rep.rec_2;
      sum.cross_12 += rep.cross_12;
      sum.cross_21 += rep.cross_21;
      sum.disc_1 += rep.disc_1;
      sum.gen_1 += rep.gen_1;
      sum.disc_2 += rep.disc_2;
      sum.gen_2 += rep.gen_2;
      sum.triplet += rep.triplet;
      sum.total += rep.total;
    }
    const double inv = 1.0 / steps_per_epoch;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr_main = lr_at(epoch, cfg.lr_main, cfg);
    rec.lr_disc = lr_at(epoch, cfg.lr_disc, cfg);
    rec.losses = sum;
    rec.losses.rec_1 *= inv;
    rec.losses.rec_2 *= inv;
    rec.losses.cross_12 *= inv;
    rec.losses.cross_21 *= inv;
    rec.losses.disc_1 *= inv;
    rec.losses.gen_1 *= inv;
    rec.losses.disc_2 *= inv;
    rec.losses.gen_2 *= inv;
    rec.losses.triplet *= inv;
    rec.losses.total *= inv;
    rec.val_recall1 = eval::mean_recall1(embedder, val_set);

    if (rec.val_recall1 > state.best_val_recall1) {
      state.best_val_recall1 = rec.val_recall1;
      state.best_epoch = epoch;
      state.best_params = state.params->clone();
    }
    state.history.push_back(rec);
    state.next_epoch = epoch + 1;

    if (history_out.is_open()) {
      history_out << epoch_record_to_json(rec) << "\n";
      history_out.flush();
    }
    if (!opts.state_path.empty()) save_train_state(opts.state_path, state, cfg);
    if (opts.on_epoch) opts.on_epoch(rec);
    if (opts.stop_at_val_recall1 >= 0.0 && rec.val_recall1 >= opts.stop_at_val_recall1) break;
  }

  if (!state.best_params) {
    state.best_params = state.params->clone();
    state.best_epoch = state.next_epoch - 1;
  }
  return state;
}

std::unique_ptr<model::InferenceParams> strip_for_inference(const model::ModelParams& params) {
  auto inf = std::make_unique<model::InferenceParams>(params.cfg());
  std::map<std::string, nn::Param*> dst;
  inf->visit_all([&](const std::string& name, nn::Param& p) { dst[name] = &p; });
  const std::array<std::string, 3> roles = {"e1", "e2", "s"};
  params.visit_all(
      [&](const std::string& name, nn::Param& p) {
        auto it = dst.find(name);
        if (it == dst.end()) throw Error("strip_for_inference: unexpected tensor " + name);
        it->second->value = p.value;
      },
      roles);
  return inf;
}

std::string epoch_record_to_json(const EpochRecord& rec) {
  nlohmann::ordered_json j;
  j["epoch"] = rec.epoch;
  j["lr_main"] = rec.lr_main;
  j["lr_disc"] = rec.lr_disc;
  j["rec_1"] = rec.losses.rec_1;
  j["rec_2"] = rec.losses.rec_2;
  j["cross_12"] = rec.losses.cross_12;
  j["cross_21"] = rec.losses.cross_21;
  j["disc_1"] = rec.losses.disc_1;
  j["gen_1"] = rec.losses.gen_1;
  j["disc_2"] = rec.losses.disc_2;
  j["gen_2"] = rec.losses.gen_2;
  j["triplet"] = rec.losses.triplet;
  j["total"] = rec.losses.total;
  j["val_recall1"] = rec.val_recall1;
  return j.dump();
}

EpochRecord epoch_record_from_json(const std::string& line) {
  const auto j = nlohmann::ordered_json::parse(line);
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.lr_main = j.at("lr_main").get<double>();
  r.lr_disc = j.at("lr_disc").get<double>();
  r.losses.rec_1 = j.at("rec_1").get<double>();
  r.losses.rec_2 = j.at("rec_2").get<double>();
  r.losses.cross_12 = j.at("cross_12").get<double>();
  r.losses.cross_21 = j.at("cross_21").get<double>();
  r.losses.disc_1 = j.at("disc_1").get<double>();
  r.losses.gen_1 = j.at("gen_1").get<double>();
  r.losses.disc_2 = j.at("disc_2").get<double>();
  r.losses.gen_2 = j.at("gen_2").get<double>();
  r.losses.triplet = j.at("triplet").get<double>();
  r.losses.total = j.at("total").get<double>();
  r.val_recall1 = j.at("val_recall1").get<double>();
  return r;
}

}  // namespace marrnet::train
