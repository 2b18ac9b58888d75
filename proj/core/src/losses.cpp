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

#include "marrnet/loss/losses.hpp"

#include <cmath>

namespace marrnet::loss {

namespace {

double softplus(double x) {
  // log(1 + e^x), stable for large |x|.
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double l1_mean_span(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeMismatch("l1: length mismatch");
  if (a.empty()) throw ShapeMismatch("l1: empty input");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

}  // namespace

bool LossReport::all_finite() const { return first_non_finite() == nullptr; }

const char* LossReport::first_non_finite() const {
  const std::pair<const char*, double> items[] = {
      {"rec_1", rec_1},     {"rec_2", rec_2},   {"cross_12", cross_12},
      {"cross_21", cross_21}, {"disc_1", disc_1}, {"gen_1", gen_1},
      {"disc_2", disc_2},   {"gen_2", gen_2},   {"triplet", triplet},
      {"total", total}};
  for (const auto& [name, v] : items)
    if (!std::isfinite(v)) return name;
  return nullptr;
}

double rec_loss(std::span<const double> reconstruction, std::span<const double> target) {
  return l1_mean_span(reconstruction, target);
}

double cross_loss(std::span<const double> transformed, std::span<const double> target) {
  return l1_mean_span(transformed, target);
}

double prob_real(std::span<const double, 2> logits) { return sigmoid(logits[1] - logits[0]); }

double adv_disc_loss(std::span<const double, 2> real_logits,
                     std::span<const double, 2> fake_logits) {
  const double u_real = real_logits[1] - real_logits[0];
  const double u_fake = fake_logits[1] - fake_logits[0];
  // -log D(real) - log(1 - D(fake)) in logit space.
  const double v = softplus(-u_real) + softplus(u_fake);
  if (!std::isfinite(v)) throw NonFinite("adv_disc_loss: non-finite");
  return v;
}

double adv_gen_loss(std::span<const double, 2> fake_logits) {
  const double u_fake = fake_logits[1] - fake_logits[0];
  const double v = softplus(-u_fake);  // -log D(fake)
  if (!std::isfinite(v)) throw NonFinite("adv_gen_loss: non-finite");
  return v;
}

double triplet_loss(const std::vector<std::vector<double>>& anchors,
                    const std::vector<std::vector<double>>& positives,
                    const std::vector<std::vector<double>>& negatives, double alpha) {
  if (anchors.size() != positives.size() || anchors.size() != negatives.size())
    throw ShapeMismatch("triplet_loss: K mismatch");
  if (anchors.empty()) throw ShapeMismatch("triplet_loss: K must be >= 1");
  double total = 0.0;
  for (size_t k = 0; k < anchors.size(); ++k) {
    const auto& a = anchors[k];
    const auto& p = positives[k];
    const auto& n = negatives[k];
    if (a.size() != p.size() || a.size() != n.size())
      throw ShapeMismatch("triplet_loss: embedding dim mismatch");
    double dp = 0.0, dn = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
      dp += (a[i] - p[i]) * (a[i] - p[i]);
      dn += (a[i] - n[i]) * (a[i] - n[i]);
    }
    total += std::max(dp - dn + alpha, 0.0);
  }
  return total;
}

double total_loss(LossReport& report, const LossWeights& weights) {
  weights.validate();
  const auto& g = weights.gamma;
  report.total = g[0] * (report.disc_1 + report.gen_1) + g[5] * (report.disc_2 + report.gen_2) +
                 g[1] * report.cross_12 + g[4] * report.cross_21 + g[2] * report.rec_1 +
                 g[3] * report.rec_2 + g[6] * report.triplet;
  if (const char* bad = report.first_non_finite())
    throw NonFinite(std::string("total_loss: non-finite component ") + bad);
  return report.total;
}

double l1_mean(const Tensor& a, const Tensor& b, Tensor* d_a) {
  if (!a.same_shape(b)) throw ShapeMismatch("l1_mean: shape mismatch");
  const double inv = 1.0 / static_cast<double>(a.size());
  double acc = 0.0;
  if (d_a) *d_a = Tensor(a.n, a.c, a.l);
  for (size_t i = 0; i < a.v.size(); ++i) {
    const double d = a.v[i] - b.v[i];
    acc += std::abs(d);
    if (d_a) d_a->v[i] = (d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0));
  }
  return acc * inv;
}

AdvDiscGrads adv_disc_loss_batch(const Tensor& real_logits, const Tensor& fake_logits) {
  if (real_logits.c != 2 || fake_logits.c != 2 || real_logits.l != 1 || fake_logits.l != 1)
    throw ShapeMismatch("adv_disc_loss_batch: logits must be (N, 2, 1)");
  AdvDiscGrads out;
  out.d_real_logits = Tensor(real_logits.n, 2, 1);
  out.d_fake_logits = Tensor(fake_logits.n, 2, 1);
  const double inv_r = 1.0 / real_logits.n, inv_f = 1.0 / fake_logits.n;
  double acc = 0.0;
  for (int i = 0; i < real_logits.n; ++i) {
    const double u = real_logits.at(i, 1, 0) - real_logits.at(i, 0, 0);
    acc += softplus(-u) * inv_r;
    const double du = -sigmoid(-u) * inv_r;  // d softplus(-u)/du
    out.d_real_logits.at(i, 1, 0) = du;
    out.d_real_logits.at(i, 0, 0) = -du;
  }
  for (int i = 0; i < fake_logits.n; ++i) {
    const double u = fake_logits.at(i, 1, 0) - fake_logits.at(i, 0, 0);
    acc += softplus(u) * inv_f;
    const double du = sigmoid(u) * inv_f;
    out.d_fake_logits.at(i, 1, 0) = du;
    out.d_fake_logits.at(i, 0, 0) = -du;
  }
  if (!std::isfinite(acc)) throw NonFinite("adv_disc_loss_batch: non-finite");
  out.value = acc;
  return out;
}

AdvGenGrads adv_gen_loss_batch(const Tensor& fake_logits) {
  if (fake_logits.c != 2 || fake_logits.l != 1)
    throw ShapeMismatch("adv_gen_loss_batch: logits must be (N, 2, 1)");
  AdvGenGrads out;
  out.d_fake_logits = Tensor(fake_logits.n, 2, 1);
  const double inv = 1.0 / fake_logits.n;
  double acc = 0.0;
  for (int i = 0; i < fake_logits.n; ++i) {
    const double u = fake_logits.at(i, 1, 0) - fake_logits.at(i, 0, 0);
    acc += softplus(-u) * inv;
    const double du = -sigmoid(-u) * inv;
    out.d_fake_logits.at(i, 1, 0) = du;
    out.d_fake_logits.at(i, 0, 0) = -du;
  }
  if (!std::isfinite(acc)) throw NonFinite("adv_gen_loss_batch: non-finite");
  out.value = acc;
  return out;
}

TripletGrads triplet_loss_batch(const Tensor& anchor, const Tensor& positive,
                                const Tensor& negative, double alpha) {
  if (!anchor.same_shape(positive) || !anchor.same_shape(negative))
    throw ShapeMismatch("triplet_loss_batch: shape mismatch");
  if (anchor.l != 1) throw ShapeMismatch("triplet_loss_batch: embeddings must be (K, E, 1)");
  TripletGrads out;
  out.d_anchor = Tensor(anchor.n, anchor.c, 1);
  out.d_positive = Tensor(anchor.n, anchor.c, 1);
  out.d_negative = Tensor(anchor.n, anchor.c, 1);
  for (int k = 0; k < anchor.n; ++k) {
    double dp = 0.0, dn = 0.0;
    for (int j = 0; j < anchor.c; ++j) {
      const double ap = anchor.at(k, j, 0) - positive.at(k, j, 0);
      const double an = anchor.at(k, j, 0) - negative.at(k, j, 0);
      dp += ap * ap;
      dn += an * an;
    }
    const double margin = dp - dn + alpha;
    if (margin > 0.0) {
      out.value += margin;
      for (int j = 0; j < anchor.c; ++j) {
        const double ap = anchor.at(k, j, 0) - positive.at(k, j, 0);
        const double an = anchor.at(k, j, 0) - negative.at(k, j, 0);
        out.d_anchor.at(k, j, 0) = 2.0 * (ap - an);
        out.d_positive.at(k, j, 0) = -2.0 * ap;
        out.d_negative.at(k, j, 0) = 2.0 * an;
      }
    }
  }
  return out;
}

}  // namespace marrnet::loss
