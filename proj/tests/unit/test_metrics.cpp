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

#include <algorithm>
#include <cmath>

#include "metric_oracles.hpp"
#include "marrnet/eval/metrics.hpp"

using namespace marrnet;
using namespace marrnet::eval;

namespace {

EmbeddingTable random_table(int n, int dim, int n_classes, Rng& rng, Modality m = Modality::M2) {
  EmbeddingTable t;
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::uniform_int_distribution<int> cls(0, n_classes - 1);
  for (int i = 0; i < n; ++i) {
    EmbeddingRow row;
    row.source_id = "g" + std::to_string(i);
    row.class_id = cls(rng);
    row.modality = m;
    row.embedding.resize(dim);
    for (double& v : row.embedding) v = dist(rng);
    t.rows.push_back(row);
  }
  return t;
}

}  // namespace

TEST_CASE("rank puts an exact-match embedding first and orders by distance") {
  EmbeddingTable gallery;
  gallery.rows.push_back({"a", 0, Modality::M2, {0.0, 0.0}});
  gallery.rows.push_back({"b", 1, Modality::M2, {1.0, 0.0}});
  gallery.rows.push_back({"c", 2, Modality::M2, {2.0, 0.0}});

  const auto order = rank(std::vector<double>{1.0, 0.0}, gallery);
  CHECK(gallery.rows[order[0]].source_id == "b");

  // 2-point gallery at distances 1 and 4.
  EmbeddingTable two;
  two.rows.push_back({"far", 0, Modality::M2, {2.0}});
  two.rows.push_back({"near", 1, Modality::M2, {1.0}});
  const auto o2 = rank(std::vector<double>{0.0}, two);
  CHECK(two.rows[o2[0]].source_id == "near");
  CHECK(two.rows[o2[1]].source_id == "far");

  CHECK_THROWS_AS(rank(std::vector<double>{0.0}, EmbeddingTable{}), EmptyGallery);
}

TEST_CASE("rank breaks exact ties by ascending source_id") {
  EmbeddingTable gallery;
  gallery.rows.push_back({"z", 0, Modality::M2, {1.0}});
  gallery.rows.push_back({"a", 1, Modality::M2, {1.0}});
  gallery.rows.push_back({"m", 2, Modality::M2, {1.0}});
  const auto order = rank(std::vector<double>{0.0}, gallery);
  CHECK(gallery.rows[order[0]].source_id == "a");
  CHECK(gallery.rows[order[1]].source_id == "m");
  CHECK(gallery.rows[order[2]].source_id == "z");
}

TEST_CASE("rank matches the exhaustive sort oracle on random galleries") {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    EmbeddingTable gallery = random_table(50, 4, 10, rng);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> query(4);
    for (double& v : query) v = dist(rng);
    CHECK(rank(query, gallery) == oracle::rank_bruteforce(query, gallery));
  }
}

TEST_CASE("recall_at_k hand cases") {
  // Perfect ranking: every k gives 1.
  std::vector<std::vector<size_t>> rankings = {{0, 1, 2}};
  std::vector<int> qlabels = {5};
  std::vector<int> glabels = {5, 1, 2};
  for (int k : {1, 2, 3, 10}) CHECK(recall_at_k(rankings, qlabels, glabels, k) == 1.0);

  // First same-class hit at rank 3.
  glabels = {1, 2, 5};
  CHECK(recall_at_k(rankings, qlabels, glabels, 1) == 0.0);
  CHECK(recall_at_k(rankings, qlabels, glabels, 2) == 0.0);
  CHECK(recall_at_k(rankings, qlabels, glabels, 3) == 1.0);
}

TEST_CASE("map_at_k hand case: hits at ranks 1 and 3 with R_q = 2, k = 3") {
  std::vector<std::vector<size_t>> rankings = {{0, 1, 2, 3}};
  std::vector<int> qlabels = {7};
  std::vector<int> glabels = {7, 1, 7, 2};  // relevant at ranks 1 and 3
  // AP@3 = (1/1 + 2/3) / min(3, 2) = 0.8333...
  CHECK(map_at_k(rankings, qlabels, glabels, 3) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("recall and map match brute-force recomputation on random instances") {
  Rng rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    const int n_gallery = 40, n_queries = 20, n_classes = 6;
    EmbeddingTable gallery = random_table(n_gallery, 3, n_classes, rng);
    std::vector<std::vector<size_t>> rankings;
    std::vector<int> qlabels;
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::uniform_int_distribution<int> cls(0, n_classes - 1);
    for (int q = 0; q < n_queries; ++q) {
      std::vector<double> query(3);
      for (double& v : query) v = dist(rng);
      rankings.push_back(rank(query, gallery));
      qlabels.push_back(cls(rng));
    }
    std::vector<int> glabels;
    for (const auto& g : gallery.rows) glabels.push_back(g.class_id);

    for (int k : {1, 3, 5, 17}) {
      CHECK(recall_at_k(rankings, qlabels, glabels, k) ==
            oracle::recall_bruteforce(rankings, qlabels, glabels, k));
      CHECK(std::abs(map_at_k(rankings, qlabels, glabels, k) -
                     oracle::map_bruteforce(rankings, qlabels, glabels, k)) < 1e-12);
    }
  }
}

TEST_CASE("metric invariants: recall nondecreasing in k, all metrics in [0,1]") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    EmbeddingTable gallery = random_table(30, 3, 5, rng);
    std::vector<std::vector<size_t>> rankings;
    std::vector<int> qlabels;
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::uniform_int_distribution<int> cls(0, 4);
    for (int q = 0; q < 10; ++q) {
      std::vector<double> query(3);
      for (double& v : query) v = dist(rng);
      rankings.push_back(rank(query, gallery));
      qlabels.push_back(cls(rng));
    }
    std::vector<int> glabels;
    for (const auto& g : gallery.rows) glabels.push_back(g.class_id);
    double prev = 0.0;
    for (int k = 1; k <= 30; ++k) {
      const double r = recall_at_k(rankings, qlabels, glabels, k);
      const double m = map_at_k(rankings, qlabels, glabels, k);
      CHECK(r >= prev);
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
      CHECK(m >= 0.0);
      CHECK(m <= 1.0);
      prev = r;
    }
  }
}

TEST_CASE("rank is invariant under rigid motions of all embeddings") {
  Rng rng(19);
  EmbeddingTable gallery = random_table(25, 2, 5, rng);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> query = {dist(rng), dist(rng)};
  const auto base = rank(query, gallery);

  // Translate + rotate everything by the same rigid motion.
  const double theta = 0.7, tx = 3.1, ty = -1.4;
  const auto move = [&](std::vector<double>& v) {
    const double x = v[0] * std::cos(theta) - v[1] * std::sin(theta) + tx;
    const double y = v[0] * std::sin(theta) + v[1] * std::cos(theta) + ty;
    v = {x, y};
  };
  EmbeddingTable moved = gallery;
  for (auto& r : moved.rows) move(r.embedding);
  std::vector<double> moved_query = query;
  move(moved_query);
  CHECK(rank(moved_query, moved) == base);
}

TEST_CASE("evaluate: identical per-class embeddings across modalities give all 1.0") {
  data::Dataset ds;
  ds.grid = data::GridConfig{0, 1, 4};
  for (int c = 0; c < 5; ++c) {
    for (Modality m : {Modality::M1, Modality::M2}) {
      data::Spectrum s;
      s.class_id = c;
      s.modality = m;
      s.source_id = std::string(to_string(m)) + std::to_string(c);
      s.values = {c * 0.1, 0.5, 0.25, 1.0};
      ds.spectra.push_back(s);
    }
  }
  // Embedder ignores modality: per-class constant embedding.
  const Embedder embedder = [](const data::Spectrum& s) {
    return std::vector<double>{static_cast<double>(s.class_id), 1.0};
  };
  for (Direction dir : {Direction::M1toM2, Direction::M2toM1, Direction::Averaged}) {
    const MetricsReport rep = evaluate(embedder, ds, dir);
    for (int k : {1, 3, 5}) {
      CHECK(rep.recall_at.at(k) == 1.0);
      CHECK(rep.map_at.at(k) == 1.0);
    }
  }
}

TEST_CASE("evaluate: random embeddings on 30 classes give Recall@1 near 1/30") {
  // Monte-Carlo over 50 seeds; the mean should concentrate near chance.
  const int n_classes = 30;
  double acc = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    data::Dataset ds;
    ds.grid = data::GridConfig{0, 1, 2};
    for (int c = 0; c < n_classes; ++c) {
      for (Modality m : {Modality::M1, Modality::M2}) {
        data::Spectrum s;
        s.class_id = c;
        s.modality = m;
        s.source_id = std::string(to_string(m)) + std::to_string(c);
        s.values = {0.0, 1.0};
        ds.spectra.push_back(s);
      }
    }
    Rng rng(derive_seed(seed, "random-embed"));
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<std::vector<double>> table(ds.spectra.size(), std::vector<double>(8));
    for (auto& e : table)
      for (double& v : e) v = dist(rng);
    const Embedder embedder = [&](const data::Spectrum& s) {
      for (size_t i = 0; i < ds.spectra.size(); ++i)
        if (ds.spectra[i].source_id == s.source_id) return table[i];
      throw Error("unknown spectrum");
    };
    acc += evaluate(embedder, ds, Direction::Averaged).recall_at.at(1);
  }
  const double mean = acc / 50.0;
  // Chance level 1/30 = 0.0333; allow generous sampling slack.
  CHECK(mean > 1.0 / 30.0 - 0.02);
  CHECK(mean < 1.0 / 30.0 + 0.02);
}

TEST_CASE("evaluate reports exactly the requested ks and mAP@1 == Recall@1") {
  Rng rng(23);
  data::Dataset ds;
  ds.grid = data::GridConfig{0, 1, 2};
  std::uniform_int_distribution<int> cls(0, 7);
  for (int i = 0; i < 40; ++i) {
    data::Spectrum s;
    s.class_id = i % 8;  // every class in both modalities
    s.modality = i % 2 ? Modality::M1 : Modality::M2;
    s.source_id = "s" + std::to_string(i);
    s.values = {0.0, 1.0};
    ds.spectra.push_back(s);
  }
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const Embedder embedder = [&](const data::Spectrum& s) {
    Rng r(fnv1a(s.source_id));
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    return std::vector<double>{d(r), d(r), d(r)};
  };
  const MetricsReport rep = evaluate(embedder, ds, Direction::Averaged);
  CHECK(rep.recall_at.size() == 3);
  CHECK(rep.map_at.size() == 3);
  CHECK(rep.recall_at.count(1) == 1);
  CHECK(rep.recall_at.count(3) == 1);
  CHECK(rep.recall_at.count(5) == 1);
  CHECK(rep.map_at.at(1) == rep.recall_at.at(1));  // exact equality
}
