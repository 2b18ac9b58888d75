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

#include "marrnet/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace marrnet::eval {

Embedder make_embedder(const model::InferenceParams& params) {
  return [&params](const data::Spectrum& s) {
    return model::embed_values(params, s.values, s.modality);
  };
}

Embedder make_embedder(const model::ModelParams& params) {
  return [&params](const data::Spectrum& s) {
    return model::embed_values(params, s.values, s.modality);
  };
}

void EmbeddingTable::validate() const {
  std::set<std::string> ids;
  for (const auto& r : rows) {
    if (r.embedding.size() != rows.front().embedding.size())
      throw ShapeMismatch("EmbeddingTable: non-uniform embedding dim");
    if (!ids.insert(r.source_id).second)
      throw Error("EmbeddingTable: duplicate source_id " + r.source_id);
  }
}

EmbeddingTable embed_all(const Embedder& embedder, const data::Dataset& ds) {
  EmbeddingTable table;
  table.rows.reserve(ds.spectra.size());
  for (const auto& s : ds.spectra)
    table.rows.push_back({s.source_id, s.class_id, s.modality, embedder(s)});
  table.validate();
  return table;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

std::vector<size_t> rank(std::span<const double> query, const EmbeddingTable& gallery) {
  if (gallery.rows.empty()) throw EmptyGallery("rank: empty gallery");
  std::vector<double> dist(gallery.rows.size());
  for (size_t i = 0; i < gallery.rows.size(); ++i) {
    if (gallery.rows[i].embedding.size() != query.size())
      throw ShapeMismatch("rank: embedding dim mismatch");
    dist[i] = sq_dist(query, gallery.rows[i].embedding);
  }
  std::vector<size_t> order(gallery.rows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return gallery.rows[a].source_id < gallery.rows[b].source_id;
  });
  return order;
}

double recall_at_k(const std::vector<std::vector<size_t>>& rankings,
                   const std::vector<int>& query_labels, const std::vector<int>& gallery_labels,
                   int k) {
  if (k < 1) throw InvalidConfig("recall_at_k: k must be >= 1");
  if (rankings.size() != query_labels.size())
    throw ShapeMismatch("recall_at_k: rankings/labels size mismatch");
  if (rankings.empty()) return 0.0;
  int hits = 0;
  for (size_t q = 0; q < rankings.size(); ++q) {
    const size_t top = std::min<size_t>(k, rankings[q].size());
    for (size_t i = 0; i < top; ++i) {
      if (gallery_labels[rankings[q][i]] == query_labels[q]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double map_at_k(const std::vector<std::vector<size_t>>& rankings,
                const std::vector<int>& query_labels, const std::vector<int>& gallery_labels,
                int k) {
  if (k < 1) throw InvalidConfig("map_at_k: k must be >= 1");
  if (rankings.size() != query_labels.size())
    throw ShapeMismatch("map_at_k: rankings/labels size mismatch");
  double ap_sum = 0.0;
  int counted = 0;
  for (size_t q = 0; q < rankings.size(); ++q) {
    int relevant_total = 0;
    for (int gl : gallery_labels)
      if (gl == query_labels[q]) ++relevant_total;
    if (relevant_total == 0) continue;  // undefined AP, excluded
    ++counted;

    const size_t top = std::min<size_t>(k, rankings[q].size());
    int rel_seen = 0;
    double ap = 0.0;
    for (size_t i = 0; i < top; ++i) {
      if (gallery_labels[rankings[q][i]] == query_labels[q]) {
        ++rel_seen;
        ap += static_cast<double>(rel_seen) / static_cast<double>(i + 1);
      }
    }
    ap_sum += ap / std::min(k, relevant_total);
  }
  return counted == 0 ? 0.0 : ap_sum / counted;
}

const char* to_string(Direction d) {
  switch (d) {
    case Direction::M1toM2: return "M1->M2";
    case Direction::M2toM1: return "M2->M1";
    default: return "averaged";
  }
}

Direction direction_from_string(const std::string& s) {
  if (s == "M1->M2") return Direction::M1toM2;
  if (s == "M2->M1") return Direction::M2toM1;
  if (s == "averaged") return Direction::Averaged;
  throw InvalidConfig("unknown direction: " + s);
}

namespace {

MetricsReport evaluate_one_direction(const EmbeddingTable& table, Modality query_mod,
                                     const std::vector<int>& ks) {
  EmbeddingTable gallery;
  std::vector<const EmbeddingRow*> queries;
  for (const auto& r : table.rows) {
    if (r.modality == query_mod)
      queries.push_back(&r);
    else
      gallery.rows.push_back(r);
  }
  if (queries.empty() || gallery.rows.empty())
    throw EmptyGallery("evaluate: a modality side is empty");

  std::vector<std::vector<size_t>> rankings;
  std::vector<int> query_labels;
  rankings.reserve(queries.size());
  for (const auto* q : queries) {
    rankings.push_back(rank(q->embedding, gallery));
    query_labels.push_back(q->class_id);
  }
  std::vector<int> gallery_labels;
  for (const auto& g : gallery.rows) gallery_labels.push_back(g.class_id);

  MetricsReport rep;
  rep.direction = query_mod == Modality::M1 ? Direction::M1toM2 : Direction::M2toM1;
  rep.n_queries = static_cast<int>(queries.size());
  rep.n_gallery = static_cast<int>(gallery.rows.size());
  for (int k : ks) {
    rep.recall_at[k] = recall_at_k(rankings, query_labels, gallery_labels, k);
    rep.map_at[k] = map_at_k(rankings, query_labels, gallery_labels, k);
  }
  return rep;
}

}  // namespace

MetricsReport evaluate_table(const EmbeddingTable& table, Direction dir,
                             const std::vector<int>& ks) {
  if (dir == Direction::M1toM2) return evaluate_one_direction(table, Modality::M1, ks);
  if (dir == Direction::M2toM1) return evaluate_one_direction(table, Modality::M2, ks);
  const MetricsReport a = evaluate_one_direction(table, Modality::M1, ks);
  const MetricsReport b = evaluate_one_direction(table, Modality::M2, ks);
  MetricsReport rep;
  rep.direction = Direction::Averaged;
  rep.n_queries = a.n_queries + b.n_queries;
  rep.n_gallery = a.n_gallery + b.n_gallery;
  for (int k : ks) {
    rep.recall_at[k] = 0.5 * (a.recall_at.at(k) + b.recall_at.at(k));
    rep.map_at[k] = 0.5 * (a.map_at.at(k) + b.map_at.at(k));
  }
  return rep;
}

MetricsReport evaluate(const Embedder& embedder, const data::Dataset& test_set, Direction dir,
                       const std::vector<int>& ks) {
  return evaluate_table(embed_all(embedder, test_set), dir, ks);
}

double mean_recall1(const Embedder& embedder, const data::Dataset& ds) {
  return evaluate(embedder, ds, Direction::Averaged, {1}).recall_at.at(1);
}

}  // namespace marrnet::eval
