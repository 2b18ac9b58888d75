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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "marrnet/data/spectrum.hpp"
#include "marrnet/model/checkpoint.hpp"

namespace marrnet::eval {

/// Maps a spectrum to its embedding (eval-mode, deterministic).
using Embedder = std::function<std::vector<double>(const data::Spectrum&)>;

Embedder make_embedder(const model::InferenceParams& params);
Embedder make_embedder(const model::ModelParams& params);

struct EmbeddingRow {
  std::string source_id;
  int class_id = 0;
  Modality modality = Modality::M1;
  std::vector<double> embedding;
};

struct EmbeddingTable {
  std::vector<EmbeddingRow> rows;
  void validate() const;  // uniform embedding dim, unique source ids
};

/// One row per spectrum, computed in eval mode.
EmbeddingTable embed_all(const Embedder& embedder, const data::Dataset& ds);

/// Gallery row indices sorted by ascending squared Euclidean distance to the
/// query; exact distance ties break by ascending source_id.
std::vector<size_t> rank(std::span<const double> query, const EmbeddingTable& gallery);

/// Fraction of queries with at least one same-class gallery item among the
/// top k. rankings[q] is the rank() output for query q.
double recall_at_k(const std::vector<std::vector<size_t>>& rankings,
                   const std::vector<int>& query_labels, const std::vector<int>& gallery_labels,
                   int k);

/// Mean truncated average precision:
///   AP@k = (sum_{i<=k} rel(i) * Prec@i) / min(k, R_q)
/// with R_q the same-class gallery count; queries with R_q = 0 are excluded.
double map_at_k(const std::vector<std::vector<size_t>>& rankings,
                const std::vector<int>& query_labels, const std::vector<int>& gallery_labels,
                int k);

enum class Direction { M1toM2, M2toM1, Averaged };

const char* to_string(Direction d);
Direction direction_from_string(const std::string& s);

struct MetricsReport {
  Direction direction = Direction::Averaged;
  std::map<int, double> recall_at;
  std::map<int, double> map_at;
  int n_queries = 0;
  int n_gallery = 0;
};

/// Retrieval metrics with queries = test spectra of the source modality and
/// gallery = test spectra of the target modality. The averaged direction is
/// the arithmetic mean of the two single-direction reports.
MetricsReport evaluate(const Embedder& embedder, const data::Dataset& test_set, Direction dir,
                       const std::vector<int>& ks = {1, 3, 5});
MetricsReport evaluate_table(const EmbeddingTable& table, Direction dir,
                             const std::vector<int>& ks = {1, 3, 5});

/// Direction-averaged Recall@1 (the validation metric used during training).
double mean_recall1(const Embedder& embedder, const data::Dataset& ds);

}  // namespace marrnet::eval
