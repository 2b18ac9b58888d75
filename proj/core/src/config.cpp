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

#include "marrnet/config.hpp"

#include <set>

#include "marrnet/data/io.hpp"

#include <json.hpp>

namespace marrnet {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const data::GridConfig& g) {
  return {{"min", g.min}, {"max", g.max}, {"length", g.length}};
}

data::GridConfig grid_from_json(const ordered_json& j) {
  data::GridConfig g;
  g.min = j.at("min").get<double>();
  g.max = j.at("max").get<double>();
  g.length = j.at("length").get<int>();
  return g;
}

ordered_json to_json(const synth::SynthSpec& s) {
  return {{"n_classes", s.n_classes},   {"per_class_m1", s.per_class_m1},
          {"per_class_m2", s.per_class_m2}, {"gap_level", s.gap_level},
          {"noise_sigma", s.noise_sigma},   {"seed", s.seed}};
}

synth::SynthSpec synth_from_json(const ordered_json& j) {
  synth::SynthSpec s;
  s.n_classes = j.at("n_classes").get<int>();
  s.per_class_m1 = j.at("per_class_m1").get<double>();
  s.per_class_m2 = j.at("per_class_m2").get<double>();
  s.gap_level = j.at("gap_level").get<double>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

ordered_json to_json(const model::ArchConfig& a) {
  return {{"input_length", a.input_length},
          {"encoder_blocks", a.encoder_blocks},
          {"base_channels", a.base_channels},
          {"bottleneck_dim", a.bottleneck_dim},
          {"kernel_size", a.kernel_size},
          {"siamese_channels", a.siamese_channels},
          {"embedding_dim", a.embedding_dim},
          {"disc_blocks", a.disc_blocks}};
}

model::ArchConfig arch_from_json(const ordered_json& j) {
  model::ArchConfig a;
  a.input_length = j.at("input_length").get<int>();
  a.encoder_blocks = j.at("encoder_blocks").get<int>();
  a.base_channels = j.at("base_channels").get<int>();
  a.bottleneck_dim = j.at("bottleneck_dim").get<int>();
  a.kernel_size = j.at("kernel_size").get<int>();
  const auto sc = j.at("siamese_channels").get<std::vector<int>>();
  if (sc.size() != 3) throw InvalidConfig("config: siamese_channels must have 3 entries");
  a.siamese_channels = {sc[0], sc[1], sc[2]};
  a.embedding_dim = j.at("embedding_dim").get<int>();
  a.disc_blocks = j.at("disc_blocks").get<int>();
  return a;
}

ordered_json to_json(const train::TrainConfig& t) {
  return {{"max_epochs", t.max_epochs},
          {"lr_main", t.lr_main},
          {"lr_disc", t.lr_disc},
          {"lr_decay", t.lr_decay},
          {"lr_decay_every", t.lr_decay_every},
          {"batch_pairs", t.batch_pairs},
          {"weights",
           {{"gamma", t.weights.gamma},
            {"alpha", t.weights.alpha},
            {"triplets_per_batch", t.weights.triplets_per_batch}}},
          {"triplet_bidirectional", t.triplet_bidirectional},
          {"adam_beta1", t.adam_beta1},
          {"adam_beta2", t.adam_beta2},
          {"adam_eps", t.adam_eps},
          {"augment",
           {{"enabled", t.augment.enabled},
            {"shift_max", t.augment.shift_max},
            {"noise_sigma", t.augment.noise_sigma},
            {"scale_min", t.augment.scale_min},
            {"scale_max", t.augment.scale_max}}}};
}

train::TrainConfig train_from_json(const ordered_json& j) {
  train::TrainConfig t;
  t.max_epochs = j.at("max_epochs").get<int>();
  t.lr_main = j.at("lr_main").get<double>();
  t.lr_disc = j.at("lr_disc").get<double>();
  t.lr_decay = j.at("lr_decay").get<double>();
  t.lr_decay_every = j.at("lr_decay_every").get<int>();
  t.batch_pairs = j.at("batch_pairs").get<int>();
  const auto& w = j.at("weights");
  const auto gamma = w.at("gamma").get<std::vector<double>>();
  if (gamma.size() != 7) throw InvalidConfig("config: weights.gamma must have 7 entries");
  std::copy(gamma.begin(), gamma.end(), t.weights.gamma.begin());
  t.weights.alpha = w.at("alpha").get<double>();
  t.weights.triplets_per_batch = w.at("triplets_per_batch").get<int>();
  t.triplet_bidirectional = j.at("triplet_bidirectional").get<bool>();
  t.adam_beta1 = j.at("adam_beta1").get<double>();
  t.adam_beta2 = j.at("adam_beta2").get<double>();
  t.adam_eps = j.at("adam_eps").get<double>();
  const auto& a = j.at("augment");
  t.augment.enabled = a.at("enabled").get<bool>();
  t.augment.shift_max = a.at("shift_max").get<int>();
  t.augment.noise_sigma = a.at("noise_sigma").get<double>();
  t.augment.scale_min = a.at("scale_min").get<double>();
  t.augment.scale_max = a.at("scale_max").get<double>();
  return t;
}

}  // namespace

void ExperimentConfig::validate() const {
  arch.validate();
  train.validate();
  dataset.grid.validate();
  if (dataset.source != "synth" && dataset.source != "manifest")
    throw InvalidConfig("config: dataset.source must be 'synth' or 'manifest'");
  if (dataset.source == "manifest" && dataset.manifest_path.empty())
    throw InvalidConfig("config: dataset.manifest_path is required for manifest source");
  if (dataset.source == "synth") dataset.synth.validate();
  if (dataset.grid.length != arch.input_length)
    throw InvalidConfig("config: dataset.grid.length must equal arch.input_length");
  if (replicates.empty()) throw InvalidConfig("config: replicates must be non-empty");
  std::set<int> seen;
  for (int r : replicates) {
    if (r < 0 || r > 4) throw InvalidConfig("config: replicate indices must be in 0..4");
    if (!seen.insert(r).second) throw InvalidConfig("config: duplicate replicate index");
  }
  if (eval_ks.empty()) throw InvalidConfig("config: eval_ks must be non-empty");
  for (int k : eval_ks)
    if (k < 1) throw InvalidConfig("config: eval_ks entries must be >= 1");
  for (double r : occlusion_ratios)
    if (r < 0.0 || r >= 1.0) throw InvalidConfig("config: occlusion ratios must be in [0, 1)");
  if (occlusion_n_masks < 1) throw InvalidConfig("config: occlusion_n_masks must be >= 1");
  if (output_dir.empty()) throw InvalidConfig("config: output_dir must be set");
}

ExperimentConfig parse_config(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();
    const auto& d = j.at("dataset");
    c.dataset.source = d.at("source").get<std::string>();
    c.dataset.manifest_path = d.value("manifest_path", std::string{});
    if (d.contains("synth")) c.dataset.synth = synth_from_json(d.at("synth"));
    c.dataset.grid = grid_from_json(d.at("grid"));
    c.arch = arch_from_json(j.at("arch"));
    c.train = train_from_json(j.at("train"));
    c.replicates = j.at("replicates").get<std::vector<int>>();
    c.eval_ks = j.at("eval_ks").get<std::vector<int>>();
    const auto& occ = j.at("occlusion");
    c.occlusion_ratios = occ.at("ratios").get<std::vector<double>>();
    c.occlusion_n_masks = occ.at("n_masks").get<int>();
    c.occlusion_fill = occ.at("fill").get<double>();
    c.gamma_rows.clear();
    if (j.contains("gamma_sweep")) {
      for (const auto& row : j.at("gamma_sweep").at("rows")) {
        c.gamma_rows.push_back({row.at("g16").get<double>(), row.at("g2345").get<double>(),
                                row.at("g7").get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string serialize_config(const ExperimentConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["dataset"] = {{"source", c.dataset.source},
                  {"manifest_path", c.dataset.manifest_path},
                  {"synth", to_json(c.dataset.synth)},
                  {"grid", to_json(c.dataset.grid)}};
  j["arch"] = to_json(c.arch);
  j["train"] = to_json(c.train);
  j["replicates"] = c.replicates;
  j["eval_ks"] = c.eval_ks;
  j["occlusion"] = {{"ratios", c.occlusion_ratios},
                    {"n_masks", c.occlusion_n_masks},
                    {"fill", c.occlusion_fill}};
  ordered_json rows = ordered_json::array();
  for (const auto& r : c.gamma_rows)
    rows.push_back({{"g16", r.g16}, {"g2345", r.g2345}, {"g7", r.g7}});
  j["gamma_sweep"] = {{"rows", rows}};
  return j.dump(2) + "\n";
}

ExperimentConfig load_config_file(const std::string& path) {
  return parse_config(data::read_text_file(path));
}

void save_config_file(const ExperimentConfig& cfg, const std::string& path) {
  data::write_text_file(path, serialize_config(cfg));
}

std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& overrides) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
  for (const std::string& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw InvalidConfig("override must look like dotted.path=value: " + ov);
    std::string pointer = "/" + ov.substr(0, eq);
    for (char& ch : pointer)
      if (ch == '.') ch = '/';
    const std::string value = ov.substr(eq + 1);
    ordered_json parsed;
    try {
      parsed = ordered_json::parse(value);
    } catch (const nlohmann::json::exception&) {
      parsed = value;  // plain string
    }
    try {
      j[nlohmann::json::json_pointer(pointer)] = parsed;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidConfig("override " + ov + ": " + e.what());
    }
  }
  return j.dump(2) + "\n";
}

}  // namespace marrnet
