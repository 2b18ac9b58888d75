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

// Experiment runner: dataset synthesis/preparation, training, retrieval
// evaluation, occlusion sweeps and the gamma sweep, all driven by one JSON
// config for reproducibility. Subcommands:
//   synth | prepare | train | eval | occlude | gamma-sweep

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "marrnet/config.hpp"
#include "marrnet/data/io.hpp"
#include "marrnet/eval/occlusion.hpp"
#include "marrnet/model/checkpoint.hpp"
#include "marrnet/synth/synth.hpp"
#include "marrnet/train/trainer.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace marrnet;

namespace {

struct Cli {
  std::string config_path;
  std::vector<std::string> overrides;
  bool quiet = false;
};

ExperimentConfig load_config(const Cli& cli) {
  std::string text = data::read_text_file(cli.config_path);
  if (!cli.overrides.empty()) text = apply_overrides(text, cli.overrides);
  return parse_config(text);
}

fs::path dataset_dir(const ExperimentConfig& cfg) { return fs::path(cfg.output_dir) / "dataset"; }
fs::path replicate_dir(const ExperimentConfig& cfg, int rep) {
  return fs::path(cfg.output_dir) / ("replicate_" + std::to_string(rep));
}

std::vector<double> grid_positions(const data::GridConfig& grid) {
  std::vector<double> pos(grid.length);
  const double step = (grid.max - grid.min) / (grid.length - 1);
  for (int i = 0; i < grid.length; ++i) pos[i] = grid.min + i * step;
  return pos;
}

/// Writes the synthetic dataset as spectrum files + manifest so synthetic
/// and real data flow through the identical load path. Idempotent per seed.
fs::path write_synth_dataset(const ExperimentConfig& cfg) {
  const fs::path dir = dataset_dir(cfg);
  const fs::path manifest_path = dir / "manifest.json";
  const data::Dataset ds = synth::gen_dataset(cfg.dataset.synth, cfg.dataset.grid);
  const std::vector<double> positions = grid_positions(cfg.dataset.grid);

  data::Manifest manifest;
  manifest.grid = cfg.dataset.grid;
  for (const auto& s : ds.spectra) {
    const std::string rel = "spectra/" + s.source_id + ".txt";
    data::write_spectrum_file(dir / rel, positions, s.values);
    manifest.records.push_back({rel, s.modality, s.class_id});
  }
  data::write_manifest(manifest, manifest_path);
  return manifest_path;
}

data::Dataset load_or_make_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.source == "manifest") return data::load_dataset(cfg.dataset.manifest_path);
  const fs::path manifest_path = dataset_dir(cfg) / "manifest.json";
  if (!fs::exists(manifest_path)) write_synth_dataset(cfg);
  return data::load_dataset(manifest_path);
}

train::TrainConfig replicate_train_config(const ExperimentConfig& cfg, int rep) {
  train::TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "train-replicate", static_cast<std::uint64_t>(rep));
  return tc;
}

ordered_json metrics_to_json(const eval::MetricsReport& rep) {
  ordered_json recall = ordered_json::object(), map = ordered_json::object();
  for (const auto& [k, v] : rep.recall_at) recall[std::to_string(k)] = v;
  for (const auto& [k, v] : rep.map_at) map[std::to_string(k)] = v;
  return ordered_json{{"direction", eval::to_string(rep.direction)},
                      {"recall_at", recall},
                      {"map_at", map},
                      {"n_queries", rep.n_queries},
                      {"n_gallery", rep.n_gallery}};
}

ordered_json curve_to_json(const eval::OcclusionCurve& c) {
  return ordered_json{{"mask_ratios", c.mask_ratios},     {"accuracy", c.accuracy},
                      {"stderr", c.stderr_per_ratio},     {"n_draws", c.n_draws},
                      {"masks_per_sample", c.masks_per_sample}, {"fill_value", c.fill_value}};
}

int run_synth(const Cli& cli) {
  const ExperimentConfig cfg = load_config(cli);
  if (cfg.dataset.source != "synth")
    throw InvalidConfig("synth: config dataset.source must be 'synth'");
  const fs::path manifest = write_synth_dataset(cfg);
  const data::Dataset ds = data::load_dataset(manifest);  // load-back validation
  if (!cli.quiet)
    std::cout << "wrote " << ds.spectra.size() << " spectra over "
              << ds.class_ids().size() << " classes to " << manifest << "\n";
  return 0;
}

int run_prepare(const Cli& cli) {
  const ExperimentConfig cfg = load_config(cli);
  const data::Dataset ds = load_or_make_dataset(cfg);
  ds.validate();

  int m1 = 0, m2 = 0;
  for (const auto& s : ds.spectra) (s.modality == Modality::M1 ? m1 : m2)++;
  const auto classes = ds.class_ids();
  const auto pairable = ds.pairable_classes();

  ordered_json rep;
  rep["n_spectra"] = ds.spectra.size();
  rep["n_m1"] = m1;
  rep["n_m2"] = m2;
  rep["n_classes"] = classes.size();
  rep["n_pairable_classes"] = pairable.size();
  rep["grid"] = {{"min", ds.grid.min}, {"max", ds.grid.max}, {"length", ds.grid.length}};
  std::vector<int> unpaired;
  for (int c : classes)
    if (std::find(pairable.begin(), pairable.end(), c) == pairable.end()) unpaired.push_back(c);
  rep["classes_missing_a_modality"] = unpaired;
  data::write_text_file(fs::path(cfg.output_dir) / "prepare_report.json", rep.dump(2) + "\n");
  if (!cli.quiet) std::cout << rep.dump(2) << "\n";
  if (!unpaired.empty())
    throw InsufficientClasses("prepare: " + std::to_string(unpaired.size()) +
                              " classes lack one modality");
  return 0;
}

int run_train(const Cli& cli) {
  const ExperimentConfig cfg = load_config(cli);
  const data::Dataset ds = load_or_make_dataset(cfg);
  for (int rep : cfg.replicates) {
    const data::SplitPlan split = data::make_splits(ds.class_ids(), cfg.seed, rep);
    const train::TrainConfig tc = replicate_train_config(cfg, rep);
    const fs::path dir = replicate_dir(cfg, rep);

    train::FitOptions opts;
    opts.state_path = dir / "state.mnst";
    opts.history_path = dir / "history.jsonl";
    if (!cli.quiet) {
      opts.on_epoch = [&](const train::EpochRecord& r) {
        if (r.epoch % 10 == 0 || r.epoch + 1 == tc.max_epochs)
          std::cout << "replicate " << rep << " epoch " << r.epoch << " total "
                    << r.losses.total << " val_recall1 " << r.val_recall1 << "\n";
      };
    }
    const train::TrainState state = train::fit(cfg.arch, tc, ds, split, opts);

    model::save_checkpoint(dir / "checkpoint_full.mnck", *state.best_params);
    const auto inf = train::strip_for_inference(*state.best_params);
    model::save_checkpoint(dir / "checkpoint_inference.mnck", *inf);
    if (!cli.quiet)
      std::cout << "replicate " << rep << " done: best val_recall1 " << state.best_val_recall1
                << " at epoch " << state.best_epoch << "\n";
  }
  return 0;
}

int run_eval(const Cli& cli) {
  const ExperimentConfig cfg = load_config(cli);
  const data::Dataset ds = load_or_make_dataset(cfg);

  const std::vector<eval::Direction> dirs = {eval::Direction::M1toM2, eval::Direction::M2toM1,
                                             eval::Direction::Averaged};
  std::map<std::string, std::map<int, std::vector<double>>> recall_acc, map_acc;
  ordered_json per_replicate = ordered_json::array();

  for (int rep : cfg.replicates) {
    const data::SplitPlan split = data::make_splits(ds.class_ids(), cfg.seed, rep);
    const data::Dataset test_set = data::subset(ds, split.test_classes);
    const auto inf =
        model::load_inference_checkpoint(replicate_dir(cfg, rep) / "checkpoint_inference.mnck");
    const eval::Embedder embedder = eval::make_embedder(*inf);

    ordered_json entry;
    entry["replicate"] = rep;
    for (eval::Direction d : dirs) {
      const eval::MetricsReport r = eval::evaluate(embedder, test_set, d, cfg.eval_ks);
      entry["metrics"].push_back(metrics_to_json(r));
      for (const auto& [k, v] : r.recall_at) recall_acc[eval::to_string(d)][k].push_back(v);
      for (const auto& [k, v] : r.map_at) map_acc[eval::to_string(d)][k].push_back(v);
    }
    per_replicate.push_back(entry);
    data::write_text_file(replicate_dir(cfg, rep) / "metrics.json",
                          entry.dump(2) + "\n");
  }

  const auto mean_std = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::pair<double, double>{mean, v.size() > 1 ? std::sqrt(var / (v.size() - 1)) : 0.0};
  };

  ordered_json summary;
  summary["replicates"] = per_replicate;
  std::string csv = "direction,statistic";
  for (int k : cfg.eval_ks) csv += ",recall@" + std::to_string(k);
  for (int k : cfg.eval_ks) csv += ",map@" + std::to_string(k);
  csv += "\n";
  for (const auto& [dname, per_k] : recall_acc) {
    ordered_json agg;
    std::string mean_row = dname + ",mean", std_row = dname + ",std";
    for (int k : cfg.eval_ks) {
      const auto [rm, rs] = mean_std(per_k.at(k));
      agg["recall_at"][std::to_string(k)] = {{"mean", rm}, {"std", rs}};
      char buf[64];
      std::snprintf(buf, sizeof(buf), ",%.6f", rm);
      mean_row += buf;
      std::snprintf(buf, sizeof(buf), ",%.6f", rs);
      std_row += buf;
    }
    for (int k : cfg.eval_ks) {
      const auto [mm, ms] = mean_std(map_acc.at(dname).at(k));
      agg["map_at"][std::to_string(k)] = {{"mean", mm}, {"std", ms}};
      char buf[64];
      std::snprintf(buf, sizeof(buf), ",%.6f", mm);
      mean_row += buf;
      std::snprintf(buf, sizeof(buf), ",%.6f", ms);
      std_row += buf;
    }
    summary["aggregate"][dname] = agg;
    csv += mean_row + "\n" + std_row + "\n";
  }
  data::write_text_file(fs::path(cfg.output_dir) / "metrics_summary.json",
                        summary.dump(2) + "\n");
  data::write_text_file(fs::path(cfg.output_dir) / "metrics_summary.csv", csv);
  if (!cli.quiet) std::cout << summary["aggregate"].dump(2) << "\n";
  return 0;
}

int run_occlude(const Cli& cli) {
  const ExperimentConfig cfg = load_config(cli);
  const data::Dataset ds = load_or_make_dataset(cfg);

  for (int rep : cfg.replicates) {
    const data::SplitPlan split = data::make_splits(ds.class_ids(), cfg.seed, rep);
    const data::Dataset test_set = data::subset(ds, split.test_classes);
    const auto inf =
        model::load_inference_checkpoint(replicate_dir(cfg, rep) / "checkpoint_inference.mnck");
    const eval::Embedder embedder = eval::make_embedder(*inf);

    const std::uint64_t mask_seed = derive_seed(cfg.seed, "occlusion", rep);
    const eval::OcclusionCurve cross =
        eval::occlusion_test(embedder, test_set, cfg.occlusion_ratios, cfg.occlusion_n_masks,
                             cfg.occlusion_fill, mask_seed);

    // Within-modality baseline per modality, then averaged.
    std::vector<data::Spectrum> m1, m2;
    for (const auto& s : test_set.spectra)
      (s.modality == Modality::M1 ? m1 : m2).push_back(s);
    const eval::OcclusionCurve w1 = eval::within_modality_baseline(
        embedder, m1, cfg.occlusion_ratios, cfg.occlusion_n_masks, cfg.occlusion_fill, mask_seed);
    const eval::OcclusionCurve w2 = eval::within_modality_baseline(
        embedder, m2, cfg.occlusion_ratios, cfg.occlusion_n_masks, cfg.occlusion_fill, mask_seed);

    ordered_json out;
    out["replicate"] = rep;
    out["cross_modality"] = curve_to_json(cross);
    out["within_modality_m1"] = curve_to_json(w1);
    out["within_modality_m2"] = curve_to_json(w2);
    ordered_json avg = ordered_json::array();
    for (size_t i = 0; i < cfg.occlusion_ratios.size(); ++i)
      avg.push_back(0.5 * (w1.accuracy[i] + w2.accuracy[i]));
    out["within_modality_averaged"] = avg;
    data::write_text_file(replicate_dir(cfg, rep) / "occlusion.json", out.dump(2) + "\n");

    std::string csv = "mask_ratio,cross_modality_accuracy,within_modality_accuracy\n";
    for (size_t i = 0; i < cfg.occlusion_ratios.size(); ++i) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f\n", cfg.occlusion_ratios[i],
                    cross.accuracy[i], 0.5 * (w1.accuracy[i] + w2.accuracy[i]));
      csv += buf;
    }
    data::write_text_file(replicate_dir(cfg, rep) / "occlusion.csv", csv);
    if (!cli.quiet)
      std::cout << "replicate " << rep << " occlusion curves written ("
                << cfg.occlusion_ratios.size() << " ratios)\n";
  }
  return 0;
}

int run_gamma_sweep(const Cli& cli) {
  const ExperimentConfig cfg = load_config(cli);
  if (cfg.gamma_rows.empty())
    throw InvalidConfig("gamma-sweep: config gamma_sweep.rows is empty");
  const data::Dataset ds = load_or_make_dataset(cfg);
  const int rep = cfg.replicates.front();
  const data::SplitPlan split = data::make_splits(ds.class_ids(), cfg.seed, rep);
  const data::Dataset test_set = data::subset(ds, split.test_classes);

  ordered_json rows = ordered_json::array();
  std::string csv = "g16,g2345,g7,test_recall1\n";
  for (size_t i = 0; i < cfg.gamma_rows.size(); ++i) {
    const GammaRow& row = cfg.gamma_rows[i];
    train::TrainConfig tc = replicate_train_config(cfg, rep);
    tc.weights.gamma = {row.g16, row.g2345, row.g2345, row.g2345, row.g2345, row.g16, row.g7};

    const fs::path dir = fs::path(cfg.output_dir) / ("gamma_row_" + std::to_string(i));
    train::FitOptions opts;
    opts.state_path = dir / "state.mnst";
    opts.history_path = dir / "history.jsonl";
    const train::TrainState state = train::fit(cfg.arch, tc, ds, split, opts);
    model::save_checkpoint(dir / "checkpoint_full.mnck", *state.best_params);
    const auto inf = train::strip_for_inference(*state.best_params);
    model::save_checkpoint(dir / "checkpoint_inference.mnck", *inf);

    const double r1 = eval::evaluate(eval::make_embedder(*inf), test_set,
                                     eval::Direction::Averaged, {1})
                          .recall_at.at(1);
    rows.push_back({{"g16", row.g16}, {"g2345", row.g2345}, {"g7", row.g7},
                    {"test_recall1", r1}});
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g,%.6f\n", row.g16, row.g2345, row.g7, r1);
    csv += buf;
    if (!cli.quiet)
      std::cout << "gamma row " << i << " (g16=" << row.g16 << ", g2345=" << row.g2345
                << ", g7=" << row.g7 << ") test recall@1 " << r1 << "\n";
  }
  ordered_json out;
  out["replicate"] = rep;
  out["rows"] = rows;
  data::write_text_file(fs::path(cfg.output_dir) / "gamma_sweep.json", out.dump(2) + "\n");
  data::write_text_file(fs::path(cfg.output_dir) / "gamma_sweep.csv", csv);
  return 0;
}

std::string error_name(const std::exception& e) {
  if (dynamic_cast<const MalformedFile*>(&e)) return "MalformedFile";
  if (dynamic_cast<const NonFiniteValue*>(&e)) return "NonFiniteValue";
  if (dynamic_cast<const DegenerateGrid*>(&e)) return "DegenerateGrid";
  if (dynamic_cast<const InsufficientClasses*>(&e)) return "InsufficientClasses";
  if (dynamic_cast<const NotEnoughClasses*>(&e)) return "NotEnoughClasses";
  if (dynamic_cast<const ShapeMismatch*>(&e)) return "ShapeMismatch";
  if (dynamic_cast<const EmptyGallery*>(&e)) return "EmptyGallery";
  if (dynamic_cast<const InvalidWindow*>(&e)) return "InvalidWindow";
  if (dynamic_cast<const NonFiniteLoss*>(&e)) return "NonFiniteLoss";
  if (dynamic_cast<const NonFinite*>(&e)) return "NonFinite";
  if (dynamic_cast<const InvalidConfig*>(&e)) return "InvalidConfig";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  if (dynamic_cast<const Error*>(&e)) return "Error";
  return "Exception";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modality spectrum matching toolkit"};
  app.require_subcommand(1);

  Cli cli;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", cli.config_path, "Experiment config JSON")->required();
    sub->add_option("--set", cli.overrides,
                    "Scalar config override, dotted.path=value (repeatable)");
    sub->add_flag("-q,--quiet", cli.quiet, "Suppress progress output");
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate the synthetic paired dataset");
  CLI::App* prepare = app.add_subcommand("prepare", "Validate and summarize the dataset");
  CLI::App* train_cmd = app.add_subcommand("train", "Train one checkpoint per replicate");
  CLI::App* eval_cmd = app.add_subcommand("eval", "Retrieval metrics per replicate + aggregate");
  CLI::App* occlude = app.add_subcommand("occlude", "Occlusion robustness curves");
  CLI::App* sweep = app.add_subcommand("gamma-sweep", "Train/evaluate per gamma grid row");
  for (CLI::App* sub : {synth, prepare, train_cmd, eval_cmd, occlude, sweep}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(cli);
    if (prepare->parsed()) return run_prepare(cli);
    if (train_cmd->parsed()) return run_train(cli);
    if (eval_cmd->parsed()) return run_eval(cli);
    if (occlude->parsed()) return run_occlude(cli);
    if (sweep->parsed()) return run_gamma_sweep(cli);
  } catch (const std::exception& e) {
    ordered_json err;
    err["error"] = error_name(e);
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
