#pragma once

// The command layer. Every command reads its inputs from and writes its
// artifacts to the output directory, so a chain of separate invocations and
// run_all() produce the same bytes.
//
//   gen-bench          world/                      (manifest + FMAP/LMAP pairs)
//   warmup             models/warmup.json          train_log_warmup.csv
//   fit-maps           models/maps.json, models/centroids.json, maps_summary.csv
//   assign-pl          pl/target_NNN.lmap          pl_summary.csv
//   fit-target-protos  models/target_protos.json   target_protos.csv
//   compute-stm        stm/source_NNN.wmap         entropy.csv, stm_summary.csv
//   self-train         models/self.json            train_log.csv
//   evaluate           eval.csv

#include <filesystem>
#include <string>
#include <vector>

#include "protost/config.hpp"
#include "protost/synthbench.hpp"

namespace protost {

struct ArtifactLayout {
  std::filesystem::path out;
  std::filesystem::path world;

  explicit ArtifactLayout(const PipelineConfig& cfg);

  std::filesystem::path model(const std::string& name) const { return out / "models" / (name + ".json"); }
  std::filesystem::path pl_dir() const { return out / "pl"; }
  std::filesystem::path stm_dir() const { return out / "stm"; }
};

void cmd_gen_bench(const PipelineConfig& cfg);
void cmd_warmup(const PipelineConfig& cfg);
void cmd_fit_maps(const PipelineConfig& cfg);
void cmd_assign_pl(const PipelineConfig& cfg);
void cmd_fit_target_protos(const PipelineConfig& cfg);
void cmd_compute_stm(const PipelineConfig& cfg);
void cmd_self_train(const PipelineConfig& cfg);

struct EvalSummary {
  std::string tag;  // "warmup" or "self"
  EvalReport report;
};

/// Target evaluation of every trained model present; writes eval.csv.
std::vector<EvalSummary> cmd_evaluate(const PipelineConfig& cfg);

/// Evaluates one LMAP against another.
EvalReport evaluate_label_files(const std::filesystem::path& pred, const std::filesystem::path& truth, int classes);

/// gen-bench (unless world.dir is set) through evaluate.
std::vector<EvalSummary> cmd_run_all(const PipelineConfig& cfg);

struct SweepDeltaRow {
  double delta = 0.0;
  double pl_ratio = 0.0;
  double pl_accuracy = 0.0;
  double miou = 0.0;  // after self-training on that delta's labels
};
/// Writes sweep_delta.csv.
std::vector<SweepDeltaRow> cmd_sweep_delta(const PipelineConfig& cfg);

struct SweepKRow {
  std::size_t k = 0;
  double pl_ratio = 0.0;
  double pl_accuracy = 0.0;
  double miou = 0.0;
};
/// Writes sweep_k.csv.
std::vector<SweepKRow> cmd_sweep_k(const PipelineConfig& cfg);

struct BenchRow {
  std::string strategy;  // maps | cas | conf | cas-matched
  double threshold = 0.0;
  double pl_ratio = 0.0;
  double pl_accuracy = 0.0;
};
/// One row per configured (strategy, threshold) plus, for each maps row, a cas
/// row whose radius is chosen to match that row's pl_ratio. Writes bench_pla.csv.
std::vector<BenchRow> cmd_bench_pla(const PipelineConfig& cfg);

}  // namespace protost
