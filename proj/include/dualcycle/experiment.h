#ifndef DUALCYCLE_EXPERIMENT_H_
#define DUALCYCLE_EXPERIMENT_H_

#include <cstdint>
#include <string>
#include <vector>

#include "dualcycle/data.h"
#include "dualcycle/data_synth.h"
#include "dualcycle/models.h"
#include "dualcycle/report.h"
#include "dualcycle/trainer.h"

namespace dualcycle {

struct ExperimentConfig {
  // [data]
  std::string train_path;
  std::string test_path;
  bool synthetic = false;  // generate the corpus instead of reading files
  SynthConfig synth;
  int subset = 0;  // cap on training pairs; 0 keeps everything
  DataConfig data;
  // [model]
  ModelConfig model;
  int made_hidden = 200;
  int made_orderings = 5;
  // [train]
  std::string scheme = "a";
  TrainConfig train;
  std::vector<std::uint64_t> seeds = {13, 42, 1337};
  // [pretrain]
  int lm_epochs = 5;
  double lm_lr = 2e-3;
  int made_epochs = 10;
  double made_lr = 2e-3;
  // [out]
  std::string out_dir = "runs/out";
};

// Line-oriented `key = value` file with [section] headers; unknown keys are
// configuration errors.
ExperimentConfig load_experiment_config(const std::string& path);
std::string config_echo(const ExperimentConfig& cfg);

// Loads or synthesizes the corpus, applies the deterministic subset cap, and
// writes the dataset manifest under out_dir.
Dataset prepare_dataset(const ExperimentConfig& cfg);

// Full protocol: per seed, pretrain reward models if the scheme needs them,
// train, write per-epoch artifacts, then write the seed-averaged summary.
// Returns the per-seed final reports.
std::vector<SeedSummary> run_experiment(const ExperimentConfig& cfg);

// Rebuilds the summary files from the per-seed artifacts in a run directory.
struct ExportedSummary {
  std::string table;
  std::string json;
};
ExportedSummary export_report(const std::string& scheme_dir);

// Renders recorded cycle traces from a run directory.
std::string show_cycle_examples(const std::string& run_dir, int count);

std::string scheme_dir(const ExperimentConfig& cfg);

}  // namespace dualcycle

#endif  // DUALCYCLE_EXPERIMENT_H_
