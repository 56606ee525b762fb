#pragma once

#include <string>
#include <vector>

#include "readmit/bayes.hpp"
#include "readmit/data.hpp"
#include "readmit/embeddings.hpp"
#include "readmit/train.hpp"

namespace readmit {

// Everything a run needs; loaded from one JSON file, then overridable by
// READMIT_* environment variables and command-line flags (flags win).
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  // cohort source: CSV paths, or the synthetic generator when has_synth
  std::string stays_path;
  std::string events_path;
  bool has_synth = false;
  SynthConfig synth;
  LoadOptions load;

  TrainConfig train;
  BbbConfig bbb;
  std::vector<std::string> archs;  // empty = every architecture

  int bootstrap_resamples = kDefaultBootstrapResamples;
  int or_samples = kDefaultOrSamples;
  int topk_codes = 10;

  MceConfig mce_dp{365.0, 8, 5, 0.001, 128};  // window in days
  MceConfig mce_mv{24.0, 8, 5, 0.001, 128};   // window in hours
  bool mce_finetune = false;

  double h_max_dp = 1.0;  // days per Euler step
  double h_max_mv = 1.0;  // hours per Euler step
  int ode_max_steps = 32;

  double val_fraction = 0.1;
  double test_fraction = 0.1;
  int jobs = 1;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_json(const RunConfig& cfg);  // pretty-printed

// READMIT_SEED, READMIT_OUT_DIR, READMIT_JOBS, READMIT_TRAIN_LR,
// READMIT_TRAIN_BATCH_SIZE, READMIT_TRAIN_EPOCHS, READMIT_TRAIN_DROPOUT,
// READMIT_BOOTSTRAP_RESAMPLES, READMIT_OR_SAMPLES, READMIT_BBB_PATIENCE,
// READMIT_BBB_MAX_EPOCHS
void apply_env_overrides(RunConfig& cfg);

// Cohort plus the planted ground truth when the synthetic generator was used.
struct ResolvedCohort {
  Cohort cohort;
  bool synthetic = false;
  PlantedTruth truth;
};
ResolvedCohort resolve_cohort(const RunConfig& cfg);

ModelConfig model_config_for(const RunConfig& cfg, Arch arch, const Cohort& cohort);

}  // namespace readmit
