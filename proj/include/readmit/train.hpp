#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "readmit/data.hpp"
#include "readmit/metrics.hpp"
#include "readmit/model.hpp"

namespace readmit {

struct TrainConfig {
  double lr = 0.001;
  int batch_size = 128;
  int epochs = 80;
  double dropout_p = 0.5;
  double w_pos = 0.0;  // 0 = auto: N_neg / N_pos over the training split
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_ap = 0.0;
};

// N_neg / N_pos over the given stays; throws when a class is missing.
double class_weight(const Cohort& cohort, const std::vector<int>& idx);

struct TrainResult {
  Model model;  // parameters from the epoch with best validation AP
  std::vector<EpochLog> logs;
  int best_epoch = 0;
  double best_val_ap = 0.0;
  double w_pos = 1.0;
};

// Shuffled mini-batches, weighted BCE, Adam; runs exactly cfg.epochs epochs
// and returns the best-validation-AP parameters. Deterministic given seed.
TrainResult train(ModelConfig mcfg, const Cohort& cohort, const Split& split,
                  const TrainConfig& cfg, std::uint64_t seed,
                  const Tensor* mce_dp = nullptr, const Tensor* mce_mv = nullptr);

std::vector<Prediction> collect_predictions(const Model& model, const Cohort& cohort,
                                            const std::vector<int>& idx);

void write_epoch_logs(const std::vector<EpochLog>& logs, const std::string& path);

}  // namespace readmit
