#pragma once

#include <optional>
#include <vector>

#include "readmit/config.hpp"
#include "readmit/report.hpp"

namespace readmit {

struct BenchmarkOutcome {
  std::vector<BenchmarkRow> rows;                   // one per requested architecture
  std::vector<std::vector<Prediction>> test_preds;  // parallel; empty on failure
  std::vector<std::optional<Model>> models;         // parallel; nullopt on failure
  Tensor mce_dp, mce_mv;                            // pre-trained tables when used
  bool used_mce = false;
};

// Trains every requested architecture on identical splits and seeds and
// evaluates on the test split with bootstrap CIs. Failures are recorded
// per-row; remaining rows complete. cfg.jobs > 1 trains architectures in
// parallel worker slots (results independent of scheduling).
BenchmarkOutcome run_benchmark(const RunConfig& cfg, const Cohort& cohort,
                               const Split& split, const std::vector<Arch>& archs);

std::vector<Arch> archs_from_config(const RunConfig& cfg);

}  // namespace readmit
