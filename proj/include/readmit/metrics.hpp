#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace readmit {

struct Prediction {
  std::string stay_id;
  std::string patient_id;
  double score = 0.0;
  int label = 0;
};

// Step-wise average precision over descending-score ranks. Requires >= 1
// positive.
double average_precision(std::span<const Prediction> preds);

// Mann-Whitney AUROC; tied pairs count 0.5. Requires both classes.
double auroc(std::span<const Prediction> preds);

struct F1Result {
  double f1 = 0.0;
  double threshold = 0.0;
};

// Max F1 over thresholds at midpoints of consecutive distinct scores plus the
// two infinities; lowest threshold wins ties. Predicts positive at
// score >= threshold.
F1Result f1_max(std::span<const Prediction> preds);

struct YoudenResult {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double threshold = 0.0;
  double j = 0.0;
};

// Max J = sens + spec - 1 over the same threshold sweep; ties resolve toward
// higher sensitivity.
YoudenResult youden_operating_point(std::span<const Prediction> preds);

struct CiValue {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap resampling patients (all stays of a patient move
// together) with replacement to the original patient count. Resamples where
// the metric is undefined are skipped; n_skipped reports how many.
CiValue bootstrap_ci(const std::function<double(std::span<const Prediction>)>& metric,
                     std::span<const Prediction> preds, int n_resamples,
                     std::uint64_t seed, int* n_skipped = nullptr);

struct MetricReport {
  CiValue ap, auroc, f1, sensitivity, specificity;
};

inline constexpr int kDefaultBootstrapResamples = 100;

// All five metrics with shared bootstrap resamples.
MetricReport evaluate_with_ci(std::span<const Prediction> preds,
                              int n_resamples = kDefaultBootstrapResamples,
                              std::uint64_t seed = 0);

// Linear-interpolation quantile of an unsorted sample (q in [0, 1]).
double quantile(std::vector<double> values, double q);

}  // namespace readmit
