#include "readmit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "readmit/rng.hpp"
#include "readmit/tensor.hpp"

namespace readmit {

namespace {

int count_pos(std::span<const Prediction> preds) {
  int n = 0;
  for (const auto& p : preds) n += p.label;
  return n;
}

// Candidate thresholds: below the minimum, midpoints of consecutive distinct
// scores, above the maximum; ascending.
std::vector<double> threshold_sweep(std::span<const Prediction> preds) {
  std::vector<double> scores;
  scores.reserve(preds.size());
  for (const auto& p : preds) scores.push_back(p.score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<double> th;
  th.push_back(scores.front() - 1.0);
  for (std::size_t i = 1; i < scores.size(); ++i)
    th.push_back(0.5 * (scores[i - 1] + scores[i]));
  th.push_back(scores.back() + 1.0);
  return th;
}

struct Rates {
  int tp = 0, fp = 0, fn = 0, tn = 0;
};

Rates rates_at(std::span<const Prediction> preds, double threshold) {
  Rates r;
  for (const auto& p : preds) {
    const bool pos = p.score >= threshold;
    if (p.label == 1)
      (pos ? r.tp : r.fn)++;
    else
      (pos ? r.fp : r.tn)++;
  }
  return r;
}

}  // namespace

double average_precision(std::span<const Prediction> preds) {
  const int n_pos = count_pos(preds);
  if (n_pos == 0) throw ConfigError("average_precision: no positives");
  std::vector<const Prediction*> order;
  order.reserve(preds.size());
  for (const auto& p : preds) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(),
                   [](const Prediction* a, const Prediction* b) { return a->score > b->score; });
  double ap = 0.0;
  int tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (order[k]->label == 1) {
      ++tp;
      const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
      ap += precision / n_pos;  // recall step of 1/n_pos per positive
    }
  }
  return ap;
}

double auroc(std::span<const Prediction> preds) {
  const int n_pos = count_pos(preds);
  const int n_neg = static_cast<int>(preds.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ConfigError("auroc: needs both classes");
  // rank-sum with average ranks for ties
  std::vector<const Prediction*> order;
  order.reserve(preds.size());
  for (const auto& p : preds) order.push_back(&p);
  std::sort(order.begin(), order.end(),
            [](const Prediction* a, const Prediction* b) { return a->score < b->score; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && order[j]->score == order[i]->score) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (order[k]->label == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * n_pos * (n_pos + 1.0);
  return u / (static_cast<double>(n_pos) * n_neg);
}

F1Result f1_max(std::span<const Prediction> preds) {
  if (count_pos(preds) == 0) throw ConfigError("f1_max: no positives");
  F1Result best;
  best.f1 = -1.0;
  for (double th : threshold_sweep(preds)) {
    const Rates r = rates_at(preds, th);
    const double denom = 2.0 * r.tp + r.fp + r.fn;
    const double f1 = denom > 0.0 ? 2.0 * r.tp / denom : 0.0;
    if (f1 > best.f1) {  // ascending sweep keeps the lowest threshold on ties
      best.f1 = f1;
      best.threshold = th;
    }
  }
  return best;
}

YoudenResult youden_operating_point(std::span<const Prediction> preds) {
  const int n_pos = count_pos(preds);
  const int n_neg = static_cast<int>(preds.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw ConfigError("youden_operating_point: needs both classes");
  YoudenResult best;
  best.j = -std::numeric_limits<double>::infinity();
  for (double th : threshold_sweep(preds)) {
    const Rates r = rates_at(preds, th);
    const double sens = static_cast<double>(r.tp) / n_pos;
    const double spec = static_cast<double>(r.tn) / n_neg;
    const double j = sens + spec - 1.0;
    // ascending thresholds have non-increasing sensitivity, so strict
    // improvement keeps the highest-sensitivity optimum
    if (j > best.j) {
      best = {sens, spec, th, j};
    }
  }
  return best;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * (static_cast<double>(values.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

struct PatientGroups {
  std::vector<std::vector<int>> groups;  // prediction indices per patient
};

PatientGroups group_by_patient(std::span<const Prediction> preds) {
  PatientGroups pg;
  std::unordered_map<std::string, int> seen;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto [it, inserted] = seen.emplace(preds[i].patient_id, static_cast<int>(pg.groups.size()));
    if (inserted) pg.groups.emplace_back();
    pg.groups[it->second].push_back(static_cast<int>(i));
  }
  return pg;
}

std::vector<double> bootstrap_samples(
    const std::function<double(std::span<const Prediction>)>& metric,
    std::span<const Prediction> preds, int n_resamples, std::uint64_t seed,
    int* n_skipped) {
  const PatientGroups pg = group_by_patient(preds);
  const std::size_t n_patients = pg.groups.size();
  std::vector<double> values;
  values.reserve(n_resamples);
  int skipped = 0;
  std::vector<Prediction> resample;
  for (int r = 0; r < n_resamples; ++r) {
    RngStream rng(seed, RngStream::derive(0xB007, static_cast<std::uint64_t>(r)));
    resample.clear();
    for (std::size_t k = 0; k < n_patients; ++k) {
      const auto pick = rng.uniform_int(n_patients);
      for (int idx : pg.groups[pick]) resample.push_back(preds[idx]);
    }
    try {
      values.push_back(metric(resample));
    } catch (const ConfigError&) {
      ++skipped;  // metric undefined on this resample (single class)
    }
  }
  if (n_skipped) *n_skipped = skipped;
  if (values.empty()) throw ConfigError("bootstrap_ci: metric undefined on all resamples");
  return values;
}

}  // namespace

CiValue bootstrap_ci(const std::function<double(std::span<const Prediction>)>& metric,
                     std::span<const Prediction> preds, int n_resamples,
                     std::uint64_t seed, int* n_skipped) {
  CiValue out;
  out.point = metric(preds);
  std::vector<double> values =
      bootstrap_samples(metric, preds, n_resamples, seed, n_skipped);
  out.lo = quantile(values, 0.025);
  out.hi = quantile(values, 0.975);
  return out;
}

MetricReport evaluate_with_ci(std::span<const Prediction> preds, int n_resamples,
                              std::uint64_t seed) {
  MetricReport rep;
  rep.ap = bootstrap_ci([](std::span<const Prediction> p) { return average_precision(p); },
                        preds, n_resamples, seed);
  rep.auroc = bootstrap_ci([](std::span<const Prediction> p) { return auroc(p); }, preds,
                           n_resamples, seed);
  rep.f1 = bootstrap_ci([](std::span<const Prediction> p) { return f1_max(p).f1; }, preds,
                        n_resamples, seed);
  rep.sensitivity = bootstrap_ci(
      [](std::span<const Prediction> p) { return youden_operating_point(p).sensitivity; },
      preds, n_resamples, seed);
  rep.specificity = bootstrap_ci(
      [](std::span<const Prediction> p) { return youden_operating_point(p).specificity; },
      preds, n_resamples, seed);
  return rep;
}

}  // namespace readmit
