#include "readmit/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "readmit/optim.hpp"

namespace readmit {

double class_weight(const Cohort& cohort, const std::vector<int>& idx) {
  long n_pos = 0, n_neg = 0;
  for (int i : idx) (cohort.stays[i].label == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw ConfigError("class_weight: training split must contain both classes");
  return static_cast<double>(n_neg) / static_cast<double>(n_pos);
}

std::vector<Prediction> collect_predictions(const Model& model, const Cohort& cohort,
                                            const std::vector<int>& idx) {
  std::vector<double> scores = model.predict_all(cohort, idx);
  std::vector<Prediction> out;
  out.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const StayRecord& s = cohort.stays[idx[k]];
    out.push_back({s.stay_id, s.patient_id, scores[k], s.label});
  }
  return out;
}

TrainResult train(ModelConfig mcfg, const Cohort& cohort, const Split& split,
                  const TrainConfig& cfg, std::uint64_t seed, const Tensor* mce_dp,
                  const Tensor* mce_mv) {
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  mcfg.dropout_p = cfg.dropout_p;

  TrainResult res;
  res.model = Model::build(mcfg, seed, mce_dp, mce_mv);
  res.w_pos = cfg.w_pos > 0.0 ? cfg.w_pos : class_weight(cohort, split.train);

  ParamSet& params = res.model.params();
  std::vector<AdamState> states;
  states.reserve(params.size());
  for (const auto& p : params.items) states.push_back(AdamState::like(p.value));

  std::vector<int> order = split.train;
  std::vector<NamedTensor> best_params = params.items;
  res.best_val_ap = -1.0;
  ad::Tape tape;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RngStream shuffle_rng(RngStream::derive(seed, 0x5F1E), epoch);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

    double loss_sum = 0.0;
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size), ++batch_no) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      RngStream drop_rng(RngStream::derive(seed, 0xD201 + epoch),
                         static_cast<std::uint64_t>(batch_no));
      tape.reset();
      std::vector<ad::Var> leaves = res.model.bind(tape);
      std::vector<ad::Var> losses;
      losses.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const StayRecord& stay = cohort.stays[order[i]];
        ad::Var risk = res.model.risk(tape, leaves, stay, /*training=*/true, drop_rng);
        losses.push_back(
            tape.weighted_bce(risk, static_cast<double>(stay.label), res.w_pos));
      }
      ad::Var batch_loss = tape.mean(tape.concat(losses));
      const double loss_value = tape.scalar(batch_loss);
      if (!std::isfinite(loss_value))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(batch_no));
      tape.backward(batch_loss);
      for (std::size_t pi = 0; pi < params.size(); ++pi) {
        if (!params.trainable[pi]) continue;
        adam_step(params.value(static_cast<int>(pi)),
                  tape.grad_tensor(leaves[pi]), states[pi], cfg.lr);
      }
      loss_sum += loss_value * static_cast<double>(stop - start);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());
    log.val_ap = std::numeric_limits<double>::quiet_NaN();
    if (!split.val.empty()) {
      auto preds = collect_predictions(res.model, cohort, split.val);
      try {
        log.val_ap = average_precision(preds);
      } catch (const ConfigError&) {
        // no positives in the validation split; selection falls back to the
        // final epoch
      }
    }
    if (std::isfinite(log.val_ap) && log.val_ap > res.best_val_ap) {
      res.best_val_ap = log.val_ap;
      res.best_epoch = epoch;
      best_params = params.items;
    }
    res.logs.push_back(log);
  }

  if (res.best_epoch > 0) {
    params.items = std::move(best_params);
  } else {
    res.best_epoch = cfg.epochs;
  }
  return res;
}

void write_epoch_logs(const std::vector<EpochLog>& logs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "epoch,train_loss,val_ap\n";
  char buf[64];
  for (const auto& log : logs) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g", log.epoch, log.train_loss,
                  log.val_ap);
    out << buf << '\n';
  }
}

}  // namespace readmit
