#include "readmit/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "readmit/metrics.hpp"
#include "readmit/optim.hpp"
#include "readmit/train.hpp"

namespace readmit {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
}  // namespace

double log_prior(double w, const ScaleMixturePrior& prior) {
  const double a = std::log(prior.pi) - kHalfLog2Pi - std::log(prior.sigma1) -
                   0.5 * (w / prior.sigma1) * (w / prior.sigma1);
  const double b = std::log(1.0 - prior.pi) - kHalfLog2Pi - std::log(prior.sigma2) -
                   0.5 * (w / prior.sigma2) * (w / prior.sigma2);
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double log_q(double w, double mu, double sigma) {
  const double z = (w - mu) / sigma;
  return -std::log(sigma) - kHalfLog2Pi - 0.5 * z * z;
}

BayesianModel BayesianModel::wrap(Model base, double rho_init) {
  BayesianModel m;
  m.base_ = std::move(base);
  m.rho_.reserve(m.base_.params().size());
  for (const auto& p : m.base_.params().items) {
    Tensor r(p.value.rows, p.value.cols);
    r.fill(std::max(rho_init, kRhoFloor));
    m.rho_.push_back(std::move(r));
  }
  return m;
}

BayesianModel::BoundPosterior BayesianModel::bind(ad::Tape& t) const {
  BoundPosterior bound;
  const auto& params = base_.params();
  bound.mu.reserve(params.size());
  bound.rho.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    bound.mu.push_back(t.leaf(params.items[i].value));
    bound.rho.push_back(t.leaf(rho_[i]));
  }
  return bound;
}

BayesianModel::SampledVars BayesianModel::sample_weights(
    ad::Tape& t, RngStream& rng, const BoundPosterior& bound) const {
  SampledVars sv;
  const auto& params = base_.params();
  sv.mu = bound.mu;
  sv.rho = bound.rho;
  sv.w.reserve(params.size());
  sv.eps.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& mu = params.items[i].value;
    Tensor eps(mu.rows, mu.cols);
    for (int k = 0; k < eps.size(); ++k) eps[k] = rng.normal();
    ad::Var veps = t.leaf(eps);
    sv.w.push_back(t.add(bound.mu[i], t.mul(t.softplus(bound.rho[i]), veps)));
    sv.eps.push_back(std::move(eps));
  }
  return sv;
}

ad::Var BayesianModel::kl_term(ad::Tape& t, const SampledVars& sv) const {
  // log q along the sampled path: -sum ln(sigma) - n/2 ln(2pi) - sum eps^2/2.
  // The eps-dependent part is constant under the reparameterization, and its
  // total derivative w.r.t. (mu, rho) through w cancels exactly, so building
  // it as a constant yields the same gradients as the full expression.
  ad::Var kl{};
  const double s1 = prior_.sigma1;
  const double s2 = prior_.sigma2;
  const double ca = std::log(prior_.pi) - kHalfLog2Pi - std::log(s1);
  const double cb = std::log(1.0 - prior_.pi) - kHalfLog2Pi - std::log(s2);
  for (std::size_t i = 0; i < sv.w.size(); ++i) {
    const int n = t.size(sv.rho[i]);
    double const_part = -static_cast<double>(n) * kHalfLog2Pi;
    for (int k = 0; k < n; ++k)
      const_part -= 0.5 * sv.eps[i][k] * sv.eps[i][k];
    ad::Var logq = t.add(t.scalar_mul(t.sum(t.log(t.softplus(sv.rho[i]))), -1.0),
                         t.constant_scalar(const_part));

    ad::Var w2 = t.mul(sv.w[i], sv.w[i]);
    ad::Var a = t.add_scalar(t.scalar_mul(w2, -0.5 / (s1 * s1)), ca);
    ad::Var b = t.add_scalar(t.scalar_mul(w2, -0.5 / (s2 * s2)), cb);
    ad::Var m = t.emax(a, b);
    ad::Var lp = t.add(m, t.log(t.add(t.exp(t.sub(a, m)), t.exp(t.sub(b, m)))));
    ad::Var term = t.sub(logq, t.sum(lp));
    kl = kl.valid() ? t.add(kl, term) : term;
  }
  return kl;
}

std::vector<Tensor> BayesianModel::sample_tensors(RngStream& rng) const {
  std::vector<Tensor> out;
  const auto& params = base_.params();
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& mu = params.items[i].value;
    Tensor w(mu.rows, mu.cols);
    for (int k = 0; k < w.size(); ++k)
      w[k] = mu[k] + softplus(rho_[i][k]) * rng.normal();
    out.push_back(std::move(w));
  }
  return out;
}

ad::Var build_elbo(ad::Tape& t, const BayesianModel& m, const Cohort& cohort,
                   std::span<const int> batch_idx, int n_mc, double kl_scale,
                   double w_pos, RngStream& rng,
                   BayesianModel::BoundPosterior* out_bound) {
  if (batch_idx.empty()) throw ConfigError("build_elbo: empty batch");
  if (n_mc < 1) throw ConfigError("build_elbo: n_mc must be >= 1");
  BayesianModel::BoundPosterior bound = m.bind(t);
  std::vector<ad::Var> sample_losses;
  sample_losses.reserve(n_mc);
  for (int s = 0; s < n_mc; ++s) {
    BayesianModel::SampledVars sv = m.sample_weights(t, rng, bound);
    ad::Var kl = t.scalar_mul(m.kl_term(t, sv), kl_scale);
    std::vector<ad::Var> losses;
    losses.reserve(batch_idx.size());
    for (int idx : batch_idx) {
      const StayRecord& stay = cohort.stays[idx];
      ad::Var risk = m.mean_model().risk(t, sv.w, stay, /*training=*/false, rng);
      losses.push_back(t.weighted_bce(risk, static_cast<double>(stay.label), w_pos));
    }
    // summed batch likelihood: epoch totals then read KL + full-data BCE
    sample_losses.push_back(t.add(kl, t.sum(t.concat(losses))));
  }
  if (out_bound) *out_bound = bound;
  return n_mc == 1 ? sample_losses[0] : t.mean(t.concat(sample_losses));
}

double elbo_loss(const BayesianModel& m, const Cohort& cohort,
                 std::span<const int> batch_idx, int n_mc, double kl_scale, double w_pos,
                 RngStream& rng) {
  ad::Tape t;
  return t.scalar(build_elbo(t, m, cohort, batch_idx, n_mc, kl_scale, w_pos, rng));
}

int bbb_stop_epoch(std::span<const double> epoch_losses, int patience) {
  double best = std::numeric_limits<double>::infinity();
  int streak = 0;
  for (std::size_t e = 0; e < epoch_losses.size(); ++e) {
    if (epoch_losses[e] < best) {
      best = epoch_losses[e];
      streak = 0;
    } else if (++streak >= patience) {
      return static_cast<int>(e) + 1;
    }
  }
  return -1;
}

BbbResult train_bbb(const Cohort& cohort, const std::vector<int>& idx,
                    const BbbConfig& cfg, std::uint64_t seed) {
  if (idx.empty()) throw ConfigError("train_bbb: empty training set");

  ModelConfig mcfg = ModelConfig::for_cohort(Arch::attn_concat_time, cohort);
  mcfg.dropout_p = 0.0;  // weight noise replaces dropout
  BbbResult res;
  res.model = BayesianModel::wrap(Model::build(mcfg, seed), cfg.rho_init);

  const double w_pos = cfg.w_pos > 0.0 ? cfg.w_pos : class_weight(cohort, idx);
  ParamSet& params = res.model.mean_model().params();
  std::vector<AdamState> mu_states, rho_states;
  for (const auto& p : params.items) {
    mu_states.push_back(AdamState::like(p.value));
    rho_states.push_back(AdamState::like(p.value));
  }

  std::vector<int> order = idx;
  const int num_batches = static_cast<int>(
      (order.size() + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size));
  const double kl_scale = 1.0 / std::max(1, num_batches);

  double best = std::numeric_limits<double>::infinity();
  int streak = 0;
  ad::Tape tape;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    RngStream shuffle_rng(RngStream::derive(seed, 0xBB5F), epoch);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
    RngStream noise_rng(RngStream::derive(seed, 0xBBE5), epoch);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      tape.reset();
      std::span<const int> batch(order.data() + start, stop - start);
      BayesianModel::BoundPosterior bound;
      ad::Var loss = build_elbo(tape, res.model, cohort, batch, cfg.n_mc, kl_scale,
                                w_pos, noise_rng, &bound);
      const double loss_value = tape.scalar(loss);
      if (!std::isfinite(loss_value))
        throw NumericError("train_bbb: non-finite loss at epoch " +
                           std::to_string(epoch));
      tape.backward(loss);
      for (std::size_t pi = 0; pi < params.size(); ++pi) {
        adam_step(params.value(static_cast<int>(pi)), tape.grad_tensor(bound.mu[pi]),
                  mu_states[pi], cfg.lr);
        adam_step(res.model.rho()[pi], tape.grad_tensor(bound.rho[pi]), rho_states[pi],
                  cfg.lr);
        Tensor& rho = res.model.rho()[pi];
        for (int k = 0; k < rho.size(); ++k) rho[k] = std::max(rho[k], kRhoFloor);
      }
      epoch_loss += loss_value;
    }

    res.epoch_elbo.push_back(epoch_loss);
    if (epoch_loss < best) {
      best = epoch_loss;
      streak = 0;
    } else if (++streak >= cfg.patience) {
      res.stopped_epoch = epoch;
      break;
    }
  }
  if (res.stopped_epoch == 0) res.stopped_epoch = static_cast<int>(res.epoch_elbo.size());
  canonicalize_score_gauge(res.model);
  return res;
}

void canonicalize_score_gauge(BayesianModel& m) {
  Model& base = m.mean_model();
  ParamSet& params = base.params();
  const int fwi = params.find("final.w");
  if (fwi < 0) return;
  Tensor& fw = params.value(fwi);
  const char* streams[2] = {"dp", "mv"};
  for (int s = 0; s < 2; ++s) {
    const int k = kNumStatic + s;
    if (k >= fw.size() || fw[k] >= 0.0) continue;
    const int wi = params.find(std::string(streams[s]) + ".score.w");
    const int bi = params.find(std::string(streams[s]) + ".score.b");
    if (wi < 0 || bi < 0) continue;
    fw[k] = -fw[k];
    Tensor& sw = params.value(wi);
    for (int i = 0; i < sw.size(); ++i) sw[i] = -sw[i];
    params.value(bi)[0] = -params.value(bi)[0];
  }
}

// --- interpretation ---------------------------------------------------------------------

std::vector<OrRow> posterior_odds_ratios(const BayesianModel& m, int n_samples,
                                         std::uint64_t seed) {
  const Model& base = m.mean_model();
  const int wi = base.params().find("final.w");
  if (wi < 0) throw ConfigError("posterior_odds_ratios: model has no final layer");
  const Tensor& mu = base.params().value(wi);
  const Tensor& rho = m.rho()[wi];
  const std::vector<std::string> labels = final_layer_labels(base);

  std::vector<OrRow> rows;
  rows.reserve(mu.size());
  RngStream rng(seed, 0x0DD5);
  std::vector<double> draws(n_samples);
  for (int k = 0; k < mu.size(); ++k) {
    const double sigma = softplus(rho[k]);
    double acc = 0.0;
    for (int s = 0; s < n_samples; ++s) {
      draws[s] = std::exp(mu[k] + sigma * rng.normal());
      acc += draws[s];
    }
    OrRow row;
    row.covariate = k < static_cast<int>(labels.size()) ? labels[k]
                                                        : "w[" + std::to_string(k) + "]";
    row.or_mean = acc / n_samples;
    row.or_lo = quantile(draws, 0.025);
    row.or_hi = quantile(draws, 0.975);
    row.or_at_mean = std::exp(mu[k]);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CodeScoreRow> code_risk_scores(const BayesianModel& m, const Vocabulary& vocab,
                                           Stream stream, int n_samples,
                                           std::uint64_t seed) {
  const Model& base = m.mean_model();
  const std::string prefix = stream == Stream::dp ? "dp." : "mv.";
  const int ei = base.params().find(prefix + "embed");
  const int swi = base.params().find(prefix + "score.w");
  const int sbi = base.params().find(prefix + "score.b");
  if (ei < 0 || swi < 0 || sbi < 0)
    throw ConfigError("code_risk_scores: model lacks stream layers");
  const Tensor& mu_e = base.params().value(ei);
  const Tensor& mu_w = base.params().value(swi);
  const Tensor& mu_b = base.params().value(sbi);
  const Tensor& rho_e = m.rho()[ei];
  const Tensor& rho_w = m.rho()[swi];
  const Tensor& rho_b = m.rho()[sbi];
  if (mu_e.rows != vocab.size())
    throw ConfigError("code_risk_scores: vocabulary size mismatch");
  const int v = mu_e.rows;
  const int d = mu_e.cols;

  // Single codes bypass attention (a one-element weighted average is the
  // element itself), so the sampled score is w . [e; 0] + b.
  std::vector<std::vector<double>> samples(v, std::vector<double>(n_samples));
  RngStream rng(seed, 0x5C02E);
  std::vector<double> w(d);
  for (int s = 0; s < n_samples; ++s) {
    for (int j = 0; j < d; ++j) w[j] = mu_w[j] + softplus(rho_w[j]) * rng.normal();
    const double b = mu_b[0] + softplus(rho_b[0]) * rng.normal();
    for (int c = 0; c < v; ++c) {
      double acc = b;
      for (int j = 0; j < d; ++j)
        acc += w[j] * (mu_e(c, j) + softplus(rho_e(c, j)) * rng.normal());
      samples[c][s] = acc;
    }
  }

  std::vector<CodeScoreRow> rows(v);
  for (int c = 0; c < v; ++c) {
    double acc = 0.0;
    for (double x : samples[c]) acc += x;
    rows[c].code = vocab.id_to_code[c];
    rows[c].mean = acc / n_samples;
    rows[c].lo = quantile(samples[c], 0.025);
    rows[c].hi = quantile(samples[c], 0.975);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CodeScoreRow& a, const CodeScoreRow& b) { return a.mean > b.mean; });
  return rows;
}

RiskCi patient_risk_ci(const BayesianModel& m, const StayRecord& stay, int n_samples,
                       std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("patient_risk_ci: n_samples must be >= 1");
  RngStream rng(seed, 0x41C5);
  RngStream dummy(0);
  std::vector<double> risks(n_samples);
  ad::Tape t;
  for (int s = 0; s < n_samples; ++s) {
    std::vector<Tensor> w = m.sample_tensors(rng);
    t.reset();
    std::vector<ad::Var> leaves;
    leaves.reserve(w.size());
    for (const Tensor& x : w) leaves.push_back(t.leaf(x));
    risks[s] = t.scalar(m.mean_model().risk(t, leaves, stay, false, dummy));
  }
  RiskCi out;
  double acc = 0.0;
  for (double r : risks) acc += r;
  out.mean = acc / n_samples;
  out.lo = quantile(risks, 0.025);
  out.hi = quantile(risks, 0.975);
  return out;
}

void save_bbb_checkpoint(const std::string& path, const BayesianModel& m) {
  std::vector<NamedTensor> tensors = m.mean_model().params().items;
  const auto& rho = m.rho();
  for (std::size_t i = 0; i < rho.size(); ++i)
    tensors.push_back({m.mean_model().params().items[i].name + "#rho", rho[i]});
  save_params(path, m.mean_model().config(), tensors, /*bayes=*/true);
}

BayesianModel load_bbb_checkpoint(const std::string& path) {
  LoadedParams lp = load_params(path);
  if (!lp.bayes) throw ConfigError(path + ": expected a bayesian checkpoint");
  Model base = Model::build(lp.cfg, 0);
  const std::size_t n = base.params().size();
  if (lp.tensors.size() != 2 * n) throw ConfigError(path + ": corrupt bayesian checkpoint");
  BayesianModel m = BayesianModel::wrap(std::move(base));
  for (std::size_t i = 0; i < n; ++i) {
    NamedTensor& mu = m.mean_model().params().items[i];
    if (lp.tensors[i].name != mu.name || lp.tensors[n + i].name != mu.name + "#rho")
      throw ConfigError(path + ": parameter layout mismatch");
    mu.value = lp.tensors[i].value;
    m.rho()[i] = lp.tensors[n + i].value;
  }
  return m;
}

}  // namespace readmit
