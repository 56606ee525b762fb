#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "readmit/data.hpp"
#include "readmit/model.hpp"

namespace readmit {

// pi N(0, sigma1^2) + (1 - pi) N(0, sigma2^2); the narrow component
// encourages sparse weights.
struct ScaleMixturePrior {
  double pi = 0.5;
  double sigma1 = 1.0;
  double sigma2 = std::exp(-6.0);
};

// log prior density, computed in log space.
double log_prior(double w, const ScaleMixturePrior& prior = {});

// Gaussian log density ln N(w; mu, sigma^2).
double log_q(double w, double mu, double sigma);

// rho values are floored here so sigma = softplus(rho) cannot underflow.
inline constexpr double kRhoFloor = -40.0;

// Diagonal-Gaussian posterior over every parameter of a model. The wrapped
// model's tensors hold the means; rho runs parallel to them.
class BayesianModel {
 public:
  BayesianModel() = default;
  static BayesianModel wrap(Model base, double rho_init = -5.0);

  Model& mean_model() { return base_; }
  const Model& mean_model() const { return base_; }
  std::vector<Tensor>& rho() { return rho_; }
  const std::vector<Tensor>& rho() const { return rho_; }
  ScaleMixturePrior& prior() { return prior_; }
  const ScaleMixturePrior& prior() const { return prior_; }

  struct BoundPosterior {
    std::vector<ad::Var> mu;
    std::vector<ad::Var> rho;
  };

  struct SampledVars {
    std::vector<ad::Var> mu;
    std::vector<ad::Var> rho;
    std::vector<ad::Var> w;  // mu + softplus(rho) * eps, eps frozen constants
    std::vector<Tensor> eps;
  };

  // One leaf per (mu, rho) tensor; multiple weight samples may share them so
  // their gradients accumulate on the same leaves.
  BoundPosterior bind(ad::Tape& t) const;

  // One reparameterized weight sample on the tape.
  SampledVars sample_weights(ad::Tape& t, RngStream& rng,
                             const BoundPosterior& bound) const;

  // sum over parameters of (log q(w | mu, sigma) - log prior(w)).
  ad::Var kl_term(ad::Tape& t, const SampledVars& sv) const;

  // Tape-free weight draw for interpretation sampling.
  std::vector<Tensor> sample_tensors(RngStream& rng) const;

  // Deterministic forward at the posterior means.
  double predict_mean(const StayRecord& stay) const { return base_.predict(stay); }

 private:
  Model base_;
  std::vector<Tensor> rho_;
  ScaleMixturePrior prior_;
};

// Monte Carlo ELBO-style batch loss:
// (1/n_mc) sum over samples [ kl_scale * KL + summed weighted BCE(batch | w) ],
// kl_scale = 1/num_batches, so epoch totals estimate KL + full-data BCE.
ad::Var build_elbo(ad::Tape& t, const BayesianModel& m, const Cohort& cohort,
                   std::span<const int> batch_idx, int n_mc, double kl_scale,
                   double w_pos, RngStream& rng,
                   BayesianModel::BoundPosterior* out_bound = nullptr);
double elbo_loss(const BayesianModel& m, const Cohort& cohort,
                 std::span<const int> batch_idx, int n_mc, double kl_scale, double w_pos,
                 RngStream& rng);

struct BbbConfig {
  double lr = 0.001;
  int batch_size = 128;
  int max_epochs = 300;
  int patience = 10;  // stop after this many epochs without a new best ELBO
  int n_mc = 1;
  double w_pos = 0.0;  // 0 = auto over the training stays
  // softplus(-3) ~ 0.049: wide enough that early weight samples clear the
  // narrow prior component instead of being pinned at zero by it
  double rho_init = -3.0;
};

// The stop rule as a pure function: 1-based epoch at which training halts on
// the scripted loss sequence, or -1 if it never fires.
int bbb_stop_epoch(std::span<const double> epoch_losses, int patience);

struct BbbResult {
  BayesianModel model;
  std::vector<double> epoch_elbo;
  int stopped_epoch = 0;
};

// Score heads carry a sign gauge freedom (negating a head and its final-layer
// weight leaves every risk unchanged). Flip each stream so the final-layer
// score weights are non-negative and a high positive code score reads as
// higher readmission risk.
void canonicalize_score_gauge(BayesianModel& m);

// Bayes-by-Backprop training of the attention (concatenated time)
// architecture on the given stays (typically the entire cohort). Dropout is
// disabled; weight noise takes its place.
BbbResult train_bbb(const Cohort& cohort, const std::vector<int>& idx,
                    const BbbConfig& cfg, std::uint64_t seed);

// --- interpretation ----------------------------------------------------------------

inline constexpr int kDefaultOrSamples = 10000;

struct OrRow {
  std::string covariate;
  double or_mean = 0.0;  // mean of exp(w)
  double or_lo = 0.0;
  double or_hi = 0.0;
  double or_at_mean = 0.0;  // exp(mean w)
};

std::vector<OrRow> posterior_odds_ratios(const BayesianModel& m,
                                         int n_samples = kDefaultOrSamples,
                                         std::uint64_t seed = 0);

struct CodeScoreRow {
  std::string code;
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Per-code score: embedding row at elapsed 0 through the stream's score head,
// under sampled weights; ranked by mean, descending.
std::vector<CodeScoreRow> code_risk_scores(const BayesianModel& m, const Vocabulary& vocab,
                                           Stream stream, int n_samples,
                                           std::uint64_t seed);

struct RiskCi {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

RiskCi patient_risk_ci(const BayesianModel& m, const StayRecord& stay, int n_samples,
                       std::uint64_t seed);

void save_bbb_checkpoint(const std::string& path, const BayesianModel& m);
BayesianModel load_bbb_checkpoint(const std::string& path);

}  // namespace readmit
