#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "readmit/bayes.hpp"
#include "readmit/gradcheck.hpp"

using namespace readmit;
namespace fs = std::filesystem;

namespace {

double gauss_pdf(double w, double sigma) {
  return std::exp(-0.5 * (w / sigma) * (w / sigma)) /
         (sigma * std::sqrt(2.0 * 3.14159265358979323846));
}

double softplus_inv(double y) { return std::log(std::exp(y) - 1.0); }

Cohort tiny_cohort() {
  RawCohort raw;
  RngStream rng(3);
  for (int i = 0; i < 8; ++i) {
    RawStay s;
    s.stay_id = "s" + std::to_string(i);
    s.patient_id = "p" + std::to_string(i);
    s.statics.fill(0.0);
    s.statics[4] = i % 2;
    s.label = i % 2;
    raw.stays.push_back(s);
    raw.events.push_back({s.stay_id, Stream::dp, "D" + std::to_string(i % 3), 1.0 + i});
    raw.events.push_back({s.stay_id, Stream::mv, "M" + std::to_string(i % 2), 0.5 * i});
  }
  return build_cohort(raw, {.rare_threshold = 1});
}

BayesianModel tiny_bayes(double rho_init = -5.0) {
  Cohort c = tiny_cohort();
  ModelConfig cfg = ModelConfig::for_cohort(Arch::attn_concat_time, c);
  cfg.dropout_p = 0.0;
  return BayesianModel::wrap(Model::build(cfg, 17), rho_init);
}

}  // namespace

TEST_CASE("log prior of the scale mixture") {
  // direct mixture-density oracle
  ScaleMixturePrior prior;
  const double at_zero = std::log(0.5 * gauss_pdf(0.0, 1.0) + 0.5 * gauss_pdf(0.0, prior.sigma2));
  CHECK(std::abs(log_prior(0.0) - at_zero) < 1e-12);
  CHECK(std::abs(log_prior(0.0) - 4.39046) < 1e-3);

  // far tail is dominated by the wide component
  CHECK(std::abs(log_prior(10.0) - (-51.612)) < 1e-2);

  // even density
  for (double w : {0.1, 0.5, 2.0, 7.7}) CHECK(log_prior(w) == log_prior(-w));
}

TEST_CASE("gaussian log density at its mean") {
  for (double sigma : {1.0, 0.01, 3.7}) {
    const double expect = -std::log(sigma * std::sqrt(2.0 * 3.14159265358979323846));
    CHECK(log_q(0.7, 0.7, sigma) == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("softplus keeps sigma positive down to the rho floor") {
  const double sp = std::log1p(std::exp(kRhoFloor));
  CHECK(sp > 0.0);
  BayesianModel m = tiny_bayes(-80.0);  // clamped up to the floor
  for (const auto& r : m.rho())
    for (int i = 0; i < r.size(); ++i) CHECK(r[i] == kRhoFloor);
}

TEST_CASE("monte carlo KL matches closed forms on one-parameter posteriors") {
  // prior forced to a single unit Gaussian: sigma1 = sigma2 = 1
  ScaleMixturePrior unit_prior;
  unit_prior.sigma1 = 1.0;
  unit_prior.sigma2 = 1.0;

  auto mc_kl = [&](double mu, double sigma, int n, std::uint64_t seed) {
    RngStream rng(seed);
    double acc = 0.0;
    for (int s = 0; s < n; ++s) {
      const double w = mu + sigma * rng.normal();
      acc += log_q(w, mu, sigma) - log_prior(w, unit_prior);
    }
    return acc / n;
  };

  // posterior N(0,1) against prior N(0,1): KL = 0
  CHECK(std::abs(mc_kl(0.0, 1.0, 10000, 5)) < 0.05);
  // posterior N(1,1) against prior N(0,1): KL = 0.5
  CHECK(std::abs(mc_kl(1.0, 1.0, 10000, 6) - 0.5) < 0.05);
}

TEST_CASE("elbo loss is reproducible with a fixed rng") {
  Cohort c = tiny_cohort();
  BayesianModel m = tiny_bayes();
  std::vector<int> batch{0, 1, 2, 3};
  RngStream r1(9), r2(9);
  const double a = elbo_loss(m, c, batch, 1, 0.25, 2.0, r1);
  const double b = elbo_loss(m, c, batch, 1, 0.25, 2.0, r2);
  CHECK(a == b);
  RngStream r3(10);
  CHECK(elbo_loss(m, c, batch, 1, 0.25, 2.0, r3) != a);
  CHECK_THROWS_AS(elbo_loss(m, c, {}, 1, 0.25, 2.0, r1), ConfigError);
}

TEST_CASE("reparameterized elbo gradients pass the checker with frozen noise") {
  Cohort c = tiny_cohort();
  BayesianModel bm = tiny_bayes();
  // modest sigma so the prior term has curvature
  for (auto& r : bm.rho()) r.fill(-2.0);

  const auto& items = bm.mean_model().params().items;
  const std::size_t n = items.size();
  std::vector<NamedTensor> params;
  for (const auto& p : items) params.push_back({p.name + "#mu", p.value});
  for (std::size_t i = 0; i < n; ++i)
    params.push_back({items[i].name + "#rho", bm.rho()[i]});

  // frozen eps per parameter
  std::vector<Tensor> eps;
  RngStream erng(31);
  for (const auto& p : items) {
    Tensor e(p.value.rows, p.value.cols);
    for (int k = 0; k < e.size(); ++k) e[k] = erng.normal();
    eps.push_back(std::move(e));
  }

  auto rep = grad_check(params, [&](ad::Tape& t, const std::vector<ad::Var>& ls) {
    BayesianModel::SampledVars sv;
    for (std::size_t i = 0; i < n; ++i) {
      sv.mu.push_back(ls[i]);
      sv.rho.push_back(ls[n + i]);
      sv.w.push_back(t.add(ls[i], t.mul(t.softplus(ls[n + i]), t.leaf(eps[i]))));
      sv.eps.push_back(eps[i]);
    }
    ad::Var kl = t.scalar_mul(bm.kl_term(t, sv), 0.5);
    RngStream dummy(0);
    std::vector<ad::Var> losses;
    for (int idx : {0, 1, 2}) {
      ad::Var risk = bm.mean_model().risk(t, sv.w, tiny_cohort().stays[idx], false, dummy);
      losses.push_back(t.weighted_bce(risk, idx % 2 ? 1.0 : 0.0, 2.0));
    }
    return t.add(kl, t.mean(t.concat(losses)));
  });
  CHECK_MESSAGE(rep.ok(1e-4), "worst=", rep.worst_param, " err=", rep.max_rel_err);
}

TEST_CASE("stop rule fires after the scripted patience window") {
  // epoch 2 sets the best; epochs 3..12 never improve; fires at 12
  std::vector<double> losses{5.0, 4.0, 4.1, 4.2, 4.3, 4.4, 4.5, 4.6, 4.7, 4.8, 4.9, 4.95};
  CHECK(bbb_stop_epoch(losses, 10) == 12);

  std::vector<double> improving{5.0, 4.0, 3.9, 3.8, 3.7};
  CHECK(bbb_stop_epoch(improving, 10) == -1);

  std::vector<double> flat{1.0, 1.0, 1.0};
  CHECK(bbb_stop_epoch(flat, 2) == 3);
}

TEST_CASE("bbb training descends and reproduces under a fixed seed") {
  SynthConfig scfg;
  scfg.n_patients = 80;
  scfg.vocab_dp = 20;
  scfg.vocab_mv = 10;
  scfg.delta = 2.5;
  scfg.beta0 = -1.5;
  Cohort c = build_cohort(generate_synthetic(scfg, 6).raw, {.rare_threshold = 1});
  std::vector<int> all(c.stays.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);

  BbbConfig cfg;
  cfg.max_epochs = 15;
  cfg.batch_size = 32;
  BbbResult a = train_bbb(c, all, cfg, 77);
  CHECK(a.epoch_elbo.back() < a.epoch_elbo.front());
  CHECK(a.stopped_epoch >= 1);

  BbbResult b = train_bbb(c, all, cfg, 77);
  REQUIRE(a.epoch_elbo.size() == b.epoch_elbo.size());
  for (std::size_t e = 0; e < a.epoch_elbo.size(); ++e)
    CHECK(a.epoch_elbo[e] == b.epoch_elbo[e]);
  for (std::size_t i = 0; i < a.model.mean_model().params().size(); ++i)
    CHECK(a.model.mean_model().params().items[i].value.v ==
          b.model.mean_model().params().items[i].value.v);
}

TEST_CASE("posterior odds ratios") {
  BayesianModel m = tiny_bayes(-40.0);  // effectively degenerate posteriors
  Model& base = m.mean_model();
  Tensor& fw = base.params().value(base.params().find("final.w"));

  SUBCASE("degenerate zero posterior gives OR 1 with interval [1,1]") {
    auto rows = posterior_odds_ratios(m, 500, 3);
    REQUIRE(rows.size() == static_cast<std::size_t>(kNumStatic + 2));
    CHECK(rows[0].covariate == "ICU Length of Stay (days)");
    CHECK(rows[kNumStatic].covariate == "Score: Diagnoses and Procedures");
    for (const auto& r : rows) {
      CHECK(r.or_mean == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(r.or_lo == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(r.or_hi == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("degenerate ln-2 posterior gives OR 2") {
    fw[3] = std::log(2.0);
    auto rows = posterior_odds_ratios(m, 500, 3);
    CHECK(rows[3].or_mean == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("lognormal closed form at sigma 0.1") {
    const int wi = base.params().find("final.w");
    m.rho()[wi].fill(softplus_inv(0.1));
    auto rows = posterior_odds_ratios(m, 20000, 3);
    CHECK(rows[0].or_mean == doctest::Approx(std::exp(0.005)).epsilon(0.01));
    CHECK(rows[0].or_lo == doctest::Approx(std::exp(-1.96 * 0.1)).epsilon(0.015));
    CHECK(rows[0].or_hi == doctest::Approx(std::exp(1.96 * 0.1)).epsilon(0.015));
    CHECK(rows[0].or_at_mean == doctest::Approx(1.0));
  }
  SUBCASE("doubling the sample count barely moves the interval") {
    const int wi = base.params().find("final.w");
    m.rho()[wi].fill(softplus_inv(0.5));
    auto r1 = posterior_odds_ratios(m, 10000, 9);
    auto r2 = posterior_odds_ratios(m, 20000, 9);
    CHECK(std::abs(r1[0].or_lo - r2[0].or_lo) / r1[0].or_lo < 0.01);
    CHECK(std::abs(r1[0].or_hi - r2[0].or_hi) / r1[0].or_hi < 0.01);
  }
}

TEST_CASE("code risk scores") {
  Cohort c = tiny_cohort();
  BayesianModel m = tiny_bayes(-40.0);
  Model& base = m.mean_model();

  SUBCASE("bias-only head scores every code identically") {
    base.params().value(base.params().find("dp.score.w")).fill(0.0);
    base.params().value(base.params().find("dp.score.b"))[0] = 1.7;
    auto rows = code_risk_scores(m, c.vocab_dp, Stream::dp, 200, 3);
    REQUIRE(rows.size() == static_cast<std::size_t>(c.vocab_dp.size()));
    for (const auto& r : rows) {
      CHECK(r.mean == doctest::Approx(1.7).epsilon(1e-9));
      CHECK(r.lo == doctest::Approx(1.7).epsilon(1e-9));
    }
  }
  SUBCASE("identical embedding rows score identically under shared head noise") {
    Tensor& embed = base.params().value(base.params().find("dp.embed"));
    for (int j = 0; j < embed.cols; ++j) embed(1, j) = embed(2, j);
    const int swi = base.params().find("dp.score.w");
    m.rho()[swi].fill(-1.0);  // noisy head, degenerate embeddings
    auto rows = code_risk_scores(m, c.vocab_dp, Stream::dp, 500, 7);
    const std::string a = c.vocab_dp.id_to_code[1];
    const std::string b = c.vocab_dp.id_to_code[2];
    double mean_a = 0, mean_b = 0, lo_a = 0, lo_b = 0;
    for (const auto& r : rows) {
      if (r.code == a) { mean_a = r.mean; lo_a = r.lo; }
      if (r.code == b) { mean_b = r.mean; lo_b = r.lo; }
    }
    CHECK(mean_a == doctest::Approx(mean_b).epsilon(1e-12));
    CHECK(lo_a == doctest::Approx(lo_b).epsilon(1e-12));
  }
  SUBCASE("ranking is by descending mean") {
    auto rows = code_risk_scores(m, c.vocab_dp, Stream::dp, 100, 3);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i - 1].mean >= rows[i].mean);
  }
}

TEST_CASE("patient risk credible intervals") {
  Cohort c = tiny_cohort();
  const StayRecord& rec = c.stays[1];

  SUBCASE("degenerate posterior collapses the interval onto the mean") {
    BayesianModel m = tiny_bayes(-40.0);
    RiskCi ci = patient_risk_ci(m, rec, 50, 3);
    const double det = m.predict_mean(rec);
    CHECK(ci.mean == doctest::Approx(det).epsilon(1e-12));
    CHECK(ci.hi - ci.lo == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("wider final-layer rho widens the interval") {
    BayesianModel narrow = tiny_bayes(-40.0);
    const int wi = narrow.mean_model().params().find("final.w");
    narrow.rho()[wi].fill(softplus_inv(0.05));
    RiskCi small = patient_risk_ci(narrow, rec, 400, 5);

    BayesianModel wide = tiny_bayes(-40.0);
    wide.rho()[wi].fill(softplus_inv(0.5));
    RiskCi big = patient_risk_ci(wide, rec, 400, 5);
    CHECK(big.hi - big.lo > small.hi - small.lo);
  }
  SUBCASE("a single sample is its own mean") {
    BayesianModel m = tiny_bayes(-2.0);
    RiskCi ci = patient_risk_ci(m, rec, 1, 11);
    CHECK(ci.mean == ci.lo);
    CHECK(ci.mean == ci.hi);
  }
}

TEST_CASE("bayesian checkpoint round trip") {
  BayesianModel m = tiny_bayes(-3.0);
  Model& base = m.mean_model();
  base.params().value(base.params().find("final.w"))[2] = 0.4;
  m.rho()[0].fill(-2.5);

  const std::string path = (fs::temp_directory_path() / "readmit_bbb.ckpt").string();
  save_bbb_checkpoint(path, m);
  BayesianModel back = load_bbb_checkpoint(path);
  REQUIRE(back.mean_model().params().size() == base.params().size());
  for (std::size_t i = 0; i < base.params().size(); ++i) {
    CHECK(back.mean_model().params().items[i].value.v == base.params().items[i].value.v);
    CHECK(back.rho()[i].v == m.rho()[i].v);
  }
  CHECK_THROWS_AS(load_checkpoint(path), ConfigError);
}
