#include "readmit/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace readmit {

using nlohmann::json;

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  const json j = json::parse(json_text);
  RunConfig cfg;
  maybe(j, "seed", cfg.seed);
  maybe(j, "out_dir", cfg.out_dir);
  maybe(j, "jobs", cfg.jobs);
  maybe(j, "architectures", cfg.archs);
  maybe(j, "bootstrap_resamples", cfg.bootstrap_resamples);
  maybe(j, "or_samples", cfg.or_samples);
  maybe(j, "topk_codes", cfg.topk_codes);
  maybe(j, "mce_finetune", cfg.mce_finetune);

  if (j.contains("data")) {
    const json& d = j.at("data");
    maybe(d, "stays", cfg.stays_path);
    maybe(d, "events", cfg.events_path);
  }
  if (j.contains("synth")) {
    cfg.has_synth = true;
    const json& s = j.at("synth");
    maybe(s, "n_patients", cfg.synth.n_patients);
    maybe(s, "vocab_dp", cfg.synth.vocab_dp);
    maybe(s, "vocab_mv", cfg.synth.vocab_mv);
    maybe(s, "k_planted", cfg.synth.k_planted);
    maybe(s, "delta", cfg.synth.delta);
    maybe(s, "beta0", cfg.synth.beta0);
    maybe(s, "tau_days", cfg.synth.tau_days);
    maybe(s, "topic_mix", cfg.synth.topic_mix);
    maybe(s, "topic_size", cfg.synth.topic_size);
    maybe(s, "mean_dp_events", cfg.synth.mean_dp_events);
    maybe(s, "mean_mv_events", cfg.synth.mean_mv_events);
    maybe(s, "mean_dp_elapsed_days", cfg.synth.mean_dp_elapsed_days);
    maybe(s, "mean_icu_los_days", cfg.synth.mean_icu_los_days);
    maybe(s, "vital_fraction", cfg.synth.vital_fraction);
    maybe(s, "extra_stay_prob", cfg.synth.extra_stay_prob);
    if (s.contains("static_effects")) {
      for (const auto& [name, value] : s.at("static_effects").items()) {
        const int idx = static_index(name);
        if (idx < 0) throw ConfigError("synth.static_effects: unknown covariate '" + name + "'");
        cfg.synth.static_effects[idx] = value.get<double>();
      }
    }
  }
  if (j.contains("load")) {
    const json& l = j.at("load");
    maybe(l, "rare_threshold", cfg.load.rare_threshold);
    maybe(l, "dp_cap", cfg.load.dp_cap);
    maybe(l, "mv_cap", cfg.load.mv_cap);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    maybe(t, "lr", cfg.train.lr);
    maybe(t, "batch_size", cfg.train.batch_size);
    maybe(t, "epochs", cfg.train.epochs);
    maybe(t, "dropout", cfg.train.dropout_p);
    maybe(t, "w_pos", cfg.train.w_pos);
  }
  if (j.contains("bbb")) {
    const json& b = j.at("bbb");
    maybe(b, "lr", cfg.bbb.lr);
    maybe(b, "batch_size", cfg.bbb.batch_size);
    maybe(b, "max_epochs", cfg.bbb.max_epochs);
    maybe(b, "patience", cfg.bbb.patience);
    maybe(b, "n_mc", cfg.bbb.n_mc);
    maybe(b, "rho_init", cfg.bbb.rho_init);
  }
  if (j.contains("mce")) {
    auto read_mce = [](const json& m, MceConfig& c) {
      maybe(m, "window", c.window);
      maybe(m, "buckets", c.buckets);
      maybe(m, "epochs", c.epochs);
      maybe(m, "lr", c.lr);
      maybe(m, "batch_size", c.batch_size);
    };
    if (j.at("mce").contains("dp")) read_mce(j.at("mce").at("dp"), cfg.mce_dp);
    if (j.at("mce").contains("mv")) read_mce(j.at("mce").at("mv"), cfg.mce_mv);
  }
  if (j.contains("ode")) {
    const json& o = j.at("ode");
    maybe(o, "h_max_dp", cfg.h_max_dp);
    maybe(o, "h_max_mv", cfg.h_max_mv);
    maybe(o, "max_steps", cfg.ode_max_steps);
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    maybe(s, "val_fraction", cfg.val_fraction);
    maybe(s, "test_fraction", cfg.test_fraction);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["jobs"] = cfg.jobs;
  j["architectures"] = cfg.archs;
  j["bootstrap_resamples"] = cfg.bootstrap_resamples;
  j["or_samples"] = cfg.or_samples;
  j["topk_codes"] = cfg.topk_codes;
  j["mce_finetune"] = cfg.mce_finetune;
  if (!cfg.stays_path.empty())
    j["data"] = {{"stays", cfg.stays_path}, {"events", cfg.events_path}};
  if (cfg.has_synth) {
    json s;
    s["n_patients"] = cfg.synth.n_patients;
    s["vocab_dp"] = cfg.synth.vocab_dp;
    s["vocab_mv"] = cfg.synth.vocab_mv;
    s["k_planted"] = cfg.synth.k_planted;
    s["delta"] = cfg.synth.delta;
    s["beta0"] = cfg.synth.beta0;
    s["tau_days"] = cfg.synth.tau_days;
    s["topic_mix"] = cfg.synth.topic_mix;
    s["topic_size"] = cfg.synth.topic_size;
    s["mean_dp_events"] = cfg.synth.mean_dp_events;
    s["mean_mv_events"] = cfg.synth.mean_mv_events;
    s["mean_dp_elapsed_days"] = cfg.synth.mean_dp_elapsed_days;
    s["mean_icu_los_days"] = cfg.synth.mean_icu_los_days;
    s["vital_fraction"] = cfg.synth.vital_fraction;
    s["extra_stay_prob"] = cfg.synth.extra_stay_prob;
    json se;
    for (int i = 0; i < kNumStatic; ++i)
      if (cfg.synth.static_effects[i] != 0.0)
        se[static_names()[i]] = cfg.synth.static_effects[i];
    s["static_effects"] = se;
    j["synth"] = s;
  }
  j["load"] = {{"rare_threshold", cfg.load.rare_threshold},
               {"dp_cap", cfg.load.dp_cap},
               {"mv_cap", cfg.load.mv_cap}};
  j["train"] = {{"lr", cfg.train.lr},
                {"batch_size", cfg.train.batch_size},
                {"epochs", cfg.train.epochs},
                {"dropout", cfg.train.dropout_p},
                {"w_pos", cfg.train.w_pos}};
  j["bbb"] = {{"lr", cfg.bbb.lr},
              {"batch_size", cfg.bbb.batch_size},
              {"max_epochs", cfg.bbb.max_epochs},
              {"patience", cfg.bbb.patience},
              {"n_mc", cfg.bbb.n_mc},
              {"rho_init", cfg.bbb.rho_init}};
  j["mce"] = {{"dp",
               {{"window", cfg.mce_dp.window},
                {"buckets", cfg.mce_dp.buckets},
                {"epochs", cfg.mce_dp.epochs},
                {"lr", cfg.mce_dp.lr},
                {"batch_size", cfg.mce_dp.batch_size}}},
              {"mv",
               {{"window", cfg.mce_mv.window},
                {"buckets", cfg.mce_mv.buckets},
                {"epochs", cfg.mce_mv.epochs},
                {"lr", cfg.mce_mv.lr},
                {"batch_size", cfg.mce_mv.batch_size}}}};
  j["ode"] = {{"h_max_dp", cfg.h_max_dp},
              {"h_max_mv", cfg.h_max_mv},
              {"max_steps", cfg.ode_max_steps}};
  j["split"] = {{"val_fraction", cfg.val_fraction}, {"test_fraction", cfg.test_fraction}};
  return j.dump(2);
}

void apply_env_overrides(RunConfig& cfg) {
  auto env_u64 = [](const char* name, std::uint64_t& out) {
    if (const char* v = std::getenv(name)) out = std::strtoull(v, nullptr, 10);
  };
  auto env_int = [](const char* name, int& out) {
    if (const char* v = std::getenv(name)) out = static_cast<int>(std::strtol(v, nullptr, 10));
  };
  auto env_double = [](const char* name, double& out) {
    if (const char* v = std::getenv(name)) out = std::strtod(v, nullptr);
  };
  auto env_str = [](const char* name, std::string& out) {
    if (const char* v = std::getenv(name)) out = v;
  };
  env_u64("READMIT_SEED", cfg.seed);
  env_str("READMIT_OUT_DIR", cfg.out_dir);
  env_int("READMIT_JOBS", cfg.jobs);
  env_double("READMIT_TRAIN_LR", cfg.train.lr);
  env_int("READMIT_TRAIN_BATCH_SIZE", cfg.train.batch_size);
  env_int("READMIT_TRAIN_EPOCHS", cfg.train.epochs);
  env_double("READMIT_TRAIN_DROPOUT", cfg.train.dropout_p);
  env_int("READMIT_BOOTSTRAP_RESAMPLES", cfg.bootstrap_resamples);
  env_int("READMIT_OR_SAMPLES", cfg.or_samples);
  env_int("READMIT_BBB_PATIENCE", cfg.bbb.patience);
  env_int("READMIT_BBB_MAX_EPOCHS", cfg.bbb.max_epochs);
}

ResolvedCohort resolve_cohort(const RunConfig& cfg) {
  ResolvedCohort rc;
  if (!cfg.stays_path.empty()) {
    rc.cohort = load_cohort(cfg.stays_path, cfg.events_path, cfg.load);
  } else if (cfg.has_synth) {
    SynthResult sr = generate_synthetic(cfg.synth, cfg.seed);
    rc.cohort = build_cohort(sr.raw, cfg.load);
    rc.synthetic = true;
    rc.truth = std::move(sr.truth);
  } else {
    throw ConfigError("config names neither data files nor a synth block");
  }
  return rc;
}

ModelConfig model_config_for(const RunConfig& cfg, Arch arch, const Cohort& cohort) {
  ModelConfig mcfg = ModelConfig::for_cohort(arch, cohort);
  mcfg.dropout_p = cfg.train.dropout_p;
  mcfg.ode_dp = {cfg.h_max_dp, cfg.ode_max_steps};
  mcfg.ode_mv = {cfg.h_max_mv, cfg.ode_max_steps};
  mcfg.mce_finetune = cfg.mce_finetune;
  return mcfg;
}

}  // namespace readmit
