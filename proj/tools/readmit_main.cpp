// readmit: synthetic cohorts, model training, benchmark sweeps, and Bayesian
// interpretation reports for 30-day ICU readmission risk models.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "readmit/bench.hpp"
#include "readmit/config.hpp"
#include "readmit/report.hpp"

namespace fs = std::filesystem;
using namespace readmit;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> archs;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON run configuration");
  cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", flags.seed, "run seed (overrides config)")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--arch", flags.archs, "architecture id, repeatable (overrides config)");
  cmd->add_option("--jobs", flags.jobs, "parallel training workers (benchmark)");
}

RunConfig make_config(const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.config_path.empty()) cfg = load_run_config(flags.config_path);
  apply_env_overrides(cfg);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.seed_set) cfg.seed = flags.seed;
  if (!flags.archs.empty()) cfg.archs = flags.archs;
  if (flags.jobs > 0) cfg.jobs = flags.jobs;
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir);
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_predictions_csv(const std::vector<Prediction>& preds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "stay_id,patient_id,score,label\n";
  char buf[32];
  for (const auto& p : preds) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.score);
    out << p.stay_id << ',' << p.patient_id << ',' << buf << ',' << p.label << '\n';
  }
}

int cmd_synth(const CommonFlags& flags) {
  RunConfig cfg = make_config(flags);
  if (!cfg.has_synth) throw ConfigError("synth: config has no synth block");
  ensure_dir(cfg.out_dir);
  SynthResult sr = generate_synthetic(cfg.synth, cfg.seed);
  write_raw(sr.raw, join(cfg.out_dir, "stays.csv"), join(cfg.out_dir, "events.csv"));
  write_planted(sr.truth, join(cfg.out_dir, "planted.csv"));
  std::cout << "wrote " << sr.raw.stays.size() << " stays, " << sr.raw.events.size()
            << " events to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags, bool bayes) {
  RunConfig cfg = make_config(flags);
  ensure_dir(cfg.out_dir);
  ResolvedCohort rc = resolve_cohort(cfg);
  if (bayes) {
    std::vector<int> all(rc.cohort.stays.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    BbbResult res = train_bbb(rc.cohort, all, cfg.bbb, cfg.seed);
    const std::string ckpt = join(cfg.out_dir, "bbb.ckpt");
    save_bbb_checkpoint(ckpt, res.model);
    std::ofstream log(join(cfg.out_dir, "bbb_elbo.csv"));
    log << "epoch,elbo\n";
    char buf[64];
    for (std::size_t e = 0; e < res.epoch_elbo.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g", e + 1, res.epoch_elbo[e]);
      log << buf << '\n';
    }
    std::cout << "bayes-by-backprop stopped at epoch " << res.stopped_epoch
              << "; checkpoint " << ckpt << "\n";
    return 0;
  }
  if (cfg.archs.size() != 1)
    throw ConfigError("train: exactly one --arch is required");
  const Arch arch = arch_from_id(cfg.archs[0]);
  const ArchTraits& tr = arch_traits(arch);
  Split split = split_by_patient(rc.cohort, cfg.test_fraction, cfg.val_fraction, cfg.seed);
  Tensor mce_dp, mce_mv;
  if (tr.mce) {
    mce_dp = mce_pretrain(rc.cohort, Stream::dp, cfg.mce_dp,
                          RngStream::derive(cfg.seed, 0x3CE0), &split.train);
    mce_mv = mce_pretrain(rc.cohort, Stream::mv, cfg.mce_mv,
                          RngStream::derive(cfg.seed, 0x3CE1), &split.train);
    write_embedding_csv(mce_dp, rc.cohort.vocab_dp, join(cfg.out_dir, "mce_dp.csv"));
    write_embedding_csv(mce_mv, rc.cohort.vocab_mv, join(cfg.out_dir, "mce_mv.csv"));
  }
  ModelConfig mcfg = model_config_for(cfg, arch, rc.cohort);
  TrainResult res = train(mcfg, rc.cohort, split, cfg.train, cfg.seed,
                          tr.mce ? &mce_dp : nullptr, tr.mce ? &mce_mv : nullptr);
  const std::string ckpt = join(cfg.out_dir, std::string(tr.id) + ".ckpt");
  save_checkpoint(ckpt, res.model);
  write_epoch_logs(res.logs, join(cfg.out_dir, std::string(tr.id) + "_epochs.csv"));
  auto preds = collect_predictions(res.model, rc.cohort, split.test);
  write_predictions_csv(preds, join(cfg.out_dir, std::string(tr.id) + "_test_preds.csv"));
  json summary;
  summary["arch"] = tr.id;
  summary["best_epoch"] = res.best_epoch;
  summary["best_val_ap"] = res.best_val_ap;
  summary["param_count"] = res.model.param_count();
  summary["checkpoint"] = ckpt;
  std::ofstream(join(cfg.out_dir, std::string(tr.id) + "_summary.json"))
      << summary.dump(2) << '\n';
  std::cout << "trained " << tr.id << " (best val AP " << res.best_val_ap << " at epoch "
            << res.best_epoch << "); checkpoint " << ckpt << "\n";
  return 0;
}

int cmd_benchmark(const CommonFlags& flags) {
  RunConfig cfg = make_config(flags);
  ensure_dir(cfg.out_dir);
  ResolvedCohort rc = resolve_cohort(cfg);
  Split split = split_by_patient(rc.cohort, cfg.test_fraction, cfg.val_fraction, cfg.seed);
  const std::vector<Arch> archs = archs_from_config(cfg);
  BenchmarkOutcome out = run_benchmark(cfg, rc.cohort, split, archs);

  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(split_hash(split)));
  write_benchmark_csv(out.rows, join(cfg.out_dir, "results.csv"));
  write_benchmark_md(out.rows, join(cfg.out_dir, "results.md"),
                     std::string("Split hash: ") + hash_buf + ".");
  write_timings_csv(out.rows, join(cfg.out_dir, "timings.csv"));

  json split_info;
  split_info["seed"] = cfg.seed;
  split_info["test_fraction"] = cfg.test_fraction;
  split_info["val_fraction"] = cfg.val_fraction;
  split_info["split_hash"] = hash_buf;
  split_info["n_train"] = split.train.size();
  split_info["n_val"] = split.val.size();
  split_info["n_test"] = split.test.size();
  std::ofstream(join(cfg.out_dir, "split.json")) << split_info.dump(2) << '\n';

  ensure_dir(join(cfg.out_dir, "checkpoints"));
  ensure_dir(join(cfg.out_dir, "predictions"));
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    if (!out.models[i]) continue;
    save_checkpoint(join(cfg.out_dir, "checkpoints/" + out.rows[i].arch_id + ".ckpt"),
                    *out.models[i]);
    write_predictions_csv(out.test_preds[i],
                          join(cfg.out_dir, "predictions/" + out.rows[i].arch_id + ".csv"));
  }
  if (out.used_mce) {
    write_embedding_csv(out.mce_dp, rc.cohort.vocab_dp, join(cfg.out_dir, "mce_dp.csv"));
    write_embedding_csv(out.mce_mv, rc.cohort.vocab_mv, join(cfg.out_dir, "mce_mv.csv"));
  }

  int failures = 0;
  for (const auto& r : out.rows) {
    if (r.error.empty()) {
      std::printf("%-40s AP %.3f  AUROC %.3f  (%.1fs)\n", r.display.c_str(),
                  r.metrics.ap.point, r.metrics.auroc.point, r.seconds);
    } else {
      ++failures;
      std::printf("%-40s FAILED: %s\n", r.display.c_str(), r.error.c_str());
    }
  }
  std::cout << "report: " << join(cfg.out_dir, "results.md") << "\n";
  return failures == 0 ? 0 : 1;
}

int cmd_interpret(const CommonFlags& flags, const std::string& checkpoint,
                  const std::string& stay_id) {
  RunConfig cfg = make_config(flags);
  ensure_dir(cfg.out_dir);
  ResolvedCohort rc = resolve_cohort(cfg);

  BayesianModel model;
  if (!checkpoint.empty()) {
    if (!fs::exists(checkpoint))
      throw ConfigError("interpret: missing checkpoint " + checkpoint);
    model = load_bbb_checkpoint(checkpoint);
  } else {
    std::vector<int> all(rc.cohort.stays.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    BbbResult res = train_bbb(rc.cohort, all, cfg.bbb, cfg.seed);
    model = std::move(res.model);
    save_bbb_checkpoint(join(cfg.out_dir, "bbb.ckpt"), model);
    std::cout << "bayes-by-backprop stopped at epoch " << res.stopped_epoch << "\n";
  }

  auto ors = posterior_odds_ratios(model, cfg.or_samples, cfg.seed);
  write_or_csv(ors, join(cfg.out_dir, "odds_ratios.csv"));
  write_or_md(ors, join(cfg.out_dir, "odds_ratios.md"));

  auto dp_scores = code_risk_scores(model, rc.cohort.vocab_dp, Stream::dp,
                                    cfg.or_samples, cfg.seed);
  auto mv_scores = code_risk_scores(model, rc.cohort.vocab_mv, Stream::mv,
                                    cfg.or_samples, cfg.seed);
  write_code_scores_csv(dp_scores, join(cfg.out_dir, "code_scores_dp.csv"));
  write_code_scores_csv(mv_scores, join(cfg.out_dir, "code_scores_mv.csv"));
  write_code_scores_md(dp_scores, mv_scores, cfg.topk_codes,
                       join(cfg.out_dir, "code_scores.md"));

  if (!stay_id.empty()) {
    const StayRecord* stay = nullptr;
    for (const auto& s : rc.cohort.stays)
      if (s.stay_id == stay_id) stay = &s;
    if (!stay) throw ConfigError("interpret: unknown stay id " + stay_id);
    RiskCi ci = patient_risk_ci(model, *stay, cfg.or_samples, cfg.seed);
    std::printf("stay %s: risk %.4f [%.4f, %.4f]\n", stay_id.c_str(), ci.mean, ci.lo,
                ci.hi);
  }
  std::cout << "interpretation tables in " << cfg.out_dir << "\n";
  return 0;
}

int cmd_report(const CommonFlags& flags, std::string results_path) {
  RunConfig cfg = make_config(flags);
  if (results_path.empty()) results_path = join(cfg.out_dir, "results.csv");
  auto rows = read_benchmark_csv(results_path);
  const std::string md_path =
      (fs::path(results_path).parent_path() / "results.md").string();
  write_benchmark_md(rows, md_path, "");
  std::cout << "wrote " << md_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep architectures for 30-day ICU readmission risk"};
  app.require_subcommand(1);

  CommonFlags synth_flags, train_flags, bench_flags, interp_flags, report_flags;
  bool train_bayes = false;
  std::string interp_checkpoint, interp_stay, report_results;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  add_common(synth, synth_flags);
  CLI::App* train = app.add_subcommand("train", "train one architecture");
  add_common(train, train_flags);
  train->add_flag("--bayes", train_bayes, "bayes-by-backprop on the full cohort");
  CLI::App* bench = app.add_subcommand("benchmark", "train and evaluate architectures");
  add_common(bench, bench_flags);
  CLI::App* interp = app.add_subcommand("interpret", "odds ratios and code risk scores");
  add_common(interp, interp_flags);
  interp->add_option("--checkpoint", interp_checkpoint, "existing bayesian checkpoint");
  interp->add_option("--stay-id", interp_stay, "print one stay's risk with 95% CI");
  CLI::App* report = app.add_subcommand("report", "render markdown from results.csv");
  add_common(report, report_flags);
  report->add_option("--results", report_results, "path to results.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_flags);
    if (train->parsed()) return cmd_train(train_flags, train_bayes);
    if (bench->parsed()) return cmd_benchmark(bench_flags);
    if (interp->parsed()) return cmd_interpret(interp_flags, interp_checkpoint, interp_stay);
    if (report->parsed()) return cmd_report(report_flags, report_results);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
