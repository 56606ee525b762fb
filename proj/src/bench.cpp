#include "readmit/bench.hpp"

#include <atomic>
#include <chrono>
#include <cstring>
#include <thread>

namespace readmit {

std::vector<Arch> archs_from_config(const RunConfig& cfg) {
  std::vector<Arch> archs;
  if (cfg.archs.empty()) {
    for (const auto& tr : all_archs()) archs.push_back(tr.arch);
  } else {
    for (const auto& id : cfg.archs) archs.push_back(arch_from_id(id));
  }
  return archs;
}

BenchmarkOutcome run_benchmark(const RunConfig& cfg, const Cohort& cohort,
                               const Split& split, const std::vector<Arch>& archs) {
  if (archs.empty()) throw ConfigError("run_benchmark: no architectures requested");
  BenchmarkOutcome out;
  out.rows.resize(archs.size());
  out.test_preds.resize(archs.size());
  out.models.resize(archs.size());

  bool any_mce = false;
  for (Arch a : archs) any_mce = any_mce || arch_traits(a).mce;
  if (any_mce) {
    // pre-train on the training stays only, so the test split stays unseen
    out.mce_dp = mce_pretrain(cohort, Stream::dp, cfg.mce_dp,
                              RngStream::derive(cfg.seed, 0x3CE0), &split.train);
    out.mce_mv = mce_pretrain(cohort, Stream::mv, cfg.mce_mv,
                              RngStream::derive(cfg.seed, 0x3CE1), &split.train);
    out.used_mce = true;
  }

  auto run_one = [&](std::size_t i) {
    const Arch arch = archs[i];
    const ArchTraits& tr = arch_traits(arch);
    BenchmarkRow& row = out.rows[i];
    row.arch_id = tr.id;
    row.display = tr.display;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ModelConfig mcfg = model_config_for(cfg, arch, cohort);
      const std::uint64_t arch_seed =
          RngStream::derive(cfg.seed, fnv1a64(tr.id, std::strlen(tr.id)));
      TrainResult res =
          train(mcfg, cohort, split, cfg.train, arch_seed,
                tr.mce ? &out.mce_dp : nullptr, tr.mce ? &out.mce_mv : nullptr);
      row.param_count = res.model.param_count();
      out.test_preds[i] = collect_predictions(res.model, cohort, split.test);
      row.metrics = evaluate_with_ci(out.test_preds[i], cfg.bootstrap_resamples,
                                     RngStream::derive(cfg.seed, 0xC1));
      out.models[i] = std::move(res.model);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1 || archs.size() == 1) {
    for (std::size_t i = 0; i < archs.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t i = next.fetch_add(1); i < archs.size(); i = next.fetch_add(1))
        run_one(i);
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(jobs, static_cast<int>(archs.size()));
    pool.reserve(n_threads);
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace readmit
