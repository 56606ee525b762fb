#pragma once

#include <string>
#include <vector>

#include "readmit/bayes.hpp"
#include "readmit/metrics.hpp"

namespace readmit {

struct BenchmarkRow {
  std::string arch_id;
  std::string display;
  long param_count = 0;
  MetricReport metrics;
  double seconds = 0.0;
  std::string error;  // non-empty when this architecture failed to train
};

// results.csv / results.md are deterministic for a fixed seed; wall-clock
// timings go to their own file.
void write_benchmark_csv(const std::vector<BenchmarkRow>& rows, const std::string& path);
std::vector<BenchmarkRow> read_benchmark_csv(const std::string& path);
void write_timings_csv(const std::vector<BenchmarkRow>& rows, const std::string& path);

std::string benchmark_markdown(const std::vector<BenchmarkRow>& rows,
                               const std::string& split_note);
void write_benchmark_md(const std::vector<BenchmarkRow>& rows, const std::string& path,
                        const std::string& split_note);

void write_or_csv(const std::vector<OrRow>& rows, const std::string& path);
std::string or_markdown(const std::vector<OrRow>& rows);
void write_or_md(const std::vector<OrRow>& rows, const std::string& path);

void write_code_scores_csv(const std::vector<CodeScoreRow>& rows, const std::string& path);
std::string code_scores_markdown(const std::vector<CodeScoreRow>& dp_rows,
                                 const std::vector<CodeScoreRow>& mv_rows, int top_k);
void write_code_scores_md(const std::vector<CodeScoreRow>& dp_rows,
                          const std::vector<CodeScoreRow>& mv_rows, int top_k,
                          const std::string& path);

}  // namespace readmit
