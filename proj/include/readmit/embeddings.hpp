#pragma once

#include <functional>
#include <span>
#include <string>

#include "readmit/data.hpp"
#include "readmit/tape.hpp"
#include "readmit/tensor.hpp"

namespace readmit {

// Embedding width for a vocabulary: round(2 * |V|^(1/4)), at least 2.
int embed_dim(int vocab_size);

// Step count selection for explicit Euler over an elapsed-time interval.
struct OdeStepPolicy {
  double h_max = 1.0;  // target step size (days for dp, hours for mv)
  int max_steps = 32;  // hard cap so ancient codes stay affordable

  int steps_for(double elapsed) const;
};

// Vector field y' = f(y) given by an MLP with three tanh hidden layers of
// width d and a linear output layer, d -> d.
struct OdeField {
  Tensor w1, b1, w2, b2, w3, b3, w4, b4;

  static OdeField init(int dim, RngStream& rng);
  Tensor eval(const Tensor& y) const;
  int dim() const { return w1.rows; }
};

// Explicit Euler with a caller-supplied field; the oracle-facing entry point.
// elapsed == 0 returns y0 unchanged. Throws NumericError (with the step
// index) if the state goes non-finite.
Tensor evolve_euler(const Tensor& y0, double elapsed,
                    const std::function<Tensor(const Tensor&)>& field, int n_steps);

// Same integrator with the MLP field.
Tensor evolve_ode(const Tensor& e0, double elapsed, const OdeField& field, int n_steps);

// Differentiable unrolled-Euler variant used inside model graphs.
struct OdeFieldVars {
  ad::Var w1, b1, w2, b2, w3, b3, w4, b4;
};
ad::Var ode_field_eval(ad::Tape& t, const OdeFieldVars& f, ad::Var y);
ad::Var evolve_ode(ad::Tape& t, ad::Var y0, double elapsed, const OdeFieldVars& field,
                   int n_steps);

// [e; elapsed]
Tensor concat_time(const Tensor& e, double elapsed);

// --- medical concept embeddings (CBOW with time-aware attention) -----------------

struct MceConfig {
  double window = 365.0;  // same unit as the stream's elapsed times
  int buckets = 8;        // log-spaced |dt| buckets
  int epochs = 5;
  double lr = 0.001;
  int batch_size = 128;
};

struct MceModel {
  Tensor in_table;   // |V| x d
  Tensor out_table;  // |V| x d
  Tensor att;        // |V| x B attention scalars, indexed by target code
  MceConfig cfg;

  int vocab() const { return in_table.rows; }
  int dim() const { return in_table.cols; }
  // Log-spaced bucket of |dt| within (0, window]; 0 for dt == 0, B-1 at the
  // window boundary and beyond.
  int bucket_of(double dt) const;
};

MceModel mce_init(int vocab_size, const MceConfig& cfg, std::uint64_t seed);

// Attention-weighted context average for one training example (exposed for
// the uniform-attention equivalence check).
Tensor mce_hidden(const MceModel& m, std::span<const int> context_codes,
                  std::span<const double> context_dt, int target_code);

// Trains in_table/out_table/att with Adam over all (stay, target) pairs of
// the stream; stays with fewer than two in-window events contribute nothing.
// When stay_subset is non-null only those stay indices are used.
void mce_train(MceModel& m, const Cohort& cohort, Stream stream, std::uint64_t seed,
               const std::vector<int>* stay_subset = nullptr);

// init + train; returns the input table.
Tensor mce_pretrain(const Cohort& cohort, Stream stream, const MceConfig& cfg,
                    std::uint64_t seed, const std::vector<int>* stay_subset = nullptr);

void write_embedding_csv(const Tensor& table, const Vocabulary& vocab,
                         const std::string& path);
Tensor read_embedding_csv(const std::string& path, const Vocabulary& vocab);

}  // namespace readmit
