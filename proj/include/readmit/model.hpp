#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "readmit/data.hpp"
#include "readmit/embeddings.hpp"
#include "readmit/gradcheck.hpp"
#include "readmit/tape.hpp"

namespace readmit {

// --- architecture zoo -------------------------------------------------------------

enum class Arch {
  ode_rnn_attn,
  ode_rnn,
  rnn_ode_decay_attn,
  rnn_ode_decay,
  rnn_exp_decay_attn,
  rnn_exp_decay,
  rnn_concat_dt_attn,
  rnn_concat_dt,
  ode_attn,
  attn_concat_time,
  mce_rnn_attn,
  mce_rnn,
  mce_attn,
  logistic,
};

enum class RnnTimeMode { none, concat_dt, exp_decay, ode_decay };

struct ArchTraits {
  Arch arch;
  const char* id;
  const char* display;
  bool mce;          // embeddings come from pre-trained MCE tables
  bool ode_embed;    // neural ODE transports code embeddings across elapsed time
  bool concat_time;  // absolute elapsed time appended to embeddings
  bool rnn;          // bi-directional GRU
  RnnTimeMode rnn_time;
  bool attn;         // attention pooling (over RNN outputs, or embeddings directly)
};

const std::vector<ArchTraits>& all_archs();
const ArchTraits& arch_traits(Arch a);
Arch arch_from_id(const std::string& id);

// --- building blocks ----------------------------------------------------------------

struct GruVars {
  ad::Var wz, wr, wn, uz, ur, un, bz, br, bn;
};

// z = s(Wz x + Uz h + bz); r = s(Wr x + Ur h + br);
// n = tanh(Wn x + Un (r*h) + bn); h' = (1-z)*n + z*h
ad::Var gru_step(ad::Tape& t, const GruVars& cell, ad::Var h, ad::Var x);

// h' = h * exp(-softplus(gamma_raw) * dt); exact identity at dt == 0.
ad::Var apply_exp_decay(ad::Tape& t, ad::Var h, double dt, ad::Var gamma_raw);

struct AttnVars {
  ad::Var w, b, u;
};

struct AttnOut {
  ad::Var weights;  // invalid for an empty sequence
  ad::Var context;  // zeros for an empty sequence
};

// u_i = tanh(W v_i + b); alpha = softmax(u_i . u_c); context = sum alpha_i v_i
AttnOut attend(ad::Tape& t, const AttnVars& vars, std::span<const ad::Var> values);

struct BiGruVars {
  GruVars fwd, bwd;
  ad::Var gamma_fwd, gamma_bwd;    // exp_decay mode
  OdeFieldVars ode_fwd, ode_bwd;   // ode_decay mode
};

struct BiGruOut {
  std::vector<ad::Var> outputs;  // per step, concat(fwd_t, bwd_t), dim 2h
  ad::Var final_state;           // concat(final fwd, final bwd); zeros when empty
};

// inputs are chronological (oldest first); elapsed must be non-increasing and
// parallel to inputs. Per-direction time gaps are derived internally with the
// first gap of each direction set to 0.
BiGruOut run_bigru(ad::Tape& t, const BiGruVars& vars, RnnTimeMode mode,
                   const OdeStepPolicy& policy, int hidden_dim,
                   std::span<const ad::Var> inputs, std::span<const double> elapsed);

// --- model ---------------------------------------------------------------------------

struct ParamSet {
  std::vector<NamedTensor> items;
  std::vector<char> trainable;
  std::unordered_map<std::string, int> index;

  int add(const std::string& name, Tensor t, bool train = true);
  int find(const std::string& name) const;
  Tensor& value(int i) { return items[i].value; }
  const Tensor& value(int i) const { return items[i].value; }
  std::size_t size() const { return items.size(); }
  long trainable_scalars() const;
};

struct ModelConfig {
  Arch arch = Arch::logistic;
  int vocab_dp = 1;
  int vocab_mv = 1;
  int d_dp = 2;
  int d_mv = 2;
  double dropout_p = 0.5;
  OdeStepPolicy ode_dp{1.0, 32};  // days
  OdeStepPolicy ode_mv{1.0, 32};  // hours
  bool mce_finetune = false;
  std::vector<int> mv_vital_canon;  // per mv vocab id; logistic baseline only
  std::uint64_t vocab_hash_dp = 0;
  std::uint64_t vocab_hash_mv = 0;

  static ModelConfig for_cohort(Arch arch, const Cohort& cohort);
};

class Model {
 public:
  // mce tables must be supplied exactly for MCE variants.
  static Model build(const ModelConfig& cfg, std::uint64_t seed,
                     const Tensor* mce_dp = nullptr, const Tensor* mce_mv = nullptr);

  const ModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  long param_count() const { return params_.trainable_scalars(); }

  // One leaf per parameter, bound to current values, in parameter order.
  std::vector<ad::Var> bind(ad::Tape& t) const;

  // Risk probability subgraph for one stay; leaves must parallel params().
  ad::Var risk(ad::Tape& t, std::span<const ad::Var> leaves, const StayRecord& stay,
               bool training, RngStream& rng) const;

  double predict_risk(const StayRecord& stay, bool training, RngStream& rng) const;
  double predict(const StayRecord& stay) const;  // eval mode
  std::vector<double> predict_all(const Cohort& cohort, const std::vector<int>& idx) const;

 private:
  friend class BayesianModel;
  struct StreamLayers {
    int d = 0;
    int embed = -1;
    std::array<int, 8> ode_embed{{-1, -1, -1, -1, -1, -1, -1, -1}};
    std::array<int, 9> gru_fwd{{-1, -1, -1, -1, -1, -1, -1, -1, -1}};
    std::array<int, 9> gru_bwd{{-1, -1, -1, -1, -1, -1, -1, -1, -1}};
    int gamma_fwd = -1, gamma_bwd = -1;
    std::array<int, 8> ode_fwd{{-1, -1, -1, -1, -1, -1, -1, -1}};
    std::array<int, 8> ode_bwd{{-1, -1, -1, -1, -1, -1, -1, -1}};
    int attn_w = -1, attn_b = -1, attn_u = -1;
    int score_w = -1, score_b = -1;
  };

  ad::Var stream_score(ad::Tape& t, std::span<const ad::Var> leaves,
                       const StreamLayers& sl, Stream stream,
                       const std::vector<CodeEvent>& events, bool training,
                       RngStream& rng) const;

  ModelConfig cfg_;
  ParamSet params_;
  StreamLayers dp_, mv_;
  int final_w_ = -1, final_b_ = -1;
};

// Covariate labels of the final layer: 23 statics plus the two stream scores
// (deep variants), or 23 statics plus the 32 vital indicators (baseline).
std::vector<std::string> final_layer_labels(const Model& m);

// --- checkpoints -----------------------------------------------------------------------

// Flat name->array archive, manifest as JSON, length-prefixed binary records.
void save_params(const std::string& path, const ModelConfig& cfg,
                 const std::vector<NamedTensor>& tensors, bool bayes);
struct LoadedParams {
  ModelConfig cfg;
  std::vector<NamedTensor> tensors;
  bool bayes = false;
};
LoadedParams load_params(const std::string& path);

void save_checkpoint(const std::string& path, const Model& m);
Model load_checkpoint(const std::string& path);

}  // namespace readmit
