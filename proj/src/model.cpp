#include "readmit/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace readmit {

using nlohmann::json;

// --- architecture traits ---------------------------------------------------------

const std::vector<ArchTraits>& all_archs() {
  static const std::vector<ArchTraits> archs = {
      {Arch::ode_rnn_attn, "ode_rnn_attn", "ODE + RNN + Attention", false, true, false,
       true, RnnTimeMode::none, true},
      {Arch::ode_rnn, "ode_rnn", "ODE + RNN", false, true, false, true, RnnTimeMode::none,
       false},
      {Arch::rnn_ode_decay_attn, "rnn_ode_decay_attn", "RNN (ODE time decay) + Attention",
       false, false, false, true, RnnTimeMode::ode_decay, true},
      {Arch::rnn_ode_decay, "rnn_ode_decay", "RNN (ODE time decay)", false, false, false,
       true, RnnTimeMode::ode_decay, false},
      {Arch::rnn_exp_decay_attn, "rnn_exp_decay_attn", "RNN (exp time decay) + Attention",
       false, false, false, true, RnnTimeMode::exp_decay, true},
      {Arch::rnn_exp_decay, "rnn_exp_decay", "RNN (exp time decay)", false, false, false,
       true, RnnTimeMode::exp_decay, false},
      {Arch::rnn_concat_dt_attn, "rnn_concat_dt_attn",
       "RNN (concatenated Δ time) + Attention", false, false, false, true,
       RnnTimeMode::concat_dt, true},
      {Arch::rnn_concat_dt, "rnn_concat_dt", "RNN (concatenated Δ time)", false, false,
       false, true, RnnTimeMode::concat_dt, false},
      {Arch::ode_attn, "ode_attn", "ODE + Attention", false, true, false, false,
       RnnTimeMode::none, true},
      {Arch::attn_concat_time, "attn_concat_time", "Attention (concatenated time)", false,
       false, true, false, RnnTimeMode::none, true},
      {Arch::mce_rnn_attn, "mce_rnn_attn", "MCE + RNN + Attention", true, false, false,
       true, RnnTimeMode::none, true},
      {Arch::mce_rnn, "mce_rnn", "MCE + RNN", true, false, false, true, RnnTimeMode::none,
       false},
      {Arch::mce_attn, "mce_attn", "MCE + Attention", true, false, false, false,
       RnnTimeMode::none, true},
      {Arch::logistic, "logistic", "Logistic Regression", false, false, false, false,
       RnnTimeMode::none, false},
  };
  return archs;
}

const ArchTraits& arch_traits(Arch a) {
  for (const auto& t : all_archs())
    if (t.arch == a) return t;
  throw ConfigError("unknown architecture");
}

Arch arch_from_id(const std::string& id) {
  for (const auto& t : all_archs())
    if (id == t.id) return t.arch;
  throw ConfigError("unknown architecture id '" + id + "'");
}

// --- building blocks --------------------------------------------------------------

ad::Var gru_step(ad::Tape& t, const GruVars& cell, ad::Var h, ad::Var x) {
  ad::Var z = t.sigmoid(t.add(t.affine(cell.wz, x, cell.bz), t.matvec(cell.uz, h)));
  ad::Var r = t.sigmoid(t.add(t.affine(cell.wr, x, cell.br), t.matvec(cell.ur, h)));
  ad::Var n = t.tanh(t.add(t.affine(cell.wn, x, cell.bn), t.matvec(cell.un, t.mul(r, h))));
  return t.add(n, t.mul(z, t.sub(h, n)));
}

ad::Var apply_exp_decay(ad::Tape& t, ad::Var h, double dt, ad::Var gamma_raw) {
  if (dt < 0.0) throw ConfigError("apply_exp_decay: dt must be >= 0");
  if (dt == 0.0) return h;
  return t.mul(h, t.exp(t.scalar_mul(t.softplus(gamma_raw), -dt)));
}

AttnOut attend(ad::Tape& t, const AttnVars& vars, std::span<const ad::Var> values) {
  AttnOut out;
  if (values.empty()) {
    out.context = t.leaf_zeros(t.value(vars.u).rows);
    return out;
  }
  std::vector<ad::Var> scores;
  scores.reserve(values.size());
  for (ad::Var v : values)
    scores.push_back(t.dot(t.tanh(t.affine(vars.w, v, vars.b)), vars.u));
  out.weights = t.softmax(t.concat(scores));
  out.context = t.weighted_sum(out.weights, values);
  return out;
}

BiGruOut run_bigru(ad::Tape& t, const BiGruVars& vars, RnnTimeMode mode,
                   const OdeStepPolicy& policy, int hidden_dim,
                   std::span<const ad::Var> inputs, std::span<const double> elapsed) {
  const std::size_t n = inputs.size();
  if (elapsed.size() != n) throw ConfigError("run_bigru: inputs/elapsed length mismatch");
  BiGruOut out;
  if (n == 0) {
    out.final_state = t.leaf_zeros(2 * hidden_dim);
    return out;
  }
  for (std::size_t i = 1; i < n; ++i)
    if (elapsed[i] > elapsed[i - 1])
      throw ConfigError("run_bigru: elapsed must be non-increasing (oldest first)");

  auto run_dir = [&](const GruVars& cell, ad::Var gamma, const OdeFieldVars& field,
                     bool reverse) {
    std::vector<ad::Var> states(n);
    ad::Var h = t.leaf_zeros(hidden_dim);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t idx = reverse ? n - 1 - k : k;
      double dt = 0.0;
      if (k > 0) {
        const std::size_t prev = reverse ? n - k : k - 1;
        dt = reverse ? elapsed[idx] - elapsed[prev] : elapsed[prev] - elapsed[idx];
      }
      if (mode == RnnTimeMode::exp_decay) {
        h = apply_exp_decay(t, h, dt, gamma);
      } else if (mode == RnnTimeMode::ode_decay && dt > 0.0) {
        h = evolve_ode(t, h, dt, field, policy.steps_for(dt));
      }
      ad::Var x = inputs[idx];
      if (mode == RnnTimeMode::concat_dt) {
        std::array<ad::Var, 2> parts{x, t.constant_scalar(dt)};
        x = t.concat(parts);
      }
      h = gru_step(t, cell, h, x);
      states[k] = h;
    }
    return states;
  };

  std::vector<ad::Var> fwd = run_dir(vars.fwd, vars.gamma_fwd, vars.ode_fwd, false);
  std::vector<ad::Var> bwd = run_dir(vars.bwd, vars.gamma_bwd, vars.ode_bwd, true);

  out.outputs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<ad::Var, 2> parts{fwd[i], bwd[n - 1 - i]};
    out.outputs[i] = t.concat(parts);
  }
  std::array<ad::Var, 2> finals{fwd[n - 1], bwd[n - 1]};
  out.final_state = t.concat(finals);
  return out;
}

// --- parameter set -------------------------------------------------------------------

int ParamSet::add(const std::string& name, Tensor t, bool train) {
  if (index.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
  const int id = static_cast<int>(items.size());
  items.push_back({name, std::move(t)});
  trainable.push_back(train ? 1 : 0);
  index[name] = id;
  return id;
}

int ParamSet::find(const std::string& name) const {
  auto it = index.find(name);
  return it == index.end() ? -1 : it->second;
}

long ParamSet::trainable_scalars() const {
  long total = 0;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (trainable[i]) total += items[i].value.size();
  return total;
}

// --- model construction -----------------------------------------------------------------

ModelConfig ModelConfig::for_cohort(Arch arch, const Cohort& cohort) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.vocab_dp = cohort.vocab_dp.size();
  cfg.vocab_mv = cohort.vocab_mv.size();
  cfg.d_dp = embed_dim(cfg.vocab_dp);
  cfg.d_mv = embed_dim(cfg.vocab_mv);
  cfg.mv_vital_canon = cohort.mv_vital_canon;
  cfg.vocab_hash_dp = cohort.vocab_dp.hash();
  cfg.vocab_hash_mv = cohort.vocab_mv.hash();
  return cfg;
}

namespace {

Tensor init_matrix(int rows, int cols, const std::string& name, std::uint64_t seed) {
  Tensor t(rows, cols);
  RngStream rng(seed, fnv1a64(name.data(), name.size()));
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  for (int i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

Model Model::build(const ModelConfig& cfg, std::uint64_t seed, const Tensor* mce_dp,
                   const Tensor* mce_mv) {
  const ArchTraits& tr = arch_traits(cfg.arch);
  if (tr.mce && (mce_dp == nullptr || mce_mv == nullptr))
    throw ConfigError("architecture requires pre-trained MCE tables");
  if (!tr.mce && (mce_dp != nullptr || mce_mv != nullptr))
    throw ConfigError("MCE tables supplied to a non-MCE architecture");

  Model m;
  m.cfg_ = cfg;

  if (cfg.arch == Arch::logistic) {
    m.final_w_ = m.params_.add("final.w", Tensor(kNumStatic + VitalBinner::kNumCodes, 1));
    m.final_b_ = m.params_.add("final.b", Tensor(1, 1));
    return m;
  }

  auto build_stream = [&](const char* sname, int vocab, int d, const Tensor* mce) {
    StreamLayers sl;
    sl.d = d;
    const std::string p = std::string(sname) + ".";
    if (tr.mce) {
      if (mce->rows != vocab || mce->cols != d)
        throw ConfigError("MCE table shape mismatch for stream " + std::string(sname));
      sl.embed = m.params_.add(p + "embed", *mce, /*train=*/cfg.mce_finetune);
    } else {
      sl.embed = m.params_.add(p + "embed", init_matrix(vocab, d, p + "embed", seed));
    }
    if (tr.ode_embed) {
      const char* names[8] = {"w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4"};
      for (int i = 0; i < 8; ++i) {
        const std::string nm = p + "ode_embed." + names[i];
        sl.ode_embed[i] = (i % 2 == 0)
                              ? m.params_.add(nm, init_matrix(d, d, nm, seed))
                              : m.params_.add(nm, Tensor(d, 1));
      }
    }
    const int in_dim = d + (tr.rnn_time == RnnTimeMode::concat_dt ? 1 : 0);
    if (tr.rnn) {
      for (int dir = 0; dir < 2; ++dir) {
        const std::string dp = p + "gru." + (dir == 0 ? "fwd." : "bwd.");
        auto& idx = dir == 0 ? sl.gru_fwd : sl.gru_bwd;
        const char* gw[3] = {"wz", "wr", "wn"};
        const char* gu[3] = {"uz", "ur", "un"};
        const char* gb[3] = {"bz", "br", "bn"};
        for (int g = 0; g < 3; ++g)
          idx[g] = m.params_.add(dp + gw[g], init_matrix(d, in_dim, dp + gw[g], seed));
        for (int g = 0; g < 3; ++g)
          idx[3 + g] = m.params_.add(dp + gu[g], init_matrix(d, d, dp + gu[g], seed));
        for (int g = 0; g < 3; ++g) idx[6 + g] = m.params_.add(dp + gb[g], Tensor(d, 1));
      }
      if (tr.rnn_time == RnnTimeMode::exp_decay) {
        Tensor g0(d, 1);
        g0.fill(-2.0);  // softplus(-2) ~ 0.127: mild decay per raw time unit
        sl.gamma_fwd = m.params_.add(p + "decay.fwd.gamma_raw", g0);
        sl.gamma_bwd = m.params_.add(p + "decay.bwd.gamma_raw", g0);
      }
      if (tr.rnn_time == RnnTimeMode::ode_decay) {
        const char* names[8] = {"w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4"};
        for (int dir = 0; dir < 2; ++dir) {
          auto& idx = dir == 0 ? sl.ode_fwd : sl.ode_bwd;
          const std::string dp = p + "ode_state." + (dir == 0 ? "fwd." : "bwd.");
          for (int i = 0; i < 8; ++i) {
            const std::string nm = dp + names[i];
            idx[i] = (i % 2 == 0) ? m.params_.add(nm, init_matrix(d, d, nm, seed))
                                  : m.params_.add(nm, Tensor(d, 1));
          }
        }
      }
    }
    // pooled representation width
    const int dv = tr.rnn ? 2 * d : (tr.concat_time ? d + 1 : d);
    if (tr.attn) {
      sl.attn_w = m.params_.add(p + "attn.w", init_matrix(dv, dv, p + "attn.w", seed));
      sl.attn_b = m.params_.add(p + "attn.b", Tensor(dv, 1));
      sl.attn_u = m.params_.add(p + "attn.u", init_matrix(dv, 1, p + "attn.u", seed));
    }
    sl.score_w = m.params_.add(p + "score.w", init_matrix(dv, 1, p + "score.w", seed));
    sl.score_b = m.params_.add(p + "score.b", Tensor(1, 1));
    return sl;
  };

  m.dp_ = build_stream("dp", cfg.vocab_dp, cfg.d_dp, mce_dp);
  m.mv_ = build_stream("mv", cfg.vocab_mv, cfg.d_mv, mce_mv);
  // Zero final layer: every model starts at risk 0.5 and the weights read as
  // log-odds against the reference group.
  m.final_w_ = m.params_.add("final.w", Tensor(kNumStatic + 2, 1));
  m.final_b_ = m.params_.add("final.b", Tensor(1, 1));
  return m;
}

std::vector<ad::Var> Model::bind(ad::Tape& t) const {
  std::vector<ad::Var> leaves;
  leaves.reserve(params_.size());
  for (const auto& p : params_.items) leaves.push_back(t.leaf(p.value));
  return leaves;
}

// --- forward ---------------------------------------------------------------------------

ad::Var Model::stream_score(ad::Tape& t, std::span<const ad::Var> leaves,
                            const StreamLayers& sl, Stream stream,
                            const std::vector<CodeEvent>& events, bool training,
                            RngStream& rng) const {
  const ArchTraits& tr = arch_traits(cfg_.arch);
  const OdeStepPolicy& policy = stream == Stream::dp ? cfg_.ode_dp : cfg_.ode_mv;
  const int vocab = stream == Stream::dp ? cfg_.vocab_dp : cfg_.vocab_mv;
  const double p = cfg_.dropout_p;

  std::vector<ad::Var> embeds;
  std::vector<double> elapsed;
  embeds.reserve(events.size());
  elapsed.reserve(events.size());
  OdeFieldVars embed_field{};
  if (tr.ode_embed)
    embed_field = {leaves[sl.ode_embed[0]], leaves[sl.ode_embed[1]],
                   leaves[sl.ode_embed[2]], leaves[sl.ode_embed[3]],
                   leaves[sl.ode_embed[4]], leaves[sl.ode_embed[5]],
                   leaves[sl.ode_embed[6]], leaves[sl.ode_embed[7]]};
  for (const CodeEvent& ev : events) {
    if (ev.code_id < 0 || ev.code_id >= vocab)
      throw ConfigError("unknown code id " + std::to_string(ev.code_id) + " in stream " +
                        stream_name(stream));
    ad::Var e = t.select_row(leaves[sl.embed], ev.code_id);
    if (tr.ode_embed && ev.elapsed > 0.0)
      e = evolve_ode(t, e, ev.elapsed, embed_field, policy.steps_for(ev.elapsed));
    if (tr.concat_time) {
      std::array<ad::Var, 2> parts{e, t.constant_scalar(ev.elapsed)};
      e = t.concat(parts);
    }
    embeds.push_back(t.dropout(e, p, training, rng));
    elapsed.push_back(ev.elapsed);
  }

  ad::Var pooled;
  if (tr.rnn) {
    BiGruVars vars;
    auto cell = [&](const std::array<int, 9>& idx) {
      return GruVars{leaves[idx[0]], leaves[idx[1]], leaves[idx[2]],
                     leaves[idx[3]], leaves[idx[4]], leaves[idx[5]],
                     leaves[idx[6]], leaves[idx[7]], leaves[idx[8]]};
    };
    vars.fwd = cell(sl.gru_fwd);
    vars.bwd = cell(sl.gru_bwd);
    if (tr.rnn_time == RnnTimeMode::exp_decay) {
      vars.gamma_fwd = leaves[sl.gamma_fwd];
      vars.gamma_bwd = leaves[sl.gamma_bwd];
    }
    if (tr.rnn_time == RnnTimeMode::ode_decay) {
      auto field = [&](const std::array<int, 8>& idx) {
        return OdeFieldVars{leaves[idx[0]], leaves[idx[1]], leaves[idx[2]],
                            leaves[idx[3]], leaves[idx[4]], leaves[idx[5]],
                            leaves[idx[6]], leaves[idx[7]]};
      };
      vars.ode_fwd = field(sl.ode_fwd);
      vars.ode_bwd = field(sl.ode_bwd);
    }
    BiGruOut rnn = run_bigru(t, vars, tr.rnn_time, policy, sl.d, embeds, elapsed);
    if (tr.attn) {
      std::vector<ad::Var> values;
      values.reserve(rnn.outputs.size());
      for (ad::Var o : rnn.outputs) values.push_back(t.dropout(o, p, training, rng));
      AttnOut att = attend(t, {leaves[sl.attn_w], leaves[sl.attn_b], leaves[sl.attn_u]},
                           values);
      pooled = t.dropout(att.context, p, training, rng);
    } else {
      pooled = t.dropout(rnn.final_state, p, training, rng);
    }
  } else {
    AttnOut att =
        attend(t, {leaves[sl.attn_w], leaves[sl.attn_b], leaves[sl.attn_u]}, embeds);
    pooled = t.dropout(att.context, p, training, rng);
  }
  return t.add(t.dot(leaves[sl.score_w], pooled), leaves[sl.score_b]);
}

ad::Var Model::risk(ad::Tape& t, std::span<const ad::Var> leaves, const StayRecord& stay,
                    bool training, RngStream& rng) const {
  Tensor statics(kNumStatic, 1);
  for (int i = 0; i < kNumStatic; ++i) statics[i] = stay.statics[i];

  if (cfg_.arch == Arch::logistic) {
    // statics plus a one-hot of the most recent code per vital-sign kind
    Tensor feats(kNumStatic + VitalBinner::kNumCodes, 1);
    for (int i = 0; i < kNumStatic; ++i) feats[i] = stay.statics[i];
    const VitalBinner& binner = VitalBinner::standard();
    bool seen[VitalBinner::kNumKinds] = {};
    for (auto it = stay.mv_events.rbegin(); it != stay.mv_events.rend(); ++it) {
      if (it->code_id < 0 || it->code_id >= static_cast<int>(cfg_.mv_vital_canon.size()))
        continue;
      const int canon = cfg_.mv_vital_canon[it->code_id];
      if (canon < 0) continue;
      const int kind = static_cast<int>(binner.kind_of(canon));
      if (!seen[kind]) {
        seen[kind] = true;
        feats[kNumStatic + canon] = 1.0;
      }
    }
    ad::Var z = t.add(t.dot(leaves[final_w_], t.leaf(feats)), leaves[final_b_]);
    return t.sigmoid(z);
  }

  ad::Var score_dp =
      stream_score(t, leaves, dp_, Stream::dp, stay.dp_events, training, rng);
  ad::Var score_mv =
      stream_score(t, leaves, mv_, Stream::mv, stay.mv_events, training, rng);
  std::array<ad::Var, 3> parts{t.leaf(statics), score_dp, score_mv};
  ad::Var feats = t.concat(parts);
  ad::Var z = t.add(t.dot(leaves[final_w_], feats), leaves[final_b_]);
  return t.sigmoid(z);
}

double Model::predict_risk(const StayRecord& stay, bool training, RngStream& rng) const {
  ad::Tape t;
  auto leaves = bind(t);
  return t.scalar(risk(t, leaves, stay, training, rng));
}

double Model::predict(const StayRecord& stay) const {
  RngStream rng(0);
  return predict_risk(stay, /*training=*/false, rng);
}

std::vector<double> Model::predict_all(const Cohort& cohort,
                                       const std::vector<int>& idx) const {
  std::vector<double> out;
  out.reserve(idx.size());
  ad::Tape t;
  RngStream rng(0);
  for (int i : idx) {
    t.reset();
    auto leaves = bind(t);
    out.push_back(t.scalar(risk(t, leaves, cohort.stays[i], false, rng)));
  }
  return out;
}

std::vector<std::string> final_layer_labels(const Model& m) {
  std::vector<std::string> labels;
  for (const char* n : static_display_names()) labels.emplace_back(n);
  if (m.config().arch == Arch::logistic) {
    for (const auto& code : VitalBinner::standard().all_codes())
      labels.push_back("Vital: " + code);
  } else {
    labels.emplace_back("Score: Diagnoses and Procedures");
    labels.emplace_back("Score: Medications and Vital Signs");
  }
  return labels;
}

// --- checkpoints -------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'M', 'C', 'K', 'P', 'T', '1', '\n'};

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t hash_from_hex(const std::string& s) {
  return std::strtoull(s.c_str(), nullptr, 16);
}

json config_to_json(const ModelConfig& cfg) {
  json j;
  j["arch"] = arch_traits(cfg.arch).id;
  j["vocab_dp"] = cfg.vocab_dp;
  j["vocab_mv"] = cfg.vocab_mv;
  j["d_dp"] = cfg.d_dp;
  j["d_mv"] = cfg.d_mv;
  j["dropout_p"] = cfg.dropout_p;
  j["ode_dp"] = {{"h_max", cfg.ode_dp.h_max}, {"max_steps", cfg.ode_dp.max_steps}};
  j["ode_mv"] = {{"h_max", cfg.ode_mv.h_max}, {"max_steps", cfg.ode_mv.max_steps}};
  j["mce_finetune"] = cfg.mce_finetune;
  j["mv_vital_canon"] = cfg.mv_vital_canon;
  j["vocab_hash_dp"] = hash_hex(cfg.vocab_hash_dp);
  j["vocab_hash_mv"] = hash_hex(cfg.vocab_hash_mv);
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.arch = arch_from_id(j.at("arch").get<std::string>());
  cfg.vocab_dp = j.at("vocab_dp").get<int>();
  cfg.vocab_mv = j.at("vocab_mv").get<int>();
  cfg.d_dp = j.at("d_dp").get<int>();
  cfg.d_mv = j.at("d_mv").get<int>();
  cfg.dropout_p = j.at("dropout_p").get<double>();
  cfg.ode_dp.h_max = j.at("ode_dp").at("h_max").get<double>();
  cfg.ode_dp.max_steps = j.at("ode_dp").at("max_steps").get<int>();
  cfg.ode_mv.h_max = j.at("ode_mv").at("h_max").get<double>();
  cfg.ode_mv.max_steps = j.at("ode_mv").at("max_steps").get<int>();
  cfg.mce_finetune = j.at("mce_finetune").get<bool>();
  cfg.mv_vital_canon = j.at("mv_vital_canon").get<std::vector<int>>();
  cfg.vocab_hash_dp = hash_from_hex(j.at("vocab_hash_dp").get<std::string>());
  cfg.vocab_hash_mv = hash_from_hex(j.at("vocab_hash_mv").get<std::string>());
  return cfg;
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void save_params(const std::string& path, const ModelConfig& cfg,
                 const std::vector<NamedTensor>& tensors, bool bayes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  json manifest = config_to_json(cfg);
  manifest["bayes"] = bayes;
  json names = json::array();
  for (const auto& nt : tensors) names.push_back(nt.name);
  manifest["names"] = names;
  const std::string mtext = manifest.dump();

  out.write(kMagic, sizeof(kMagic));
  write_u64(out, mtext.size());
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& nt : tensors) {
    write_u32(out, static_cast<std::uint32_t>(nt.name.size()));
    out.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    write_u32(out, static_cast<std::uint32_t>(nt.value.rows));
    write_u32(out, static_cast<std::uint32_t>(nt.value.cols));
    out.write(reinterpret_cast<const char*>(nt.value.data()),
              static_cast<std::streamsize>(nt.value.size() * sizeof(double)));
  }
  if (!out) throw ConfigError("write failed for " + path);
}

LoadedParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ConfigError(path + ": not a checkpoint file");
  const std::uint64_t mlen = read_u64(in);
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));
  const json manifest = json::parse(mtext);

  LoadedParams lp;
  lp.cfg = config_from_json(manifest);
  lp.bayes = manifest.at("bayes").get<bool>();
  const auto names = manifest.at("names").get<std::vector<std::string>>();
  for (const auto& expect : names) {
    const std::uint32_t nlen = read_u32(in);
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    Tensor t(static_cast<int>(rows), static_cast<int>(cols));
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    if (!in || name != expect) throw ConfigError(path + ": corrupt checkpoint");
    lp.tensors.push_back({std::move(name), std::move(t)});
  }
  return lp;
}

void save_checkpoint(const std::string& path, const Model& m) {
  save_params(path, m.config(), m.params().items, /*bayes=*/false);
}

Model load_checkpoint(const std::string& path) {
  LoadedParams lp = load_params(path);
  if (lp.bayes) throw ConfigError(path + ": bayesian checkpoint, plain model expected");
  const ArchTraits& tr = arch_traits(lp.cfg.arch);
  Model m;
  if (tr.mce) {
    Tensor dp(lp.cfg.vocab_dp, lp.cfg.d_dp);
    Tensor mv(lp.cfg.vocab_mv, lp.cfg.d_mv);
    m = Model::build(lp.cfg, 0, &dp, &mv);
  } else {
    m = Model::build(lp.cfg, 0);
  }
  if (lp.tensors.size() != m.params().size())
    throw ConfigError(path + ": parameter count mismatch");
  for (std::size_t i = 0; i < lp.tensors.size(); ++i) {
    NamedTensor& dst = m.params().items[i];
    if (dst.name != lp.tensors[i].name || !dst.value.same_shape(lp.tensors[i].value))
      throw ConfigError(path + ": parameter layout mismatch at " + dst.name);
    dst.value = lp.tensors[i].value;
  }
  return m;
}

}  // namespace readmit
