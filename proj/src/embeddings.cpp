#include "readmit/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "readmit/optim.hpp"

namespace readmit {

int embed_dim(int vocab_size) {
  if (vocab_size < 1) throw ConfigError("embed_dim: vocab_size must be >= 1");
  const double d = 2.0 * std::pow(static_cast<double>(vocab_size), 0.25);
  return std::max(2, static_cast<int>(std::lround(d)));
}

int OdeStepPolicy::steps_for(double elapsed) const {
  if (elapsed <= 0.0) return 0;
  const auto n = static_cast<int>(std::llround(elapsed / h_max));
  return std::clamp(n, 1, max_steps);
}

OdeField OdeField::init(int dim, RngStream& rng) {
  OdeField f;
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  auto mat = [&](Tensor& t) {
    t = Tensor(dim, dim);
    for (int i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  };
  mat(f.w1);
  mat(f.w2);
  mat(f.w3);
  mat(f.w4);
  f.b1 = Tensor(dim, 1);
  f.b2 = Tensor(dim, 1);
  f.b3 = Tensor(dim, 1);
  f.b4 = Tensor(dim, 1);
  return f;
}

namespace {

Tensor mlp_layer(const Tensor& w, const Tensor& x, const Tensor& b, bool with_tanh) {
  Tensor y(w.rows, 1);
  for (int r = 0; r < w.rows; ++r) {
    double s = b[r];
    for (int c = 0; c < w.cols; ++c) s += w(r, c) * x[c];
    y[r] = with_tanh ? std::tanh(s) : s;
  }
  return y;
}

}  // namespace

Tensor OdeField::eval(const Tensor& y) const {
  Tensor a = mlp_layer(w1, y, b1, true);
  a = mlp_layer(w2, a, b2, true);
  a = mlp_layer(w3, a, b3, true);
  return mlp_layer(w4, a, b4, false);
}

Tensor evolve_euler(const Tensor& y0, double elapsed,
                    const std::function<Tensor(const Tensor&)>& field, int n_steps) {
  if (elapsed == 0.0) return y0;
  if (elapsed < 0.0) throw ConfigError("evolve_euler: elapsed must be >= 0");
  if (n_steps < 1) throw ConfigError("evolve_euler: n_steps must be >= 1");
  const double h = elapsed / n_steps;
  Tensor y = y0;
  for (int s = 0; s < n_steps; ++s) {
    Tensor f = field(y);
    for (int i = 0; i < y.size(); ++i) {
      y[i] += h * f[i];
      if (!std::isfinite(y[i]))
        throw NumericError("evolve_euler: non-finite state at step " + std::to_string(s));
    }
  }
  return y;
}

Tensor evolve_ode(const Tensor& e0, double elapsed, const OdeField& field, int n_steps) {
  return evolve_euler(e0, elapsed, [&field](const Tensor& y) { return field.eval(y); },
                      n_steps);
}

ad::Var ode_field_eval(ad::Tape& t, const OdeFieldVars& f, ad::Var y) {
  ad::Var a = t.tanh(t.affine(f.w1, y, f.b1));
  a = t.tanh(t.affine(f.w2, a, f.b2));
  a = t.tanh(t.affine(f.w3, a, f.b3));
  return t.affine(f.w4, a, f.b4);
}

ad::Var evolve_ode(ad::Tape& t, ad::Var y0, double elapsed, const OdeFieldVars& field,
                   int n_steps) {
  if (elapsed == 0.0) return y0;
  if (n_steps < 1) throw ConfigError("evolve_ode: n_steps must be >= 1");
  const double h = elapsed / n_steps;
  ad::Var y = y0;
  for (int s = 0; s < n_steps; ++s)
    y = t.add(y, t.scalar_mul(ode_field_eval(t, field, y), h));
  return y;
}

Tensor concat_time(const Tensor& e, double elapsed) {
  Tensor out(e.size() + 1, 1);
  for (int i = 0; i < e.size(); ++i) out[i] = e[i];
  out[e.size()] = elapsed;
  return out;
}

// --- MCE ------------------------------------------------------------------------

int MceModel::bucket_of(double dt) const {
  dt = std::abs(dt);
  if (dt <= 0.0) return 0;
  const int b = cfg.buckets;
  const double r = dt / cfg.window;
  const int idx = b - 1 + static_cast<int>(std::ceil(std::log2(r)));
  return std::clamp(idx, 0, b - 1);
}

MceModel mce_init(int vocab_size, const MceConfig& cfg, std::uint64_t seed) {
  if (vocab_size < 1) throw ConfigError("mce_init: empty vocabulary");
  MceModel m;
  m.cfg = cfg;
  const int d = embed_dim(vocab_size);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  RngStream rng(seed, 0x3CE);
  m.in_table = Tensor(vocab_size, d);
  m.out_table = Tensor(vocab_size, d);
  for (int i = 0; i < m.in_table.size(); ++i) m.in_table[i] = rng.uniform(-bound, bound);
  for (int i = 0; i < m.out_table.size(); ++i) m.out_table[i] = rng.uniform(-bound, bound);
  m.att = Tensor(vocab_size, cfg.buckets);
  return m;
}

namespace {

struct MceExample {
  int target;
  std::vector<int> context;
  std::vector<int> bucket;
};

// attention weights = softmax over context of att[target, bucket(|dt|)]
ad::Var mce_example_hidden(ad::Tape& t, ad::Var in_table, ad::Var att,
                           const MceExample& ex) {
  std::vector<ad::Var> scores;
  std::vector<ad::Var> rows;
  scores.reserve(ex.context.size());
  rows.reserve(ex.context.size());
  ad::Var att_row = t.select_row(att, ex.target);
  const int buckets = t.value(att_row).rows;
  for (std::size_t j = 0; j < ex.context.size(); ++j) {
    Tensor onehot(buckets, 1);
    onehot[ex.bucket[j]] = 1.0;
    scores.push_back(t.dot(att_row, t.leaf(onehot)));
    rows.push_back(t.select_row(in_table, ex.context[j]));
  }
  ad::Var alpha = t.softmax(t.concat(scores));
  return t.weighted_sum(alpha, rows);
}

std::vector<MceExample> mce_examples(const Cohort& cohort, Stream stream, double window,
                                     const MceModel& m,
                                     const std::vector<int>* stay_subset) {
  std::vector<MceExample> out;
  auto add_stay = [&](const StayRecord& s) {
    const auto& ev = stream == Stream::dp ? s.dp_events : s.mv_events;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      MceExample ex;
      ex.target = ev[i].code_id;
      for (std::size_t j = 0; j < ev.size(); ++j) {
        if (j == i) continue;
        const double dt = std::abs(ev[j].elapsed - ev[i].elapsed);
        if (dt > window) continue;
        ex.context.push_back(ev[j].code_id);
        ex.bucket.push_back(m.bucket_of(dt));
      }
      if (!ex.context.empty()) out.push_back(std::move(ex));
    }
  };
  if (stay_subset) {
    for (int idx : *stay_subset) add_stay(cohort.stays[idx]);
  } else {
    for (const auto& s : cohort.stays) add_stay(s);
  }
  return out;
}

}  // namespace

Tensor mce_hidden(const MceModel& m, std::span<const int> context_codes,
                  std::span<const double> context_dt, int target_code) {
  if (context_codes.empty()) throw ConfigError("mce_hidden: empty context");
  MceExample ex;
  ex.target = target_code;
  ex.context.assign(context_codes.begin(), context_codes.end());
  for (double dt : context_dt) ex.bucket.push_back(m.bucket_of(dt));
  ad::Tape t;
  ad::Var in_table = t.leaf(m.in_table);
  ad::Var att = t.leaf(m.att);
  return t.to_tensor(mce_example_hidden(t, in_table, att, ex));
}

void mce_train(MceModel& m, const Cohort& cohort, Stream stream, std::uint64_t seed,
               const std::vector<int>* stay_subset) {
  auto examples = mce_examples(cohort, stream, m.cfg.window, m, stay_subset);
  if (examples.empty()) return;

  AdamState st_in = AdamState::like(m.in_table);
  AdamState st_out = AdamState::like(m.out_table);
  AdamState st_att = AdamState::like(m.att);
  RngStream shuffle_rng(seed, 0x3CE5);
  ad::Tape t;

  std::vector<int> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < m.cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(m.cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(m.cfg.batch_size));
      t.reset();
      ad::Var in_table = t.leaf(m.in_table);
      ad::Var out_table = t.leaf(m.out_table);
      ad::Var att = t.leaf(m.att);
      std::vector<ad::Var> losses;
      losses.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const MceExample& ex = examples[order[i]];
        ad::Var hidden = mce_example_hidden(t, in_table, att, ex);
        ad::Var logits = t.matvec(out_table, hidden);
        losses.push_back(t.cross_entropy_logits(logits, ex.target));
      }
      ad::Var loss = t.mean(t.concat(losses));
      t.backward(loss);
      adam_step(m.in_table, t.grad_tensor(in_table), st_in, m.cfg.lr);
      adam_step(m.out_table, t.grad_tensor(out_table), st_out, m.cfg.lr);
      adam_step(m.att, t.grad_tensor(att), st_att, m.cfg.lr);
    }
  }
}

Tensor mce_pretrain(const Cohort& cohort, Stream stream, const MceConfig& cfg,
                    std::uint64_t seed, const std::vector<int>* stay_subset) {
  const int vocab = cohort.vocab(stream).size();
  MceModel m = mce_init(vocab, cfg, seed);
  mce_train(m, cohort, stream, seed, stay_subset);
  return m.in_table;
}

void write_embedding_csv(const Tensor& table, const Vocabulary& vocab,
                         const std::string& path) {
  if (table.rows != vocab.size()) throw ConfigError("write_embedding_csv: vocab mismatch");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "code";
  for (int j = 0; j < table.cols; ++j) out << ",dim_" << j;
  out << '\n';
  char buf[32];
  for (int i = 0; i < table.rows; ++i) {
    out << vocab.id_to_code[i];
    for (int j = 0; j < table.cols; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", table(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

Tensor read_embedding_csv(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  int cols = -1;
  {
    std::stringstream ss(line);
    std::string tok;
    cols = 0;
    while (std::getline(ss, tok, ',')) ++cols;
    cols -= 1;
  }
  if (cols < 1) throw ConfigError(path + ": no embedding columns");
  Tensor table(vocab.size(), cols);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string code;
    std::getline(ss, code, ',');
    const int id = vocab.id_of(code);
    if (id < 0) throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown code");
    std::string tok;
    for (int j = 0; j < cols; ++j) {
      if (!std::getline(ss, tok, ','))
        throw ConfigError(path + ":" + std::to_string(lineno) + ": short row");
      table(id, j) = std::strtod(tok.c_str(), nullptr);
    }
  }
  return table;
}

}  // namespace readmit
