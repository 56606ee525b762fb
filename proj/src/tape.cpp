#include "readmit/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "readmit/kernels.hpp"

namespace readmit::ad {

namespace k = readmit::kernels;

// --- arena -------------------------------------------------------------------

double* Tape::Arena::alloc(std::size_t n) {
  if (blocks_.empty()) {
    blocks_.emplace_back(std::max(kBlock, n));
    used_.push_back(0);
    cur_ = 0;
  }
  while (used_[cur_] + n > blocks_[cur_].size()) {
    ++cur_;
    if (cur_ == blocks_.size()) {
      blocks_.emplace_back(std::max(kBlock, n));
      used_.push_back(0);
    }
  }
  double* p = blocks_[cur_].data() + used_[cur_];
  used_[cur_] += n;
  return p;
}

void Tape::Arena::reset() {
  for (auto& u : used_) u = 0;
  cur_ = 0;
}

void Tape::Arena::zero_used() {
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    if (used_[b] > 0) std::memset(blocks_[b].data(), 0, used_[b] * sizeof(double));
}

// --- construction --------------------------------------------------------------

void Tape::reset() {
  nodes_.clear();
  ext_.clear();
  data_.reset();
  grad_.reset();
  aux_.reset();
}

Var Tape::push(Op op, int rows, int cols, int p0, int p1, int p2) {
  Node n;
  n.op = op;
  n.p0 = p0;
  n.p1 = p1;
  n.p2 = p2;
  n.v.rows = rows;
  n.v.cols = cols;
  const std::size_t sz = static_cast<std::size_t>(rows) * cols;
  n.v.data = data_.alloc(sz);
  n.v.grad = grad_.alloc(sz);
  nodes_.push_back(n);
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check_same_shape(Var a, Var b, const char* what) const {
  const Value va = nodes_[a.i].v;
  const Value vb = nodes_[b.i].v;
  if (va.rows != vb.rows || va.cols != vb.cols)
    throw ConfigError(std::string(what) + ": shape mismatch");
}

Var Tape::leaf(const Tensor& t) {
  Var x = push(Op::leaf, t.rows, t.cols);
  std::memcpy(node(x).v.data, t.data(), t.v.size() * sizeof(double));
  return x;
}

Var Tape::leaf_zeros(int rows, int cols) {
  Var x = push(Op::leaf, rows, cols);
  std::memset(node(x).v.data, 0, static_cast<std::size_t>(rows) * cols * sizeof(double));
  return x;
}

Var Tape::constant_scalar(double v) {
  Var x = push(Op::leaf, 1, 1);
  node(x).v.data[0] = v;
  return x;
}

Var Tape::add(Var a, Var b) {
  check_same_shape(a, b, "add");
  const Value va = node(a).v;
  Var y = push(Op::add, va.rows, va.cols, a.i, b.i);
  k::vadd(va.size(), va.data, node(b).v.data, node(y).v.data);
  return y;
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  const Value va = node(a).v;
  Var y = push(Op::sub, va.rows, va.cols, a.i, b.i);
  const double* pb = node(b).v.data;
  double* out = node(y).v.data;
  for (int i = 0; i < va.size(); ++i) out[i] = va.data[i] - pb[i];
  return y;
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  const Value va = node(a).v;
  Var y = push(Op::mul, va.rows, va.cols, a.i, b.i);
  k::vmul(va.size(), va.data, node(b).v.data, node(y).v.data);
  return y;
}

Var Tape::emax(Var a, Var b) {
  check_same_shape(a, b, "emax");
  const Value va = node(a).v;
  Var y = push(Op::emax, va.rows, va.cols, a.i, b.i);
  const double* pb = node(b).v.data;
  double* out = node(y).v.data;
  for (int i = 0; i < va.size(); ++i) out[i] = std::max(va.data[i], pb[i]);
  return y;
}

Var Tape::scalar_mul(Var a, double c) {
  const Value va = node(a).v;
  Var y = push(Op::scalar_mul, va.rows, va.cols, a.i);
  node(y).c0 = c;
  double* out = node(y).v.data;
  for (int i = 0; i < va.size(); ++i) out[i] = c * va.data[i];
  return y;
}

Var Tape::add_scalar(Var a, double c) {
  const Value va = node(a).v;
  Var y = push(Op::add_scalar, va.rows, va.cols, a.i);
  node(y).c0 = c;
  double* out = node(y).v.data;
  for (int i = 0; i < va.size(); ++i) out[i] = va.data[i] + c;
  return y;
}

Var Tape::matvec(Var w, Var x) {
  const Value vw = node(w).v;
  const Value vx = node(x).v;
  if (vw.cols != vx.rows || vx.cols != 1)
    throw ConfigError("matvec: shape mismatch");
  Var y = push(Op::matvec, vw.rows, 1, w.i, x.i);
  std::memset(node(y).v.data, 0, vw.rows * sizeof(double));
  k::gemv(vw.rows, vw.cols, vw.data, vx.data, node(y).v.data);
  return y;
}

Var Tape::affine(Var w, Var x, Var b) {
  const Value vw = node(w).v;
  const Value vx = node(x).v;
  const Value vb = node(b).v;
  if (vw.cols != vx.rows || vx.cols != 1 || vb.rows != vw.rows || vb.cols != 1)
    throw ConfigError("affine: shape mismatch");
  Var y = push(Op::affine, vw.rows, 1, w.i, x.i, b.i);
  std::memcpy(node(y).v.data, vb.data, vw.rows * sizeof(double));
  k::gemv(vw.rows, vw.cols, vw.data, vx.data, node(y).v.data);
  return y;
}

Var Tape::dot(Var a, Var b) {
  check_same_shape(a, b, "dot");
  const Value va = node(a).v;
  Var y = push(Op::dot, 1, 1, a.i, b.i);
  node(y).v.data[0] = k::dot(va.size(), va.data, node(b).v.data);
  return y;
}

Var Tape::sigmoid(Var a) {
  const Value va = node(a).v;
  Var y = push(Op::sigmoid, va.rows, va.cols, a.i);
  double* out = node(y).v.data;
  for (int i = 0; i < va.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-va.data[i]));
  return y;
}

Var Tape::tanh(Var a) {
  const Value va = node(a).v;
  Var y = push(Op::tanh_, va.rows, va.cols, a.i);
  double* out = node(y).v.data;
  for (int i = 0; i < va.size(); ++i) out[i] = std::tanh(va.data[i]);
  return y;
}

Var Tape::exp(Var a) {
  const Value va = node(a).v;
  Var y = push(Op::exp_, va.rows, va.cols, a.i);
  double* out = node(y).v.data;
  for (int i = 0; i < va.size(); ++i) out[i] = std::exp(va.data[i]);
  return y;
}

Var Tape::log(Var a) {
  const Value va = node(a).v;
  Var y = push(Op::log_, va.rows, va.cols, a.i);
  double* out = node(y).v.data;
  for (int i = 0; i < va.size(); ++i) out[i] = std::log(va.data[i]);
  return y;
}

Var Tape::softplus(Var a) {
  const Value va = node(a).v;
  Var y = push(Op::softplus, va.rows, va.cols, a.i);
  double* out = node(y).v.data;
  for (int i = 0; i < va.size(); ++i) {
    const double x = va.data[i];
    // ln(1+e^x), overflow-safe on both tails
    out[i] = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }
  return y;
}

Var Tape::softmax(Var a) {
  const Value va = node(a).v;
  if (va.cols != 1) throw ConfigError("softmax: expects a vector");
  Var y = push(Op::softmax, va.rows, 1, a.i);
  double* out = node(y).v.data;
  double m = va.data[0];
  for (int i = 1; i < va.rows; ++i) m = std::max(m, va.data[i]);
  double z = 0.0;
  for (int i = 0; i < va.rows; ++i) {
    out[i] = std::exp(va.data[i] - m);
    z += out[i];
  }
  const double inv = 1.0 / z;
  for (int i = 0; i < va.rows; ++i) out[i] *= inv;
  return y;
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("concat: empty");
  int total = 0;
  for (Var p : parts) {
    if (node(p).v.cols != 1) throw ConfigError("concat: expects vectors");
    total += node(p).v.rows;
  }
  Var y = push(Op::concat, total, 1);
  Node& ny = node(y);
  ny.ext_off = static_cast<int>(ext_.size());
  ny.ext_cnt = static_cast<int>(parts.size());
  for (Var p : parts) ext_.push_back(p.i);
  double* out = ny.v.data;
  for (Var p : parts) {
    const Value vp = node(p).v;
    std::memcpy(out, vp.data, vp.size() * sizeof(double));
    out += vp.size();
  }
  return y;
}

Var Tape::sum(Var a) {
  const Value va = node(a).v;
  Var y = push(Op::sum, 1, 1, a.i);
  double s = 0.0;
  for (int i = 0; i < va.size(); ++i) s += va.data[i];
  node(y).v.data[0] = s;
  return y;
}

Var Tape::mean(Var a) {
  const Value va = node(a).v;
  Var y = push(Op::mean, 1, 1, a.i);
  double s = 0.0;
  for (int i = 0; i < va.size(); ++i) s += va.data[i];
  node(y).v.data[0] = s / va.size();
  return y;
}

Var Tape::weighted_sum(Var weights, std::span<const Var> values) {
  const Value vw = node(weights).v;
  if (vw.cols != 1 || vw.rows != static_cast<int>(values.size()))
    throw ConfigError("weighted_sum: weight count mismatch");
  const Value v0 = node(values[0]).v;
  Var y = push(Op::weighted_sum, v0.rows, 1, weights.i);
  Node& ny = node(y);
  ny.ext_off = static_cast<int>(ext_.size());
  ny.ext_cnt = static_cast<int>(values.size());
  for (Var v : values) ext_.push_back(v.i);
  std::memset(ny.v.data, 0, v0.rows * sizeof(double));
  for (std::size_t j = 0; j < values.size(); ++j)
    k::axpy(v0.rows, vw.data[j], node(values[j]).v.data, ny.v.data);
  return y;
}

Var Tape::select_row(Var matrix, int row) {
  const Value vm = node(matrix).v;
  if (row < 0 || row >= vm.rows) throw ConfigError("select_row: index out of range");
  Var y = push(Op::select_row, vm.cols, 1, matrix.i);
  node(y).i0 = row;
  std::memcpy(node(y).v.data, vm.data + static_cast<std::size_t>(row) * vm.cols,
              vm.cols * sizeof(double));
  return y;
}

Var Tape::dropout(Var x, double p, bool training, RngStream& rng) {
  if (p >= 1.0 || p < 0.0) throw ConfigError("dropout: probability must be in [0, 1)");
  if (!training || p == 0.0) return x;
  const Value vx = node(x).v;
  Var y = push(Op::dropout, vx.rows, vx.cols, x.i);
  Node& ny = node(y);
  ny.aux = aux_.alloc(vx.size());
  const double keep_scale = 1.0 / (1.0 - p);
  for (int i = 0; i < vx.size(); ++i)
    ny.aux[i] = rng.uniform01() < p ? 0.0 : keep_scale;
  k::vmul(vx.size(), vx.data, ny.aux, ny.v.data);
  return y;
}

Var Tape::weighted_bce(Var pred, double label, double w_pos) {
  const Value vp = node(pred).v;
  if (vp.size() != 1) throw ConfigError("weighted_bce: expects a scalar prediction");
  Var y = push(Op::bce, 1, 1, pred.i);
  Node& ny = node(y);
  ny.c0 = label;
  ny.c1 = w_pos;
  const double p = std::clamp(vp.data[0], kProbClampLo, kProbClampHi);
  ny.v.data[0] = -(w_pos * label * std::log(p) + (1.0 - label) * std::log1p(-p));
  return y;
}

Var Tape::cross_entropy_logits(Var logits, int target) {
  const Value vl = node(logits).v;
  if (vl.cols != 1 || target < 0 || target >= vl.rows)
    throw ConfigError("cross_entropy_logits: bad target");
  Var y = push(Op::ce_logits, 1, 1, logits.i);
  node(y).i0 = target;
  double m = vl.data[0];
  for (int i = 1; i < vl.rows; ++i) m = std::max(m, vl.data[i]);
  double z = 0.0;
  for (int i = 0; i < vl.rows; ++i) z += std::exp(vl.data[i] - m);
  node(y).v.data[0] = m + std::log(z) - vl.data[target];
  return y;
}

Tensor Tape::to_tensor(Var x) const {
  const Value v = nodes_[x.i].v;
  Tensor t(v.rows, v.cols);
  std::memcpy(t.data(), v.data, v.size() * sizeof(double));
  return t;
}

Tensor Tape::grad_tensor(Var x) const {
  const Value v = nodes_[x.i].v;
  Tensor t(v.rows, v.cols);
  std::memcpy(t.data(), v.grad, v.size() * sizeof(double));
  return t;
}

// --- backward -------------------------------------------------------------------

void Tape::backward(Var root) {
  if (!root.valid() || node(root).v.size() != 1)
    throw ConfigError("backward: root must be a scalar");
  if (!std::isfinite(node(root).v.data[0]))
    throw NumericError("backward: non-finite root value");

  grad_.zero_used();
  node(root).v.grad[0] = 1.0;

  for (int i = root.i; i >= 0; --i) {
    Node& n = nodes_[i];
    const double* g = n.v.grad;
    const int sz = n.v.size();
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::add: {
        k::axpy(sz, 1.0, g, nodes_[n.p0].v.grad);
        k::axpy(sz, 1.0, g, nodes_[n.p1].v.grad);
        break;
      }
      case Op::sub: {
        k::axpy(sz, 1.0, g, nodes_[n.p0].v.grad);
        k::axpy(sz, -1.0, g, nodes_[n.p1].v.grad);
        break;
      }
      case Op::mul: {
        k::vfma(sz, g, nodes_[n.p1].v.data, nodes_[n.p0].v.grad);
        k::vfma(sz, g, nodes_[n.p0].v.data, nodes_[n.p1].v.grad);
        break;
      }
      case Op::emax: {
        const double* a = nodes_[n.p0].v.data;
        const double* b = nodes_[n.p1].v.data;
        double* ga = nodes_[n.p0].v.grad;
        double* gb = nodes_[n.p1].v.grad;
        for (int j = 0; j < sz; ++j) {
          if (a[j] >= b[j])
            ga[j] += g[j];
          else
            gb[j] += g[j];
        }
        break;
      }
      case Op::scalar_mul:
        k::axpy(sz, n.c0, g, nodes_[n.p0].v.grad);
        break;
      case Op::add_scalar:
        k::axpy(sz, 1.0, g, nodes_[n.p0].v.grad);
        break;
      case Op::matvec: {
        const Value& vw = nodes_[n.p0].v;
        const Value& vx = nodes_[n.p1].v;
        k::ger(vw.rows, vw.cols, 1.0, g, vx.data, nodes_[n.p0].v.grad);
        k::gemv_t(vw.rows, vw.cols, vw.data, g, nodes_[n.p1].v.grad);
        break;
      }
      case Op::affine: {
        const Value& vw = nodes_[n.p0].v;
        const Value& vx = nodes_[n.p1].v;
        k::ger(vw.rows, vw.cols, 1.0, g, vx.data, nodes_[n.p0].v.grad);
        k::gemv_t(vw.rows, vw.cols, vw.data, g, nodes_[n.p1].v.grad);
        k::axpy(vw.rows, 1.0, g, nodes_[n.p2].v.grad);
        break;
      }
      case Op::dot: {
        const double gs = g[0];
        k::axpy(nodes_[n.p0].v.size(), gs, nodes_[n.p1].v.data, nodes_[n.p0].v.grad);
        k::axpy(nodes_[n.p0].v.size(), gs, nodes_[n.p0].v.data, nodes_[n.p1].v.grad);
        break;
      }
      case Op::sigmoid: {
        const double* y = n.v.data;
        double* gp = nodes_[n.p0].v.grad;
        for (int j = 0; j < sz; ++j) gp[j] += g[j] * y[j] * (1.0 - y[j]);
        break;
      }
      case Op::tanh_: {
        const double* y = n.v.data;
        double* gp = nodes_[n.p0].v.grad;
        for (int j = 0; j < sz; ++j) gp[j] += g[j] * (1.0 - y[j] * y[j]);
        break;
      }
      case Op::exp_:
        k::vfma(sz, g, n.v.data, nodes_[n.p0].v.grad);
        break;
      case Op::log_: {
        const double* x = nodes_[n.p0].v.data;
        double* gp = nodes_[n.p0].v.grad;
        for (int j = 0; j < sz; ++j) gp[j] += g[j] / x[j];
        break;
      }
      case Op::softplus: {
        const double* x = nodes_[n.p0].v.data;
        double* gp = nodes_[n.p0].v.grad;
        for (int j = 0; j < sz; ++j) gp[j] += g[j] / (1.0 + std::exp(-x[j]));
        break;
      }
      case Op::softmax: {
        const double* y = n.v.data;
        double* gp = nodes_[n.p0].v.grad;
        const double gy = k::dot(sz, g, y);
        for (int j = 0; j < sz; ++j) gp[j] += y[j] * (g[j] - gy);
        break;
      }
      case Op::concat: {
        const double* gp = g;
        for (int e = 0; e < n.ext_cnt; ++e) {
          Value& vp = nodes_[ext_[n.ext_off + e]].v;
          k::axpy(vp.size(), 1.0, gp, vp.grad);
          gp += vp.size();
        }
        break;
      }
      case Op::sum: {
        const double gs = g[0];
        Value& vp = nodes_[n.p0].v;
        for (int j = 0; j < vp.size(); ++j) vp.grad[j] += gs;
        break;
      }
      case Op::mean: {
        Value& vp = nodes_[n.p0].v;
        const double gs = g[0] / vp.size();
        for (int j = 0; j < vp.size(); ++j) vp.grad[j] += gs;
        break;
      }
      case Op::weighted_sum: {
        Value& vw = nodes_[n.p0].v;
        for (int e = 0; e < n.ext_cnt; ++e) {
          Value& vv = nodes_[ext_[n.ext_off + e]].v;
          vw.grad[e] += k::dot(sz, g, vv.data);
          k::axpy(sz, vw.data[e], g, vv.grad);
        }
        break;
      }
      case Op::select_row: {
        Value& vm = nodes_[n.p0].v;
        k::axpy(vm.cols, 1.0, g, vm.grad + static_cast<std::size_t>(n.i0) * vm.cols);
        break;
      }
      case Op::dropout:
        k::vfma(sz, g, n.aux, nodes_[n.p0].v.grad);
        break;
      case Op::bce: {
        const double p = std::clamp(nodes_[n.p0].v.data[0], kProbClampLo, kProbClampHi);
        const double y = n.c0, w = n.c1;
        nodes_[n.p0].v.grad[0] += g[0] * (-w * y / p + (1.0 - y) / (1.0 - p));
        break;
      }
      case Op::ce_logits: {
        const Value& vl = nodes_[n.p0].v;
        double m = vl.data[0];
        for (int j = 1; j < vl.rows; ++j) m = std::max(m, vl.data[j]);
        double z = 0.0;
        for (int j = 0; j < vl.rows; ++j) z += std::exp(vl.data[j] - m);
        const double gs = g[0];
        for (int j = 0; j < vl.rows; ++j) {
          double soft = std::exp(vl.data[j] - m) / z;
          vl.grad[j] += gs * (soft - (j == n.i0 ? 1.0 : 0.0));
        }
        break;
      }
    }
  }
}

}  // namespace readmit::ad
