#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "readmit/rng.hpp"
#include "readmit/tensor.hpp"

// Reverse-mode automatic differentiation over a flat tape. Each node holds a
// Value (data array plus a gradient array of identical shape) allocated from
// bump arenas that are recycled across tape resets, so building and tearing
// down per-batch graphs costs no heap traffic in steady state.

namespace readmit::ad {

class Tape;

struct Var {
  int i = -1;
  bool valid() const { return i >= 0; }
};

enum class Op : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  emax,
  scalar_mul,
  add_scalar,
  matvec,       // W (m×n) · x (n) -> m
  affine,       // W·x + b
  dot,          // scalar
  sigmoid,
  tanh_,
  exp_,
  log_,
  softplus,
  softmax,
  concat,
  sum,
  mean,
  weighted_sum,  // p0 = weights (n), extras = n value vectors
  select_row,    // row i0 of matrix p0
  dropout,       // aux holds the per-entry multiplier mask
  bce,           // weighted binary cross entropy on a probability (scalar)
  ce_logits,     // softmax cross entropy against class index i0 (scalar)
};

// data/grad views into the tape arenas; shape is rows×cols, row-major.
struct Value {
  int rows = 0;
  int cols = 0;
  double* data = nullptr;
  double* grad = nullptr;
  int size() const { return rows * cols; }
};

struct Node {
  Op op = Op::leaf;
  int p0 = -1, p1 = -1, p2 = -1;
  int ext_off = 0, ext_cnt = 0;  // extra parents (concat, weighted_sum)
  double c0 = 0.0, c1 = 0.0;     // op constants
  int i0 = 0;                    // row / class index
  double* aux = nullptr;         // dropout mask
  Value v;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Discards all nodes; retains arena capacity.
  void reset();

  std::size_t node_count() const { return nodes_.size(); }

  // --- graph construction -------------------------------------------------
  Var leaf(const Tensor& t);
  Var leaf_zeros(int rows, int cols = 1);
  Var constant_scalar(double x);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var emax(Var a, Var b);
  Var scalar_mul(Var a, double c);
  Var add_scalar(Var a, double c);
  Var matvec(Var w, Var x);
  Var affine(Var w, Var x, Var b);
  Var dot(Var a, Var b);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var softplus(Var a);
  Var softmax(Var a);
  Var concat(std::span<const Var> parts);
  Var sum(Var a);
  Var mean(Var a);
  Var weighted_sum(Var weights, std::span<const Var> values);
  Var select_row(Var matrix, int row);
  // Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
  // No-op (returns x) when training is false or p == 0.
  Var dropout(Var x, double p, bool training, RngStream& rng);
  Var weighted_bce(Var pred, double label, double w_pos);
  Var cross_entropy_logits(Var logits, int target);

  // --- access ---------------------------------------------------------------
  const Value& value(Var x) const { return nodes_[x.i].v; }
  double scalar(Var x) const { return nodes_[x.i].v.data[0]; }
  int size(Var x) const { return nodes_[x.i].v.size(); }
  Tensor to_tensor(Var x) const;
  Tensor grad_tensor(Var x) const;

  // Seeds d(root)=1 and accumulates gradients for every node up to root.
  // root must be scalar-valued. Throws NumericError on non-finite values.
  void backward(Var root);

 private:
  class Arena {
   public:
    double* alloc(std::size_t n);
    void reset();
    void zero_used();

   private:
    static constexpr std::size_t kBlock = 1 << 16;
    std::vector<std::vector<double>> blocks_;
    std::vector<std::size_t> used_;
    std::size_t cur_ = 0;
  };

  Var push(Op op, int rows, int cols, int p0 = -1, int p1 = -1, int p2 = -1);
  Node& node(Var x) { return nodes_[x.i]; }
  const Node& node(Var x) const { return nodes_[x.i]; }
  void check_same_shape(Var a, Var b, const char* what) const;

  std::vector<Node> nodes_;
  std::vector<int> ext_;
  Arena data_;
  Arena grad_;
  Arena aux_;
};

// Clamp bounds applied to predictions inside weighted_bce.
inline constexpr double kProbClampLo = 1e-7;
inline constexpr double kProbClampHi = 1.0 - 1e-7;

}  // namespace readmit::ad
