#pragma once

#include <cassert>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace readmit {

// Dense double-precision array, rank <= 2. Vectors are stored as n x 1,
// scalars as 1 x 1. Row-major.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

  static Tensor zeros(int r, int c = 1) { return Tensor(r, c); }
  static Tensor scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return t;
  }
  static Tensor vec(std::initializer_list<double> xs) {
    Tensor t(static_cast<int>(xs.size()), 1);
    int i = 0;
    for (double x : xs) t.v[i++] = x;
    return t;
  }
  static Tensor vec(const std::vector<double>& xs) {
    Tensor t(static_cast<int>(xs.size()), 1);
    t.v.assign(xs.begin(), xs.end());
    return t;
  }

  int size() const { return rows * cols; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

// Thrown on malformed configuration or mismatched shapes/inputs.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a computation produces non-finite values; message carries the
// location (op, step, epoch/batch) where the blow-up was detected.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace readmit
