#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace sccl {

// Dense row-major matrix of doubles. The only tensor rank the library needs;
// row vectors are 1xN, column vectors Nx1, scalars 1x1.
struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor2() = default;
  Tensor2(int r, int c, double fill = 0.0);
  static Tensor2 from(std::initializer_list<std::initializer_list<double>> init);
  static Tensor2 scalar(double x) { return Tensor2(1, 1, x); }

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }

  int64_t size() const { return static_cast<int64_t>(rows) * cols; }
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
  std::string shape_str() const;
};

// Sparse batch of row vectors, used for hashed text features. Column indices
// within a row are unique and sorted.
struct SparseRows {
  int rows = 0;
  int cols = 0;
  std::vector<std::vector<std::pair<int, double>>> entries;

  Tensor2 to_dense() const;
};

namespace lin {

Tensor2 matmul(const Tensor2& a, const Tensor2& b);     // a(m,k) * b(k,n)
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);  // a(m,k) * b(n,k)^T
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);  // a(k,m)^T * b(k,n)
Tensor2 transpose(const Tensor2& a);
Tensor2 sparse_matmul(const SparseRows& x, const Tensor2& w);

void add_bias_inplace(Tensor2& x, const Tensor2& bias);  // bias is 1xC
Tensor2 relu(const Tensor2& x);
Tensor2 l2_normalize_rows(const Tensor2& x, double eps = 1e-12);
Tensor2 softmax_rows(const Tensor2& x);     // row-max subtracted before exp
Tensor2 logsumexp_rows(const Tensor2& x);   // -> Bx1
double sum(const Tensor2& x);
double row_norm(const Tensor2& x, int r);

}  // namespace lin

}  // namespace sccl
