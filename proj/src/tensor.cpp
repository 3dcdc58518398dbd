#include "sccl/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace sccl {

namespace {
size_t checked_count(int r, int c) {
  if (r < 0 || c < 0) throw std::invalid_argument("Tensor2: negative shape");
  return static_cast<size_t>(r) * static_cast<size_t>(c);
}
}  // namespace

Tensor2::Tensor2(int r, int c, double fill) : rows(r), cols(c), v(checked_count(r, c), fill) {}

Tensor2 Tensor2::from(std::initializer_list<std::initializer_list<double>> init) {
  Tensor2 t(static_cast<int>(init.size()),
            init.size() ? static_cast<int>(init.begin()->size()) : 0);
  int r = 0;
  for (const auto& row : init) {
    if (static_cast<int>(row.size()) != t.cols)
      throw std::invalid_argument("Tensor2::from: ragged rows");
    int c = 0;
    for (double x : row) t.at(r, c++) = x;
    ++r;
  }
  return t;
}

bool Tensor2::all_finite() const {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

std::string Tensor2::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

Tensor2 SparseRows::to_dense() const {
  Tensor2 d(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (auto [c, x] : entries[r]) d.at(r, c) += x;
  return d;
}

namespace lin {

namespace {
void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("dimension error: " + what);
}
}  // namespace

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  require(a.cols == b.rows, "matmul " + a.shape_str() + " * " + b.shape_str());
  Tensor2 c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (int k = 0; k < a.cols; ++k) {
      double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k);
      for (int j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  require(a.cols == b.cols, "matmul_nt " + a.shape_str() + " * " + b.shape_str() + "^T");
  Tensor2 c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
      c.at(i, j) = s;
    }
  }
  return c;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  require(a.rows == b.rows, "matmul_tn " + a.shape_str() + "^T * " + b.shape_str());
  Tensor2 c(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const double* ak = a.row(k);
    const double* bk = b.row(k);
    for (int i = 0; i < a.cols; ++i) {
      double aki = ak[i];
      if (aki == 0.0) continue;
      double* ci = c.row(i);
      for (int j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Tensor2 sparse_matmul(const SparseRows& x, const Tensor2& w) {
  require(x.cols == w.rows, "sparse_matmul " + std::to_string(x.cols) + " vs " + w.shape_str());
  Tensor2 y(x.rows, w.cols);
  for (int r = 0; r < x.rows; ++r) {
    double* yr = y.row(r);
    for (auto [i, val] : x.entries[r]) {
      const double* wi = w.row(i);
      for (int j = 0; j < w.cols; ++j) yr[j] += val * wi[j];
    }
  }
  return y;
}

void add_bias_inplace(Tensor2& x, const Tensor2& bias) {
  require(bias.rows == 1 && bias.cols == x.cols,
          "add_bias " + x.shape_str() + " + " + bias.shape_str());
  for (int r = 0; r < x.rows; ++r) {
    double* xr = x.row(r);
    for (int c = 0; c < x.cols; ++c) xr[c] += bias.v[c];
  }
}

Tensor2 relu(const Tensor2& x) {
  Tensor2 y = x;
  for (double& e : y.v)
    if (e < 0.0) e = 0.0;
  return y;
}

double row_norm(const Tensor2& x, int r) {
  double s = 0.0;
  const double* xr = x.row(r);
  for (int c = 0; c < x.cols; ++c) s += xr[c] * xr[c];
  return std::sqrt(s);
}

Tensor2 l2_normalize_rows(const Tensor2& x, double eps) {
  Tensor2 y = x;
  for (int r = 0; r < x.rows; ++r) {
    double n = std::max(row_norm(x, r), eps);
    double* yr = y.row(r);
    for (int c = 0; c < x.cols; ++c) yr[c] /= n;
  }
  return y;
}

Tensor2 softmax_rows(const Tensor2& x) {
  Tensor2 y(x.rows, x.cols);
  for (int r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double* yr = y.row(r);
    double m = xr[0];
    for (int c = 1; c < x.cols; ++c) m = std::max(m, xr[c]);
    double s = 0.0;
    for (int c = 0; c < x.cols; ++c) {
      yr[c] = std::exp(xr[c] - m);
      s += yr[c];
    }
    for (int c = 0; c < x.cols; ++c) yr[c] /= s;
  }
  return y;
}

Tensor2 logsumexp_rows(const Tensor2& x) {
  Tensor2 y(x.rows, 1);
  for (int r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double m = xr[0];
    for (int c = 1; c < x.cols; ++c) m = std::max(m, xr[c]);
    double s = 0.0;
    for (int c = 0; c < x.cols; ++c) s += std::exp(xr[c] - m);
    y.at(r, 0) = m + std::log(s);
  }
  return y;
}

double sum(const Tensor2& x) {
  double s = 0.0;
  for (double e : x.v) s += e;
  return s;
}

}  // namespace lin

}  // namespace sccl
