#include "sccl/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace sccl {

void Tape::check(Var v) const {
  if (!v.valid() || v.idx >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("Tape: var does not belong to this tape");
}

Var Tape::push(Tensor2 value, bool requires_grad, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.back = requires_grad ? std::move(back) : nullptr;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor2& Tape::grad_buf(int idx) {
  Node& n = nodes_[idx];
  if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols)
    n.grad = Tensor2(n.value.rows, n.value.cols);
  return n.grad;
}

const Tensor2& Tape::grad(Var v) const {
  check(v);
  const Node& n = nodes_[v.idx];
  if (n.grad.size() != n.value.size())
    throw std::logic_error("Tape::grad: no gradient accumulated for this var");
  return n.grad;
}

bool Tape::has_grad(Var v) const {
  check(v);
  const Node& n = nodes_[v.idx];
  return n.grad.size() == n.value.size();
}

double Tape::scalar(Var v) const {
  check(v);
  const Tensor2& t = nodes_[v.idx].value;
  if (t.rows != 1 || t.cols != 1)
    throw std::invalid_argument("Tape::scalar: value is " + t.shape_str() + ", want 1x1");
  return t.v[0];
}

Var Tape::leaf(Tensor2 value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

// Each op captures its input indices plus `yi`, the index the new node will
// occupy (nodes_.size() at record time). Gradients accumulate with += so a
// var used twice receives contributions from both consumers.

Var Tape::matmul(Var a, Var b) {
  check(a); check(b);
  Tensor2 out = lin::matmul(value(a), value(b));
  bool rg = requires_grad(a) || requires_grad(b);
  int ai = a.idx, bi = b.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [ai, bi, yi](Tape& t) {
    const Tensor2& g = t.nodes_[yi].grad;
    if (t.nodes_[ai].requires_grad) {
      Tensor2 da = lin::matmul_nt(g, t.nodes_[bi].value);  // g * b^T
      Tensor2& acc = t.grad_buf(ai);
      for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += da.v[i];
    }
    if (t.nodes_[bi].requires_grad) {
      Tensor2 db = lin::matmul_tn(t.nodes_[ai].value, g);  // a^T * g
      Tensor2& acc = t.grad_buf(bi);
      for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += db.v[i];
    }
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  check(a); check(b);
  Tensor2 out = lin::matmul_nt(value(a), value(b));
  bool rg = requires_grad(a) || requires_grad(b);
  int ai = a.idx, bi = b.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [ai, bi, yi](Tape& t) {
    const Tensor2& g = t.nodes_[yi].grad;  // (m,n), y = a * b^T
    if (t.nodes_[ai].requires_grad) {
      Tensor2 da = lin::matmul(g, t.nodes_[bi].value);  // g * b
      Tensor2& acc = t.grad_buf(ai);
      for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += da.v[i];
    }
    if (t.nodes_[bi].requires_grad) {
      Tensor2 db = lin::matmul_tn(g, t.nodes_[ai].value);  // g^T * a
      Tensor2& acc = t.grad_buf(bi);
      for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += db.v[i];
    }
  });
}

Var Tape::transpose(Var a) {
  check(a);
  Tensor2 out = lin::transpose(value(a));
  int ai = a.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), requires_grad(a), [ai, yi](Tape& t) {
    if (!t.nodes_[ai].requires_grad) return;
    Tensor2 da = lin::transpose(t.nodes_[yi].grad);
    Tensor2& acc = t.grad_buf(ai);
    for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += da.v[i];
  });
}

Var Tape::sparse_matmul(const SparseRows& x, Var w) {
  check(w);
  Tensor2 out = lin::sparse_matmul(x, value(w));
  int wi = w.idx, yi = static_cast<int>(nodes_.size());
  // the sparse input is copied into the closure; it is a constant leaf
  return push(std::move(out), requires_grad(w), [x, wi, yi](Tape& t) {
    if (!t.nodes_[wi].requires_grad) return;
    const Tensor2& g = t.nodes_[yi].grad;
    Tensor2& dw = t.grad_buf(wi);
    for (int r = 0; r < x.rows; ++r) {
      const double* gr = g.row(r);
      for (auto [i, val] : x.entries[r]) {
        double* dwi = dw.row(i);
        for (int j = 0; j < g.cols; ++j) dwi[j] += val * gr[j];
      }
    }
  });
}

Var Tape::add(Var a, Var b) {
  check(a); check(b);
  const Tensor2& av = value(a);
  const Tensor2& bv = value(b);
  if (!av.same_shape(bv))
    throw std::invalid_argument("dimension error: add " + av.shape_str() + " + " + bv.shape_str());
  Tensor2 out = av;
  for (int64_t i = 0; i < out.size(); ++i) out.v[i] += bv.v[i];
  bool rg = requires_grad(a) || requires_grad(b);
  int ai = a.idx, bi = b.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [ai, bi, yi](Tape& t) {
    const Tensor2& g = t.nodes_[yi].grad;
    for (int src : {ai, bi}) {
      if (!t.nodes_[src].requires_grad) continue;
      Tensor2& acc = t.grad_buf(src);
      for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += g.v[i];
    }
  });
}

Var Tape::add_bias(Var x, Var bias) {
  check(x); check(bias);
  Tensor2 out = value(x);
  lin::add_bias_inplace(out, value(bias));
  bool rg = requires_grad(x) || requires_grad(bias);
  int xi = x.idx, bi = bias.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [xi, bi, yi](Tape& t) {
    const Tensor2& g = t.nodes_[yi].grad;
    if (t.nodes_[xi].requires_grad) {
      Tensor2& acc = t.grad_buf(xi);
      for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += g.v[i];
    }
    if (t.nodes_[bi].requires_grad) {
      Tensor2& acc = t.grad_buf(bi);
      for (int r = 0; r < g.rows; ++r) {
        const double* gr = g.row(r);
        for (int c = 0; c < g.cols; ++c) acc.v[c] += gr[c];
      }
    }
  });
}

Var Tape::add_colvec(Var x, Var colvec) {
  check(x); check(colvec);
  const Tensor2& xv = value(x);
  const Tensor2& cv = value(colvec);
  if (cv.cols != 1 || cv.rows != xv.rows)
    throw std::invalid_argument("dimension error: add_colvec " + xv.shape_str() + " + " + cv.shape_str());
  Tensor2 out = xv;
  for (int r = 0; r < out.rows; ++r) {
    double* orow = out.row(r);
    for (int c = 0; c < out.cols; ++c) orow[c] += cv.v[r];
  }
  bool rg = requires_grad(x) || requires_grad(colvec);
  int xi = x.idx, ci = colvec.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), rg, [xi, ci, yi](Tape& t) {
    const Tensor2& g = t.nodes_[yi].grad;
    if (t.nodes_[xi].requires_grad) {
      Tensor2& acc = t.grad_buf(xi);
      for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += g.v[i];
    }
    if (t.nodes_[ci].requires_grad) {
      Tensor2& acc = t.grad_buf(ci);
      for (int r = 0; r < g.rows; ++r) {
        const double* gr = g.row(r);
        double s = 0.0;
        for (int c = 0; c < g.cols; ++c) s += gr[c];
        acc.v[r] += s;
      }
    }
  });
}

Var Tape::add_const(Var x, const Tensor2& c) {
  check(x);
  const Tensor2& xv = value(x);
  if (!xv.same_shape(c))
    throw std::invalid_argument("dimension error: add_const " + xv.shape_str() + " + " + c.shape_str());
  Tensor2 out = xv;
  for (int64_t i = 0; i < out.size(); ++i) out.v[i] += c.v[i];
  int xi = x.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), requires_grad(x), [xi, yi](Tape& t) {
    if (!t.nodes_[xi].requires_grad) return;
    const Tensor2& g = t.nodes_[yi].grad;
    Tensor2& acc = t.grad_buf(xi);
    for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += g.v[i];
  });
}

Var Tape::mul_const(Var x, const Tensor2& c) {
  check(x);
  const Tensor2& xv = value(x);
  if (!xv.same_shape(c))
    throw std::invalid_argument("dimension error: mul_const " + xv.shape_str() + " * " + c.shape_str());
  Tensor2 out = xv;
  for (int64_t i = 0; i < out.size(); ++i) out.v[i] *= c.v[i];
  int xi = x.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), requires_grad(x), [xi, yi, c](Tape& t) {
    if (!t.nodes_[xi].requires_grad) return;
    const Tensor2& g = t.nodes_[yi].grad;
    Tensor2& acc = t.grad_buf(xi);
    for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += g.v[i] * c.v[i];
  });
}

Var Tape::relu(Var x) {
  check(x);
  Tensor2 out = lin::relu(value(x));
  int xi = x.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), requires_grad(x), [xi, yi](Tape& t) {
    if (!t.nodes_[xi].requires_grad) return;
    const Tensor2& g = t.nodes_[yi].grad;
    const Tensor2& xv = t.nodes_[xi].value;
    Tensor2& acc = t.grad_buf(xi);
    for (int64_t i = 0; i < acc.size(); ++i)
      if (xv.v[i] > 0.0) acc.v[i] += g.v[i];
  });
}

Var Tape::l2_normalize_rows(Var x) {
  check(x);
  constexpr double kEps = 1e-12;
  Tensor2 out = lin::l2_normalize_rows(value(x), kEps);
  int xi = x.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), requires_grad(x), [xi, yi](Tape& t) {
    if (!t.nodes_[xi].requires_grad) return;
    const Tensor2& g = t.nodes_[yi].grad;
    const Tensor2& xv = t.nodes_[xi].value;
    const Tensor2& yv = t.nodes_[yi].value;
    Tensor2& acc = t.grad_buf(xi);
    for (int r = 0; r < xv.rows; ++r) {
      double n = lin::row_norm(xv, r);
      const double* gr = g.row(r);
      const double* yr = yv.row(r);
      double* ar = acc.row(r);
      if (n >= kEps) {
        // dx = (g - y (y.g)) / ||x||, the row Jacobian (I - yy^T)/||x||
        double yg = 0.0;
        for (int c = 0; c < xv.cols; ++c) yg += yr[c] * gr[c];
        for (int c = 0; c < xv.cols; ++c) ar[c] += (gr[c] - yr[c] * yg) / n;
      } else {
        // below the guard the map is linear: y = x / eps
        for (int c = 0; c < xv.cols; ++c) ar[c] += gr[c] / kEps;
      }
    }
  });
}

Var Tape::scale(Var x, double s) {
  check(x);
  Tensor2 out = value(x);
  for (double& e : out.v) e *= s;
  int xi = x.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), requires_grad(x), [xi, yi, s](Tape& t) {
    if (!t.nodes_[xi].requires_grad) return;
    const Tensor2& g = t.nodes_[yi].grad;
    Tensor2& acc = t.grad_buf(xi);
    for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += g.v[i] * s;
  });
}

Var Tape::exp(Var x) {
  check(x);
  Tensor2 out = value(x);
  for (double& e : out.v) e = std::exp(e);
  int xi = x.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), requires_grad(x), [xi, yi](Tape& t) {
    if (!t.nodes_[xi].requires_grad) return;
    const Tensor2& g = t.nodes_[yi].grad;
    const Tensor2& yv = t.nodes_[yi].value;
    Tensor2& acc = t.grad_buf(xi);
    for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += g.v[i] * yv.v[i];
  });
}

Var Tape::log(Var x) {
  check(x);
  Tensor2 out = value(x);
  for (double& e : out.v) e = std::log(e);
  int xi = x.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), requires_grad(x), [xi, yi](Tape& t) {
    if (!t.nodes_[xi].requires_grad) return;
    const Tensor2& g = t.nodes_[yi].grad;
    const Tensor2& xv = t.nodes_[xi].value;
    Tensor2& acc = t.grad_buf(xi);
    for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += g.v[i] / xv.v[i];
  });
}

Var Tape::softmax_rows(Var x) {
  check(x);
  Tensor2 out = lin::softmax_rows(value(x));
  int xi = x.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), requires_grad(x), [xi, yi](Tape& t) {
    if (!t.nodes_[xi].requires_grad) return;
    const Tensor2& g = t.nodes_[yi].grad;
    const Tensor2& p = t.nodes_[yi].value;
    Tensor2& acc = t.grad_buf(xi);
    for (int r = 0; r < p.rows; ++r) {
      const double* gr = g.row(r);
      const double* pr = p.row(r);
      double* ar = acc.row(r);
      double gp = 0.0;
      for (int c = 0; c < p.cols; ++c) gp += gr[c] * pr[c];
      for (int c = 0; c < p.cols; ++c) ar[c] += pr[c] * (gr[c] - gp);
    }
  });
}

Var Tape::logsumexp_rows(Var x) {
  check(x);
  Tensor2 out = lin::logsumexp_rows(value(x));
  int xi = x.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), requires_grad(x), [xi, yi](Tape& t) {
    if (!t.nodes_[xi].requires_grad) return;
    const Tensor2& g = t.nodes_[yi].grad;  // Bx1
    Tensor2 p = lin::softmax_rows(t.nodes_[xi].value);
    Tensor2& acc = t.grad_buf(xi);
    for (int r = 0; r < p.rows; ++r) {
      const double* pr = p.row(r);
      double* ar = acc.row(r);
      double gr = g.v[r];
      for (int c = 0; c < p.cols; ++c) ar[c] += gr * pr[c];
    }
  });
}

Var Tape::sum(Var x) {
  check(x);
  Tensor2 out = Tensor2::scalar(lin::sum(value(x)));
  int xi = x.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), requires_grad(x), [xi, yi](Tape& t) {
    if (!t.nodes_[xi].requires_grad) return;
    double g = t.nodes_[yi].grad.v[0];
    Tensor2& acc = t.grad_buf(xi);
    for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += g;
  });
}

Var Tape::mean(Var x) {
  check(x);
  const Tensor2& xv = value(x);
  if (xv.size() == 0) throw std::invalid_argument("mean: empty tensor");
  Tensor2 out = Tensor2::scalar(lin::sum(xv) / static_cast<double>(xv.size()));
  int xi = x.idx, yi = static_cast<int>(nodes_.size());
  return push(std::move(out), requires_grad(x), [xi, yi](Tape& t) {
    if (!t.nodes_[xi].requires_grad) return;
    Tensor2& acc = t.grad_buf(xi);
    double g = t.nodes_[yi].grad.v[0] / static_cast<double>(acc.size());
    for (int64_t i = 0; i < acc.size(); ++i) acc.v[i] += g;
  });
}

void Tape::backward(Var loss) {
  check(loss);
  const Tensor2& lv = nodes_[loss.idx].value;
  if (lv.rows != 1 || lv.cols != 1)
    throw std::invalid_argument("backward: loss must be 1x1, got " + lv.shape_str());
  grad_buf(loss.idx).v[0] = 1.0;
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.back && n.grad.size() == n.value.size()) n.back(*this);
  }
}

GradCheckReport grad_check(const DiffFn& f, const std::vector<Tensor2>& params,
                           double step, double rel_floor) {
  if (step <= 0.0) throw std::invalid_argument("grad_check: step must be > 0");

  auto eval = [&](const std::vector<Tensor2>& p) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(p.size());
    for (const Tensor2& t : p) vars.push_back(tape.leaf(t, false));
    Var loss = f(tape, vars);
    double val = tape.scalar(loss);
    if (!std::isfinite(val)) throw std::runtime_error("grad_check: non-finite loss value");
    return val;
  };

  // analytic pass
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor2& t : params) vars.push_back(tape.leaf(t, true));
  Var loss = f(tape, vars);
  if (!std::isfinite(tape.scalar(loss)))
    throw std::runtime_error("grad_check: non-finite loss value");
  tape.backward(loss);
  std::vector<Tensor2> analytic;
  analytic.reserve(params.size());
  for (Var v : vars) analytic.push_back(tape.grad(v));

  GradCheckReport rep;
  std::vector<Tensor2> work = params;
  for (size_t p = 0; p < params.size(); ++p) {
    for (int64_t i = 0; i < params[p].size(); ++i) {
      double orig = work[p].v[i];
      work[p].v[i] = orig + step;
      double fp = eval(work);
      work[p].v[i] = orig - step;
      double fm = eval(work);
      work[p].v[i] = orig;
      double numeric = (fp - fm) / (2.0 * step);
      double a = analytic[p].v[i];
      double abs_dev = std::abs(a - numeric);
      double rel_dev = abs_dev / std::max({std::abs(a), std::abs(numeric), rel_floor});
      rep.max_abs = std::max(rep.max_abs, abs_dev);
      rep.max_rel = std::max(rep.max_rel, rel_dev);
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace sccl
