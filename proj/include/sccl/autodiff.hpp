#pragma once

#include <functional>
#include <vector>

#include "sccl/tensor.hpp"

namespace sccl {

class Tape;

// Handle to a node on a specific tape.
struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Reverse-mode tape over Tensor2 values. Operations record a backward closure
// when any input requires a gradient; backward() replays the closures in
// exact reverse order of recording. Leaves carrying parameters are created
// with requires_grad = true; input features stay constant leaves so the
// backward sweep never materializes their gradients.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor2 value, bool requires_grad = false);

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var transpose(Var a);
  Var sparse_matmul(const SparseRows& x, Var w);  // constant sparse input
  Var add(Var a, Var b);
  Var add_bias(Var x, Var bias);       // bias 1xC broadcast over rows
  Var add_colvec(Var x, Var colvec);   // colvec Bx1 broadcast over cols
  Var add_const(Var x, const Tensor2& c);
  Var mul_const(Var x, const Tensor2& c);
  Var relu(Var x);
  Var l2_normalize_rows(Var x);
  Var scale(Var x, double s);
  Var exp(Var x);
  Var log(Var x);
  Var softmax_rows(Var x);
  Var logsumexp_rows(Var x);
  Var sum(Var x);   // -> 1x1
  Var mean(Var x);  // -> 1x1

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every node with
  // requires_grad. loss must be 1x1.
  void backward(Var loss);

  const Tensor2& value(Var v) const { return nodes_[v.idx].value; }
  const Tensor2& grad(Var v) const;
  bool has_grad(Var v) const;  // true once backward accumulated into v
  double scalar(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.idx].requires_grad; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;  // allocated lazily, shape of value
    bool requires_grad = false;
    std::function<void(Tape&)> back;  // empty for leaves / constant subgraphs
  };

  Var push(Tensor2 value, bool requires_grad, std::function<void(Tape&)> back);
  Tensor2& grad_buf(int idx);
  void check(Var v) const;

  std::vector<Node> nodes_;
};

// Elementwise comparison of analytic gradients against central finite
// differences. rel deviation uses max(|analytic|, |numeric|, rel_floor) as
// the denominator so near-zero gradients are judged on absolute terms.
struct GradCheckReport {
  double max_abs = 0.0;
  double max_rel = 0.0;
  int64_t checked = 0;
};

using DiffFn = std::function<Var(Tape&, const std::vector<Var>&)>;

GradCheckReport grad_check(const DiffFn& f, const std::vector<Tensor2>& params,
                           double step, double rel_floor = 1e-6);

}  // namespace sccl
