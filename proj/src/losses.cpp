#include "sccl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sccl {

namespace {

// Finite stand-in for -inf on masked self-similarities; exp underflows to
// exactly 0 after row-max subtraction while 0 * mask stays 0 (no NaN).
constexpr double kMaskValue = -1e30;

Tensor2 diag_mask(int n) {
  Tensor2 m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = kMaskValue;
  return m;
}

// B x B similarity softmax with zeroed diagonal, shared by ird_similarity
// and the frozen side of ird_loss.
Tensor2 masked_similarity_rows(const Tensor2& reps, double tau) {
  Tensor2 s = lin::matmul_nt(reps, reps);
  for (double& e : s.v) e /= tau;
  for (int i = 0; i < s.rows; ++i) s.at(i, i) = kMaskValue;
  return lin::softmax_rows(s);
}

}  // namespace

SupconLoss supcon_loss(Tape& tape, Var reps, std::span<const int> labels, double kappa) {
  const Tensor2& h = tape.value(reps);
  int b = h.rows;
  if (b < 2) throw std::invalid_argument("supcon_loss: invalid batch, need B >= 2");
  if (static_cast<int>(labels.size()) != b)
    throw std::invalid_argument("supcon_loss: labels size != batch size");
  if (kappa <= 0.0) throw std::invalid_argument("supcon_loss: kappa must be > 0");

  Tensor2 pos_weight(b, b);   // 1/|P(j)| on positive pairs
  Tensor2 anchor_active(b, 1);
  int active = 0;
  for (int j = 0; j < b; ++j) {
    int n_pos = 0;
    for (int p = 0; p < b; ++p)
      if (p != j && labels[p] == labels[j]) ++n_pos;
    if (n_pos == 0) continue;
    ++active;
    anchor_active.at(j, 0) = 1.0;
    for (int p = 0; p < b; ++p)
      if (p != j && labels[p] == labels[j]) pos_weight.at(j, p) = 1.0 / n_pos;
  }

  SupconLoss out;
  out.active_anchors = active;
  out.has_positive_pairs = active > 0;
  if (active == 0) {
    // zero loss that still reaches the parameters with zero gradient
    out.loss = tape.sum(tape.mul_const(reps, Tensor2(b, h.cols)));
    return out;
  }

  Var sim = tape.scale(tape.matmul_nt(reps, reps), 1.0 / kappa);
  Var masked = tape.add_const(sim, diag_mask(b));
  Var lse = tape.logsumexp_rows(masked);  // b x 1
  // L = sum_j 1[P(j) != 0] lse_j  -  sum_{j,p} S_jp / |P(j)|
  Var anchor_part = tape.sum(tape.mul_const(lse, anchor_active));
  Var pos_part = tape.sum(tape.mul_const(masked, pos_weight));
  out.loss = tape.add(anchor_part, tape.scale(pos_part, -1.0));
  return out;
}

Tensor2 ird_similarity(const Tensor2& reps, double tau) {
  if (reps.rows < 2) throw std::invalid_argument("ird_similarity: invalid batch, need B >= 2");
  if (tau <= 0.0) throw std::invalid_argument("ird_similarity: tau must be > 0");
  Tensor2 full = masked_similarity_rows(reps, tau);
  Tensor2 out(reps.rows, reps.rows - 1);
  for (int j = 0; j < reps.rows; ++j) {
    int c = 0;
    for (int a = 0; a < reps.rows; ++a)
      if (a != j) out.at(j, c++) = full.at(j, a);
  }
  return out;
}

Var ird_loss(Tape& tape, Var cur_reps, const Tensor2& prev_reps, double tau) {
  const Tensor2& cur = tape.value(cur_reps);
  if (!cur.same_shape(prev_reps))
    throw std::invalid_argument("dimension error: ird_loss cur " + cur.shape_str() +
                                " vs prev " + prev_reps.shape_str());
  if (cur.rows < 2) throw std::invalid_argument("ird_loss: invalid batch, need B >= 2");
  if (tau <= 0.0) throw std::invalid_argument("ird_loss: tau must be > 0");

  int b = cur.rows;
  Tensor2 s_prev = masked_similarity_rows(prev_reps, tau);  // frozen target, zero diagonal

  Var sim = tape.scale(tape.matmul_nt(cur_reps, cur_reps), 1.0 / tau);
  Var masked = tape.add_const(sim, diag_mask(b));
  Var lse = tape.logsumexp_rows(masked);
  Var log_s = tape.add_colvec(masked, tape.scale(lse, -1.0));
  // cross-entropy: -(1/B^2) sum_j sum_{p != j} s_prev log s_cur
  return tape.scale(tape.sum(tape.mul_const(log_s, s_prev)),
                    -1.0 / (static_cast<double>(b) * b));
}

TotalLoss total_loss(Tape& tape, const EncoderVars& vars, std::span<const Example> batch,
                     const std::optional<EncoderSnapshot>& prev,
                     const TemperatureConfig& cfg) {
  TotalLoss out{};
  out.reps = encode_batch(tape, vars, batch);
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const Example& ex : batch) labels.push_back(ex.label);

  SupconLoss cl = supcon_loss(tape, out.reps, labels, cfg.kappa);
  out.l_cl = cl.loss;
  out.has_positive_pairs = cl.has_positive_pairs;
  if (prev) {
    Tensor2 prev_reps = encode_batch(*prev, batch);
    out.l_ird = ird_loss(tape, out.reps, prev_reps, cfg.tau);
    out.total = tape.add(out.l_cl, *out.l_ird);
  } else {
    out.total = out.l_cl;
  }
  return out;
}

Var ce_head_loss(Tape& tape, Var reps, std::span<const int> labels,
                 const std::vector<int>& task_labels, Var head_w, Var head_b) {
  const Tensor2& h = tape.value(reps);
  int b = h.rows;
  int n_classes = static_cast<int>(task_labels.size());
  if (tape.value(head_w).cols != n_classes)
    throw std::invalid_argument("ce_head_loss: head output dim != task label count");
  if (static_cast<int>(labels.size()) != b)
    throw std::invalid_argument("ce_head_loss: labels size != batch size");

  Tensor2 onehot(b, n_classes);
  for (int r = 0; r < b; ++r) {
    auto it = std::find(task_labels.begin(), task_labels.end(), labels[r]);
    if (it == task_labels.end())
      throw std::invalid_argument("ce_head_loss: invalid label " + std::to_string(labels[r]) +
                                  " for this task");
    onehot.at(r, static_cast<int>(it - task_labels.begin())) = 1.0;
  }

  Var logits = tape.add_bias(tape.matmul(reps, head_w), head_b);
  Var lse = tape.logsumexp_rows(logits);
  Var log_probs = tape.add_colvec(logits, tape.scale(lse, -1.0));
  return tape.scale(tape.sum(tape.mul_const(log_probs, onehot)), -1.0 / b);
}

}  // namespace sccl
