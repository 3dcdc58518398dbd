#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sccl/autodiff.hpp"
#include "sccl/encoder.hpp"
#include "sccl/tensor.hpp"

namespace sccl {

struct TemperatureConfig {
  double kappa = 0.2;   // contrastive
  double tau = 0.2;     // relation distillation
  double t_infer = 5.0; // knn vote softmax
};

struct SupconLoss {
  Var loss;
  bool has_positive_pairs = false;  // false means the batch had no positive pair at all
  int active_anchors = 0;           // anchors with a non-empty positive set
};

// Supervised contrastive loss over unit-norm rows: each anchor attracts its
// same-label batch mates against all others. Anchors without a positive
// contribute zero; a batch with no positives at all yields a zero loss that
// still carries (zero) gradient.
SupconLoss supcon_loss(Tape& tape, Var reps, std::span<const int> labels, double kappa);

// Row-stochastic within-batch similarity, self-pairs excluded: row j holds
// softmax(h_j . h_a / tau) over a != j, columns in ascending a order.
Tensor2 ird_similarity(const Tensor2& reps, double tau);

// Cross-entropy between the frozen previous model's similarity rows and the
// current ones, averaged over |A|^2. Gradients flow only through cur_reps.
Var ird_loss(Tape& tape, Var cur_reps, const Tensor2& prev_reps, double tau);

struct TotalLoss {
  Var total;
  Var l_cl;
  std::optional<Var> l_ird;
  Var reps;
  bool has_positive_pairs = false;
};

// Contrastive loss plus the distillation term when a previous snapshot
// exists (unweighted sum); first-task batches get the contrastive loss only.
TotalLoss total_loss(Tape& tape, const EncoderVars& vars, std::span<const Example> batch,
                     const std::optional<EncoderSnapshot>& prev, const TemperatureConfig& cfg);

// Mean softmax cross-entropy of a per-task linear head over task-local label
// indices. Labels must belong to task_labels.
Var ce_head_loss(Tape& tape, Var reps, std::span<const int> labels,
                 const std::vector<int>& task_labels, Var head_w, Var head_b);

}  // namespace sccl
