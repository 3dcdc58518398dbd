#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "sccl/data.hpp"
#include "sccl/encoder.hpp"
#include "sccl/memory.hpp"
#include "sccl/tensor.hpp"

namespace sccl {

struct Prediction {
  int label = -1;                // argmax probability; ties take the smaller label id
  std::map<int, double> probs;   // over labels among the retrieved neighbors; sums to 1
  std::vector<std::pair<int64_t, double>> neighbors;  // (exemplar id, similarity), rank order
};

// A task's classification criterion: buffered exemplars re-encoded with the
// current encoder. Rows are unit vectors; rebuilt whenever the encoder moves.
struct Criterion {
  Tensor2 reps;
  std::vector<int> labels;
  std::vector<int64_t> ids;
  int size() const { return reps.rows; }
};

// Re-encodes the task's buffered exemplars with the CURRENT encoder — this is
// what keeps the criterion adaptive. Throws if the task was never stored.
Criterion build_criterion(const MemoryBuffer& buf, int task_id, const EncoderState& encoder);

// Retrieves the k most similar exemplars (dot product of unit vectors; ties by
// ascending exemplar id) and softens similarities into label probabilities:
// p(y) proportional to the sum of exp(sim/T) over neighbors carrying y.
Prediction knn_predict(const Tensor2& query_rep, const Criterion& criterion, int k, double T);

// Fraction of the task's test examples whose prediction matches the gold
// label. Retrieval is restricted to the queried task's own exemplars.
double evaluate_task(const MemoryBuffer& buf, const TaskSpec& task, const EncoderState& encoder,
                     int k, double T);

}  // namespace sccl
