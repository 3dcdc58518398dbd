#include "sccl/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sccl {

Criterion build_criterion(const MemoryBuffer& buf, int task_id, const EncoderState& encoder) {
  const std::vector<Example>& exemplars = buf.task_exemplars(task_id);
  Criterion crit;
  crit.reps = encode_batch(encoder, exemplars);
  crit.labels.reserve(exemplars.size());
  crit.ids.reserve(exemplars.size());
  for (const Example& ex : exemplars) {
    crit.labels.push_back(ex.label);
    crit.ids.push_back(ex.id);
  }
  return crit;
}

Prediction knn_predict(const Tensor2& query_rep, const Criterion& criterion, int k, double T) {
  if (criterion.size() == 0) throw std::invalid_argument("knn_predict: empty criterion");
  if (k < 1) throw std::invalid_argument("knn_predict: k must be >= 1");
  if (T <= 0.0) throw std::invalid_argument("knn_predict: temperature must be positive");
  if (query_rep.rows != 1 || query_rep.cols != criterion.reps.cols)
    throw std::invalid_argument("dimension error: query is " + query_rep.shape_str() +
                                ", criterion rows have " + std::to_string(criterion.reps.cols) +
                                " columns");
  const int n = criterion.size();
  k = std::min(k, n);

  std::vector<double> sims(n, 0.0);
  const double* q = query_rep.row(0);
  for (int i = 0; i < n; ++i) {
    const double* r = criterion.reps.row(i);
    double s = 0.0;
    for (int c = 0; c < query_rep.cols; ++c) s += q[c] * r[c];
    sims[i] = s;
  }

  // Rank by similarity, breaking ties toward the smaller exemplar id.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return criterion.ids[a] < criterion.ids[b];
  });

  Prediction pred;
  pred.neighbors.reserve(k);
  std::map<int, double> weight;
  double total = 0.0;
  for (int rank = 0; rank < k; ++rank) {
    int i = order[rank];
    pred.neighbors.emplace_back(criterion.ids[i], sims[i]);
    double w = std::exp(sims[i] / T);
    weight[criterion.labels[i]] += w;
    total += w;
  }

  for (const auto& [label, w] : weight) pred.probs[label] = w / total;
  double best = -1.0;
  for (const auto& [label, p] : pred.probs) {
    if (p > best) {  // map order is ascending label, so ties keep the smaller id
      best = p;
      pred.label = label;
    }
  }
  return pred;
}

double evaluate_task(const MemoryBuffer& buf, const TaskSpec& task, const EncoderState& encoder,
                     int k, double T) {
  if (task.test.empty())
    throw std::invalid_argument("evaluate_task: task " + std::to_string(task.task_id) +
                                " has no test examples");
  Criterion crit = build_criterion(buf, task.task_id, encoder);

  const int n = static_cast<int>(task.test.size());
  int correct = 0;
  constexpr int kChunk = 512;
  for (int start = 0; start < n; start += kChunk) {
    int stop = std::min(n, start + kChunk);
    std::vector<Example> chunk(task.test.begin() + start, task.test.begin() + stop);
    Tensor2 reps = encode_batch(encoder, chunk);
    Tensor2 query(1, reps.cols);
    for (int i = 0; i < reps.rows; ++i) {
      std::copy(reps.row(i), reps.row(i) + reps.cols, query.row(0));
      Prediction pred = knn_predict(query, crit, k, T);
      if (pred.label == chunk[i].label) correct++;
    }
  }
  return static_cast<double>(correct) / n;
}

}  // namespace sccl
