#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sccl/data.hpp"
#include "sccl/encoder.hpp"
#include "sccl/tensor.hpp"

namespace sccl {

struct KMeansResult {
  Tensor2 centroids;            // K x d
  std::vector<int> assignment;  // nearest centroid per point
  double inertia = 0.0;         // sum of squared distances
  bool k_clamped = false;       // requested K exceeded the point count
  std::vector<double> inertia_trace;  // per Lloyd iteration, non-increasing
};

// Lloyd iterations from k-means++ seeding until the max centroid shift drops
// below tol or max_iter is reached. Empty clusters are re-seeded to the point
// farthest from its assigned centroid. Deterministic given the seed.
KMeansResult kmeans(const Tensor2& points, int k, uint64_t seed, int max_iter = 100,
                    double tol = 1e-6);

// Post-task exemplar selection: per-label quotas of floor(m/|C|) with the
// remainder handed to labels in descending train-count order; within a label,
// K-means clusters get draws proportional to their size (largest-remainder
// rounding) taken uniformly without replacement. Labels shorter than their
// quota contribute everything and the shortfall is reallocated.
std::vector<Example> select_samples(const TaskSpec& task, const EncoderState& encoder, int m,
                                    int clusters_per_label, uint64_t seed);

// Per-label quota arithmetic, exposed for direct checks. train_counts maps
// label -> available examples (iteration order = ascending label).
std::vector<std::pair<int, int>> label_quotas(const std::vector<std::pair<int, int>>& train_counts,
                                              int m);

// Largest-remainder split of `quota` draws across cluster sizes.
std::vector<int> proportional_counts(const std::vector<int>& cluster_sizes, int quota);

// Run-directory persistence for selected exemplars (JSON Lines).
void save_exemplars_jsonl(const std::vector<Example>& exemplars, const std::string& path);
std::vector<Example> load_exemplars_jsonl(const std::string& path);

}  // namespace sccl
