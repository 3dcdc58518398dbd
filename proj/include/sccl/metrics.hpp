#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sccl/data.hpp"
#include "sccl/encoder.hpp"
#include "sccl/memory.hpp"

namespace sccl {

// Lower-triangular accuracy grid: entry (i, j) is the accuracy on task j's
// test set measured after finishing task i.
class RMatrix {
 public:
  RMatrix() = default;
  explicit RMatrix(int n);

  int n() const { return n_; }
  void set(int i, int j, double value);
  double get(int i, int j) const;
  bool is_set(int i, int j) const;
  std::vector<double> bottom_row() const;  // throws if incomplete

  std::string to_csv() const;
  static RMatrix from_csv(const std::string& text);

 private:
  int index(int i, int j) const;
  int n_ = 0;
  std::vector<std::optional<double>> cells_;
};

// Mean of the bottom row: average accuracy over all tasks after the last one.
double acc(const RMatrix& r);

// Mean over earlier tasks of (final accuracy − just-after-training accuracy).
// Negative values mean forgetting. Undefined for a single task, hence optional.
std::optional<double> bwt(const RMatrix& r);

struct MetricsReport {
  double acc = 0.0;
  std::optional<double> bwt;
  std::vector<double> final_accuracies;  // bottom row of the R-matrix
  std::string mode;
  uint64_t seed = 0;
  std::string config_hash;
  int64_t total_steps = 0;         // main-loop optimizer updates
  int64_t total_replay_steps = 0;  // replay optimizer updates

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

struct SweepRow {
  int k = 0;
  double acc = 0.0;
  bool k_clamped = false;  // k exceeded some task's criterion size
};

// Re-scores every task with the final encoder and buffer under each k; no
// retraining happens here.
std::vector<SweepRow> knn_sweep(const MemoryBuffer& buf, const std::vector<TaskSpec>& tasks,
                                const EncoderState& encoder, const std::vector<int>& k_values,
                                double T);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace sccl
