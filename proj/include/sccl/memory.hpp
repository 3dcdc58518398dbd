#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sccl/data.hpp"

namespace sccl {

// Append-only store of per-task exemplars. Each completed task contributes one
// immutable list; replay draws label-stratified batches across every stored
// task at once.
class MemoryBuffer {
 public:
  // Throws std::logic_error if the task is already present and
  // std::invalid_argument on duplicate ids or mismatched task fields.
  void add_task_exemplars(int task_id, std::vector<Example> exemplars);

  bool has_task(int task_id) const { return tasks_.count(task_id) != 0; }
  const std::vector<Example>& task_exemplars(int task_id) const;  // throws if absent
  std::vector<int> task_ids() const;                              // ascending
  int size() const;
  bool empty() const { return tasks_.empty(); }

  // Up to batch_size exemplars across all stored tasks, label-stratified so
  // each included label appears at least twice when its stored count allows.
  // Deterministic in (seed, step); an empty buffer yields an empty batch.
  std::vector<Example> replay_batch(int batch_size, uint64_t seed, int step) const;

  // Exemplars as JSON Lines plus a JSON manifest of per-task counts.
  void save(const std::string& exemplar_path, const std::string& manifest_path) const;
  static MemoryBuffer load(const std::string& exemplar_path, const std::string& manifest_path);

 private:
  std::map<int, std::vector<Example>> tasks_;
};

}  // namespace sccl
