#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sccl/rng.hpp"

namespace sccl {

// One labeled instance. Exactly one of text / raw_features is present; the
// label is a global id drawn from its task's disjoint label set.
struct Example {
  int64_t id = 0;
  std::string text;
  std::optional<std::vector<double>> raw_features;
  int label = 0;
  int task = 0;

  bool has_text() const { return !raw_features.has_value(); }
};

struct TaskSpec {
  int task_id = 0;
  std::set<int> labels;
  std::vector<Example> train;
  std::vector<Example> test;

  std::vector<int> labels_sorted() const { return {labels.begin(), labels.end()}; }
};

struct TaskSequence {
  std::vector<TaskSpec> tasks;
  std::string order_name;

  int n() const { return static_cast<int>(tasks.size()); }
};

// Loads one JSON Lines file ({"text", "label", "split"} per line) into a
// TaskSpec. Label names are remapped to global ids starting at
// next_global_label (sorted label names, so the mapping is deterministic);
// the counter advances past the ids consumed. Malformed lines raise with the
// 1-based line number.
TaskSpec load_jsonl(const std::string& path, int task_id, int& next_global_label);

// Task-order manifest: plain text, one dataset path per line (relative paths
// resolved against the manifest's directory), '#' comments allowed.
TaskSequence load_manifest(const std::string& manifest_path);

struct SyntheticSpec {
  int n_tasks = 4;
  int labels_per_task = 2;
  int train_per_label = 200;
  int test_per_label = 50;
  int vocab_size = 120;
  uint64_t seed = 7;
};

// Synthetic token-classification tasks: each global label draws from its own
// weighted slice of the vocabulary plus a shared noise pool, so tasks are
// learnable but interfere through shared tokens. Pure function of the spec.
TaskSequence gen_synthetic_tasks(const SyntheticSpec& spec);

// Label-stratified batches over the train split for one epoch. Examples are
// grouped per label into blocks of >= 2 (one block of 3 absorbs an odd
// remainder) so every label present in a batch brings a positive pair when
// the split has one; blocks are shuffled and packed, so batch sizes may fall
// short of batch_size by at most one block. A trailing batch of < 2 examples
// is merged into the previous batch.
std::vector<std::vector<Example>> batch_iter(const TaskSpec& task, int batch_size,
                                             uint64_t seed, int epoch);

// Shared block-building helper, also used for replay sampling: shuffles each
// label group and splits it into blocks of 2 (or 3 / 1 at the tail).
std::vector<std::vector<Example>> label_blocks(const std::vector<Example>& pool, Rng& rng);

}  // namespace sccl
