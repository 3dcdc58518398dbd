#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sccl/data.hpp"
#include "sccl/encoder.hpp"
#include "sccl/losses.hpp"
#include "sccl/memory.hpp"
#include "sccl/metrics.hpp"
#include "sccl/optim.hpp"

namespace sccl {

// sccl       : contrastive + relation distillation + memory replay
// sccl_no_mr : drops memory replay
// sccl_no_ird: drops relation distillation
// cl_only    : contrastive loss alone
// ce_baseline: per-task cross-entropy heads, no buffer-based machinery
enum class Mode { kSccl, kScclNoMr, kScclNoIrd, kClOnly, kCeBaseline };

Mode parse_mode(const std::string& name);  // throws on unknown names
std::string mode_name(Mode mode);
const std::vector<Mode>& all_modes();

bool mode_uses_ird(Mode mode);
bool mode_uses_replay(Mode mode);

struct RunConfig {
  Mode mode = Mode::kSccl;
  int batch_size = 96;
  int epochs = 10;
  double base_lr = 3e-5;
  int replay_every = 100;     // steps between replay updates (f)
  int memory_per_task = 200;  // exemplar budget per task (m)
  int clusters_per_label = 4;
  TemperatureConfig temps;
  int k = 10;  // neighbors at inference
  uint64_t seed = 1;
  HashingConfig hashing;
  std::vector<int> encoder_dims = {1024, 256, 128};

  void validate() const;  // throws std::invalid_argument
};

// Hex digest over every hyperparameter except the seed; runs of one config
// across seeds share it.
std::string config_fingerprint(const RunConfig& cfg);

// One row per optimizer update. For ce_baseline the cross-entropy value is
// reported in the loss_cl column; loss_ird stays empty.
struct StepLogRow {
  int task = 0;
  int step = 0;  // 1-based within the task; repeats (replay=true) on replay
  double loss_cl = 0.0;
  std::optional<double> loss_ird;
  double lr = 0.0;
  bool replay = false;
};

std::string step_log_to_csv(const std::vector<StepLogRow>& rows);

// Per-task linear classifier kept by the ce_baseline mode for later
// evaluation; labels maps local column -> global label id.
struct TaskHead {
  Tensor2 w;
  Tensor2 b;
  std::vector<int> labels;
};

struct RunState {
  EncoderState encoder;
  std::optional<EncoderSnapshot> prev_snapshot;  // absent during the first task
  MemoryBuffer buffer;
  RMatrix rmatrix;
  std::map<int, TaskHead> heads;  // ce_baseline only
  std::vector<StepLogRow> step_log;
  int tasks_trained = 0;
  int64_t total_steps = 0;
  int64_t total_replay_steps = 0;
};

RunState init_run_state(const TaskSequence& seq, const RunConfig& cfg);

// One task's optimization loop: per-step contrastive (+ distillation) loss,
// Adam with per-task linear learning-rate decay, and a replay update every
// replay_every steps when the mode allows and the buffer has content.
// Throws std::runtime_error with step diagnostics on a non-finite loss.
void train_task(RunState& state, const TaskSpec& task, const RunConfig& cfg);

// Post-task bookkeeping: exemplar selection into the buffer, encoder snapshot
// for the next task's distillation reference, and accuracy on every task seen
// so far (one R-matrix row).
void finish_task(RunState& state, const TaskSequence& seq, int task_index, const RunConfig& cfg);

// Metrics plus run metadata for a state whose R-matrix is complete.
MetricsReport make_report(const RunState& state, const RunConfig& cfg);

struct RunResult {
  RunState state;
  MetricsReport report;
};

// Trains the whole sequence in order. Deterministic given cfg.seed.
RunResult run_sequence(const TaskSequence& seq, const RunConfig& cfg);

}  // namespace sccl
