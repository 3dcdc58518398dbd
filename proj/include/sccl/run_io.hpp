#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sccl/data.hpp"
#include "sccl/memory.hpp"
#include "sccl/metrics.hpp"
#include "sccl/trainer.hpp"

namespace sccl {

// Configuration problems get their own type so the command line can map them
// to exit code 1 (runtime failures use 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything a run needs: hyperparameters, the seed list, and exactly one
// data source — a task-order manifest or the synthetic generator.
struct CliConfig {
  RunConfig run;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  std::optional<std::string> manifest;  // stored as an absolute path
  SyntheticSpec synthetic;

  bool uses_manifest() const { return manifest.has_value(); }
};

// key = value lines under [section] headers; '#' and ';' start comments.
// Relative manifest paths resolve against base_dir. Unknown keys are errors.
CliConfig parse_config_text(const std::string& text, const std::string& source_name,
                            const std::string& base_dir);
CliConfig parse_config_file(const std::string& path);

// Canonical round-trippable rendering, archived into each run directory.
std::string dump_config(const CliConfig& cfg);

// Loads the manifest or generates the synthetic benchmark.
TaskSequence load_tasks(const CliConfig& cfg);

// Files inside a per-seed run directory.
inline constexpr const char* kConfigFile = "config.ini";
inline constexpr const char* kStepLogFile = "steps.csv";
inline constexpr const char* kRMatrixFile = "rmatrix.csv";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kMemoryFile = "memory.jsonl";
inline constexpr const char* kMemoryManifestFile = "memory_manifest.json";
inline constexpr const char* kEncoderFinalFile = "encoder_final.bin";
inline constexpr const char* kSweepFile = "sweep.csv";

std::string encoder_task_file(int task_index);  // encoder_task_<i>.bin

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Writes config snapshot, step log, R-matrix, metrics, buffer, and the final
// encoder. Per-task encoder checkpoints are written by the caller as tasks
// finish (they need the mid-run state).
void write_run_dir(const std::string& dir, const CliConfig& cfg, const RunResult& result);

struct LoadedRun {
  CliConfig cfg;
  EncoderState encoder;  // final
  MemoryBuffer buffer;
  MetricsReport report;
};

LoadedRun load_run_dir(const std::string& dir);

// Mean/standard deviation of ACC and BWT across seeds plus the per-seed
// values (population std; BWT block is null for single-task runs).
nlohmann::json aggregate_runs(const std::vector<MetricsReport>& reports);

// One row per mode: mode,acc_mean,acc_std,bwt_mean,bwt_std.
std::string ablation_csv(const std::vector<std::pair<std::string, nlohmann::json>>& rows);

// Row-major doubles behind a small header; labels land in a CSV beside it.
void write_embedding_dump(const std::string& bin_path, const std::string& labels_path,
                          const Tensor2& reps, const std::vector<Example>& examples,
                          const std::vector<std::string>& kinds);
Tensor2 read_embedding_dump(const std::string& bin_path);

}  // namespace sccl
