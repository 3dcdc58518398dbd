#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sccl/encoder.hpp"
#include "sccl/format.hpp"
#include "sccl/knn.hpp"
#include "sccl/metrics.hpp"
#include "sccl/run_io.hpp"
#include "sccl/trainer.hpp"

namespace fs = std::filesystem;
using namespace sccl;

namespace {

std::vector<uint64_t> parse_seed_list(const std::string& text) {
  std::vector<uint64_t> seeds;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    size_t b = part.find_first_not_of(" \t");
    size_t e = part.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    part = part.substr(b, e - b + 1);
    try {
      size_t used = 0;
      seeds.push_back(std::stoull(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("bad seed \"" + part + "\" in --seeds");
    }
  }
  if (seeds.empty()) throw ConfigError("--seeds names no seeds");
  return seeds;
}

std::vector<int> parse_k_list(const std::string& text) {
  std::vector<int> ks;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    size_t b = part.find_first_not_of(" \t");
    size_t e = part.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    part = part.substr(b, e - b + 1);
    try {
      size_t used = 0;
      int k = std::stoi(part, &used);
      if (used != part.size() || k < 1) throw std::invalid_argument(part);
      ks.push_back(k);
    } catch (const std::exception&) {
      throw ConfigError("bad k \"" + part + "\" in --k");
    }
  }
  if (ks.empty()) throw ConfigError("--k names no values");
  return ks;
}

std::string show(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("n/a");
}

// One seed end to end: per-task checkpoints as tasks finish, full artifact
// set on success, config + partial step log preserved on abort.
RunResult execute_seed(const CliConfig& cfg, const TaskSequence& seq, uint64_t seed,
                       const fs::path& dir) {
  RunConfig rc = cfg.run;
  rc.seed = seed;

  fs::create_directories(dir);
  write_text_file((dir / kConfigFile).string(), dump_config(cfg));

  RunState state = init_run_state(seq, rc);
  try {
    for (int i = 0; i < seq.n(); ++i) {
      train_task(state, seq.tasks[i], rc);
      finish_task(state, seq, i, rc);
      save_encoder(state.encoder, (dir / encoder_task_file(i)).string());
    }
  } catch (...) {
    write_text_file((dir / kStepLogFile).string(), step_log_to_csv(state.step_log));
    throw;
  }

  MetricsReport report = make_report(state, rc);
  RunResult result{std::move(state), std::move(report)};
  write_run_dir(dir.string(), cfg, result);
  return result;
}

std::vector<MetricsReport> run_all_seeds(const CliConfig& cfg, const TaskSequence& seq,
                                         const fs::path& out) {
  std::vector<MetricsReport> reports;
  for (uint64_t seed : cfg.seeds) {
    RunResult result = execute_seed(cfg, seq, seed, out / ("seed_" + std::to_string(seed)));
    std::cout << mode_name(cfg.run.mode) << " seed " << seed
              << ": acc=" << format_double(result.report.acc)
              << " bwt=" << show(result.report.bwt) << "\n";
    reports.push_back(std::move(result.report));
  }
  return reports;
}

int cmd_run(const CliConfig& cfg, const fs::path& out) {
  TaskSequence seq = load_tasks(cfg);
  std::vector<MetricsReport> reports = run_all_seeds(cfg, seq, out);
  nlohmann::json agg = aggregate_runs(reports);
  write_text_file((out / "aggregate.json").string(), agg.dump(2) + "\n");
  std::cout << "mean acc=" << format_double(agg["acc"]["mean"].get<double>())
            << " (std " << format_double(agg["acc"]["std"].get<double>()) << ")";
  if (!agg["bwt"].is_null())
    std::cout << ", mean bwt=" << format_double(agg["bwt"]["mean"].get<double>());
  std::cout << "\n" << "wrote " << (out / "aggregate.json").string() << "\n";
  return 0;
}

int cmd_ablate(const CliConfig& cfg, const fs::path& out) {
  TaskSequence seq = load_tasks(cfg);
  std::vector<std::pair<std::string, nlohmann::json>> table;
  for (Mode mode : all_modes()) {
    CliConfig mode_cfg = cfg;
    mode_cfg.run.mode = mode;
    fs::path mode_dir = out / mode_name(mode);
    std::vector<MetricsReport> reports = run_all_seeds(mode_cfg, seq, mode_dir);
    nlohmann::json agg = aggregate_runs(reports);
    write_text_file((mode_dir / "aggregate.json").string(), agg.dump(2) + "\n");
    table.emplace_back(mode_name(mode), std::move(agg));
  }
  std::string csv = ablation_csv(table);
  write_text_file((out / "ablation.csv").string(), csv);
  std::cout << csv << "wrote " << (out / "ablation.csv").string() << "\n";
  return 0;
}

int cmd_sweep_k(const std::string& run_dir, const std::vector<int>& ks,
                const std::string& out_override) {
  LoadedRun run = load_run_dir(run_dir);
  TaskSequence seq = load_tasks(run.cfg);
  std::vector<SweepRow> rows =
      knn_sweep(run.buffer, seq.tasks, run.encoder, ks, run.cfg.run.temps.t_infer);
  std::string csv = sweep_to_csv(rows);
  std::string out_path =
      out_override.empty() ? (fs::path(run_dir) / kSweepFile).string() : out_override;
  write_text_file(out_path, csv);
  std::cout << csv << "wrote " << out_path << "\n";
  return 0;
}

int cmd_dump_embeddings(const std::string& run_dir, int task_id,
                        const std::string& out_override) {
  LoadedRun run = load_run_dir(run_dir);
  TaskSequence seq = load_tasks(run.cfg);
  const TaskSpec* task = nullptr;
  for (const TaskSpec& t : seq.tasks)
    if (t.task_id == task_id) task = &t;
  if (!task) throw ConfigError("task " + std::to_string(task_id) + " not in this run's data");

  std::vector<Example> examples = task->test;
  std::vector<std::string> kinds(examples.size(), "test");
  const std::vector<Example>& exemplars = run.buffer.task_exemplars(task_id);
  examples.insert(examples.end(), exemplars.begin(), exemplars.end());
  kinds.insert(kinds.end(), exemplars.size(), "exemplar");

  Tensor2 reps = encode_batch(run.encoder, examples);
  std::string prefix = out_override.empty()
                           ? (fs::path(run_dir) / ("embeddings_task_" + std::to_string(task_id)))
                                 .string()
                           : out_override;
  write_embedding_dump(prefix + ".bin", prefix + "_labels.csv", reps, examples, kinds);
  std::cout << "wrote " << prefix << ".bin (" << reps.rows << " x " << reps.cols << ") and "
            << prefix << "_labels.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"supervised contrastive continual learning experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seeds_text;
  std::string mode_text;
  std::string run_dir;
  std::string k_text = "1,5,10,20,50";
  std::string out_override;
  int task_id = 0;

  CLI::App* run_cmd = app.add_subcommand("run", "train a task sequence over the seed list");
  run_cmd->add_option("--config", config_path, "configuration file")->required();
  run_cmd->add_option("--out", out_dir, "output directory")->required();
  run_cmd->add_option("--seeds", seeds_text, "comma-separated seed override");
  run_cmd->add_option("--mode", mode_text,
                      "mode override: sccl, sccl_no_mr, sccl_no_ird, cl_only, ce_baseline");

  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "run every mode on identical data and seeds");
  ablate_cmd->add_option("--config", config_path, "configuration file")->required();
  ablate_cmd->add_option("--out", out_dir, "output directory")->required();
  ablate_cmd->add_option("--seeds", seeds_text, "comma-separated seed override");

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep-k", "re-score a finished run across neighbor counts");
  sweep_cmd->add_option("run_dir", run_dir, "per-seed run directory")->required();
  sweep_cmd->add_option("--k", k_text, "comma-separated neighbor counts");
  sweep_cmd->add_option("--out", out_override, "CSV path (default: <run_dir>/sweep.csv)");

  CLI::App* dump_cmd = app.add_subcommand(
      "dump-embeddings", "write one task's test and exemplar representations");
  dump_cmd->add_option("run_dir", run_dir, "per-seed run directory")->required();
  dump_cmd->add_option("--task", task_id, "task id")->required();
  dump_cmd->add_option("--out", out_override, "output path prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  // Phase one: everything that interprets user input. Failures are exit 1.
  CliConfig cfg;
  std::vector<int> ks;
  try {
    if (app.got_subcommand(run_cmd) || app.got_subcommand(ablate_cmd)) {
      cfg = parse_config_file(config_path);
      if (!seeds_text.empty()) cfg.seeds = parse_seed_list(seeds_text);
      if (!mode_text.empty()) cfg.run.mode = parse_mode(mode_text);
    }
    if (app.got_subcommand(sweep_cmd)) ks = parse_k_list(k_text);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  // Phase two: execution. Failures are exit 2 with partial artifacts kept.
  try {
    if (app.got_subcommand(run_cmd)) return cmd_run(cfg, out_dir);
    if (app.got_subcommand(ablate_cmd)) return cmd_ablate(cfg, out_dir);
    if (app.got_subcommand(sweep_cmd)) return cmd_sweep_k(run_dir, ks, out_override);
    if (app.got_subcommand(dump_cmd)) return cmd_dump_embeddings(run_dir, task_id, out_override);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
