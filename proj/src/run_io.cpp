#include "sccl/run_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sccl/encoder.hpp"
#include "sccl/format.hpp"

namespace fs = std::filesystem;

namespace sccl {
namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& source, int lineno, const std::string& what) {
  throw ConfigError(source + ":" + std::to_string(lineno) + ": " + what);
}

int parse_int(const std::string& source, int lineno, const std::string& value) {
  try {
    size_t used = 0;
    int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail(source, lineno, "expected an integer, got \"" + value + "\"");
  }
}

double parse_real(const std::string& source, int lineno, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail(source, lineno, "expected a number, got \"" + value + "\"");
  }
}

bool parse_bool(const std::string& source, int lineno, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  fail(source, lineno, "expected a boolean, got \"" + value + "\"");
}

std::vector<std::string> split_commas(const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

double mean_of(const std::vector<double>& xs) {
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
  double mu = mean_of(xs);
  double total = 0.0;
  for (double x : xs) total += (x - mu) * (x - mu);
  return std::sqrt(total / static_cast<double>(xs.size()));
}

}  // namespace

CliConfig parse_config_text(const std::string& text, const std::string& source_name,
                            const std::string& base_dir) {
  CliConfig cfg;
  bool synthetic_requested = false;
  bool synthetic_keys_seen = false;

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    lineno++;
    size_t comment = raw.find_first_of("#;");
    if (comment != std::string::npos) raw.erase(comment);
    std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(source_name, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "run" && section != "encoder" && section != "data")
        fail(source_name, lineno, "unknown section [" + section + "]");
      continue;
    }

    size_t eq = line.find('=');
    if (eq == std::string::npos) fail(source_name, lineno, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(source_name, lineno, "empty key");
    if (section.empty()) fail(source_name, lineno, "key \"" + key + "\" outside any section");

    if (section == "run") {
      if (key == "mode") {
        try {
          cfg.run.mode = parse_mode(value);
        } catch (const std::invalid_argument& e) {
          fail(source_name, lineno, e.what());
        }
      } else if (key == "batch_size") {
        cfg.run.batch_size = parse_int(source_name, lineno, value);
      } else if (key == "epochs") {
        cfg.run.epochs = parse_int(source_name, lineno, value);
      } else if (key == "base_lr") {
        cfg.run.base_lr = parse_real(source_name, lineno, value);
      } else if (key == "replay_every") {
        cfg.run.replay_every = parse_int(source_name, lineno, value);
      } else if (key == "memory_per_task") {
        cfg.run.memory_per_task = parse_int(source_name, lineno, value);
      } else if (key == "clusters_per_label") {
        cfg.run.clusters_per_label = parse_int(source_name, lineno, value);
      } else if (key == "kappa") {
        cfg.run.temps.kappa = parse_real(source_name, lineno, value);
      } else if (key == "tau") {
        cfg.run.temps.tau = parse_real(source_name, lineno, value);
      } else if (key == "t_infer") {
        cfg.run.temps.t_infer = parse_real(source_name, lineno, value);
      } else if (key == "k") {
        cfg.run.k = parse_int(source_name, lineno, value);
      } else if (key == "seeds") {
        std::vector<std::string> parts = split_commas(value);
        if (parts.empty()) fail(source_name, lineno, "seeds list is empty");
        cfg.seeds.clear();
        for (const std::string& p : parts)
          cfg.seeds.push_back(
              static_cast<uint64_t>(parse_int(source_name, lineno, p)));
      } else {
        fail(source_name, lineno, "unknown key \"" + key + "\" in [run]");
      }
    } else if (section == "encoder") {
      if (key == "hash_dim") {
        cfg.run.hashing.dim = parse_int(source_name, lineno, value);
      } else if (key == "ngram_min") {
        cfg.run.hashing.ngram_min = parse_int(source_name, lineno, value);
      } else if (key == "ngram_max") {
        cfg.run.hashing.ngram_max = parse_int(source_name, lineno, value);
      } else if (key == "signed_hash") {
        cfg.run.hashing.signed_hash = parse_bool(source_name, lineno, value);
      } else if (key == "dims") {
        std::vector<std::string> parts = split_commas(value);
        if (parts.size() < 2) fail(source_name, lineno, "dims needs at least input,output");
        cfg.run.encoder_dims.clear();
        for (const std::string& p : parts)
          cfg.run.encoder_dims.push_back(parse_int(source_name, lineno, p));
      } else {
        fail(source_name, lineno, "unknown key \"" + key + "\" in [encoder]");
      }
    } else {  // data
      if (key == "manifest") {
        if (value.empty()) fail(source_name, lineno, "manifest path is empty");
        fs::path p(value);
        if (p.is_relative()) p = fs::path(base_dir) / p;
        cfg.manifest = p.lexically_normal().string();
      } else if (key == "synthetic") {
        synthetic_requested = parse_bool(source_name, lineno, value);
        synthetic_keys_seen = true;
      } else if (key == "n_tasks") {
        cfg.synthetic.n_tasks = parse_int(source_name, lineno, value);
        synthetic_keys_seen = true;
      } else if (key == "labels_per_task") {
        cfg.synthetic.labels_per_task = parse_int(source_name, lineno, value);
        synthetic_keys_seen = true;
      } else if (key == "train_per_label") {
        cfg.synthetic.train_per_label = parse_int(source_name, lineno, value);
        synthetic_keys_seen = true;
      } else if (key == "test_per_label") {
        cfg.synthetic.test_per_label = parse_int(source_name, lineno, value);
        synthetic_keys_seen = true;
      } else if (key == "vocab_size") {
        cfg.synthetic.vocab_size = parse_int(source_name, lineno, value);
        synthetic_keys_seen = true;
      } else if (key == "data_seed") {
        cfg.synthetic.seed = static_cast<uint64_t>(parse_int(source_name, lineno, value));
        synthetic_keys_seen = true;
      } else {
        fail(source_name, lineno, "unknown key \"" + key + "\" in [data]");
      }
    }
  }

  if (cfg.manifest && synthetic_keys_seen)
    throw ConfigError(source_name +
                      ": config names both a manifest and synthetic generator settings; "
                      "pick one data source");
  (void)synthetic_requested;  // absent manifest means synthetic, explicit or not

  std::set<uint64_t> unique_seeds(cfg.seeds.begin(), cfg.seeds.end());
  if (unique_seeds.size() != cfg.seeds.size())
    throw ConfigError(source_name + ": duplicate seeds in the seed list");

  try {
    cfg.run.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  if (!cfg.manifest) {
    if (cfg.synthetic.n_tasks < 1 || cfg.synthetic.labels_per_task < 1 ||
        cfg.synthetic.train_per_label < 1 || cfg.synthetic.test_per_label < 1 ||
        cfg.synthetic.vocab_size < 1)
      throw ConfigError(source_name + ": synthetic generator settings must be positive");
  }
  return cfg;
}

CliConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), path, fs::path(path).parent_path().string());
}

std::string dump_config(const CliConfig& cfg) {
  std::ostringstream out;
  out << "[run]\n";
  out << "mode = " << mode_name(cfg.run.mode) << "\n";
  out << "batch_size = " << cfg.run.batch_size << "\n";
  out << "epochs = " << cfg.run.epochs << "\n";
  out << "base_lr = " << format_double(cfg.run.base_lr) << "\n";
  out << "replay_every = " << cfg.run.replay_every << "\n";
  out << "memory_per_task = " << cfg.run.memory_per_task << "\n";
  out << "clusters_per_label = " << cfg.run.clusters_per_label << "\n";
  out << "kappa = " << format_double(cfg.run.temps.kappa) << "\n";
  out << "tau = " << format_double(cfg.run.temps.tau) << "\n";
  out << "t_infer = " << format_double(cfg.run.temps.t_infer) << "\n";
  out << "k = " << cfg.run.k << "\n";
  out << "seeds = ";
  for (size_t i = 0; i < cfg.seeds.size(); ++i) {
    if (i) out << ",";
    out << cfg.seeds[i];
  }
  out << "\n\n[encoder]\n";
  out << "hash_dim = " << cfg.run.hashing.dim << "\n";
  out << "ngram_min = " << cfg.run.hashing.ngram_min << "\n";
  out << "ngram_max = " << cfg.run.hashing.ngram_max << "\n";
  out << "signed_hash = " << (cfg.run.hashing.signed_hash ? "true" : "false") << "\n";
  out << "dims = ";
  for (size_t i = 0; i < cfg.run.encoder_dims.size(); ++i) {
    if (i) out << ",";
    out << cfg.run.encoder_dims[i];
  }
  out << "\n\n[data]\n";
  if (cfg.manifest) {
    out << "manifest = " << *cfg.manifest << "\n";
  } else {
    out << "synthetic = true\n";
    out << "n_tasks = " << cfg.synthetic.n_tasks << "\n";
    out << "labels_per_task = " << cfg.synthetic.labels_per_task << "\n";
    out << "train_per_label = " << cfg.synthetic.train_per_label << "\n";
    out << "test_per_label = " << cfg.synthetic.test_per_label << "\n";
    out << "vocab_size = " << cfg.synthetic.vocab_size << "\n";
    out << "data_seed = " << cfg.synthetic.seed << "\n";
  }
  return out.str();
}

TaskSequence load_tasks(const CliConfig& cfg) {
  if (cfg.manifest) return load_manifest(*cfg.manifest);
  return gen_synthetic_tasks(cfg.synthetic);
}

std::string encoder_task_file(int task_index) {
  return "encoder_task_" + std::to_string(task_index) + ".bin";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_run_dir(const std::string& dir, const CliConfig& cfg, const RunResult& result) {
  fs::create_directories(dir);
  fs::path base(dir);
  write_text_file((base / kConfigFile).string(), dump_config(cfg));
  write_text_file((base / kStepLogFile).string(), step_log_to_csv(result.state.step_log));
  write_text_file((base / kRMatrixFile).string(), result.state.rmatrix.to_csv());
  write_text_file((base / kMetricsFile).string(), result.report.to_json().dump(2) + "\n");
  result.state.buffer.save((base / kMemoryFile).string(), (base / kMemoryManifestFile).string());
  save_encoder(result.state.encoder, (base / kEncoderFinalFile).string());
}

LoadedRun load_run_dir(const std::string& dir) {
  fs::path base(dir);
  if (!fs::is_directory(base)) throw ConfigError("run directory not found: " + dir);
  LoadedRun run;
  run.cfg = parse_config_file((base / kConfigFile).string());
  run.encoder = load_encoder((base / kEncoderFinalFile).string());
  run.buffer =
      MemoryBuffer::load((base / kMemoryFile).string(), (base / kMemoryManifestFile).string());
  nlohmann::json j = nlohmann::json::parse(read_text_file((base / kMetricsFile).string()));
  run.report = MetricsReport::from_json(j);
  return run;
}

nlohmann::json aggregate_runs(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_runs: no reports");

  nlohmann::json j;
  j["mode"] = reports.front().mode;
  j["config_hash"] = reports.front().config_hash;
  std::vector<uint64_t> seeds;
  std::vector<double> accs;
  std::vector<double> bwts;
  bool all_bwt = true;
  for (const MetricsReport& r : reports) {
    seeds.push_back(r.seed);
    accs.push_back(r.acc);
    if (r.bwt)
      bwts.push_back(*r.bwt);
    else
      all_bwt = false;
  }
  j["seeds"] = seeds;
  j["acc"] = {{"mean", mean_of(accs)}, {"std", std_of(accs)}, {"per_seed", accs}};
  if (all_bwt)
    j["bwt"] = {{"mean", mean_of(bwts)}, {"std", std_of(bwts)}, {"per_seed", bwts}};
  else
    j["bwt"] = nullptr;
  return j;
}

std::string ablation_csv(const std::vector<std::pair<std::string, nlohmann::json>>& rows) {
  std::ostringstream out;
  out << "mode,acc_mean,acc_std,bwt_mean,bwt_std\n";
  for (const auto& [mode, agg] : rows) {
    out << mode << "," << format_double(agg.at("acc").at("mean").get<double>()) << ","
        << format_double(agg.at("acc").at("std").get<double>()) << ",";
    if (!agg.at("bwt").is_null()) {
      out << format_double(agg.at("bwt").at("mean").get<double>()) << ","
          << format_double(agg.at("bwt").at("std").get<double>());
    } else {
      out << ",";
    }
    out << "\n";
  }
  return out.str();
}

void write_embedding_dump(const std::string& bin_path, const std::string& labels_path,
                          const Tensor2& reps, const std::vector<Example>& examples,
                          const std::vector<std::string>& kinds) {
  if (static_cast<int>(examples.size()) != reps.rows || examples.size() != kinds.size())
    throw std::invalid_argument("write_embedding_dump: rows, examples, and kinds disagree");

  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open for writing: " + bin_path);
  bin.write("SCCLEMB1", 8);
  uint32_t rows = static_cast<uint32_t>(reps.rows);
  uint32_t cols = static_cast<uint32_t>(reps.cols);
  bin.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  bin.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  bin.write(reinterpret_cast<const char*>(reps.v.data()),
            static_cast<std::streamsize>(reps.v.size() * sizeof(double)));
  if (!bin) throw std::runtime_error("write failed: " + bin_path);

  std::ostringstream labels;
  labels << "row,example_id,label,kind\n";
  for (size_t i = 0; i < examples.size(); ++i)
    labels << i << "," << examples[i].id << "," << examples[i].label << "," << kinds[i] << "\n";
  write_text_file(labels_path, labels.str());
}

Tensor2 read_embedding_dump(const std::string& bin_path) {
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open: " + bin_path);
  char magic[8];
  bin.read(magic, 8);
  if (!bin || std::string(magic, 8) != "SCCLEMB1")
    throw std::runtime_error(bin_path + ": not an embedding dump");
  uint32_t rows = 0, cols = 0;
  bin.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  bin.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  Tensor2 out(static_cast<int>(rows), static_cast<int>(cols));
  bin.read(reinterpret_cast<char*>(out.v.data()),
           static_cast<std::streamsize>(out.v.size() * sizeof(double)));
  if (!bin) throw std::runtime_error(bin_path + ": truncated embedding dump");
  return out;
}

}  // namespace sccl
