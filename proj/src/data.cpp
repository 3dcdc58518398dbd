#include "sccl/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace sccl {

namespace {

using nlohmann::json;

std::string label_name_of(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<int64_t>());
  throw std::runtime_error("label must be a string or integer");
}

}  // namespace

TaskSpec load_jsonl(const std::string& path, int task_id, int& next_global_label) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  struct Raw {
    std::string text;
    std::optional<std::vector<double>> raw_features;
    std::string label;
    bool is_train;
  };
  std::vector<Raw> rows;
  std::map<std::string, int> label_names;  // sorted by name

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": parse error: " + e.what());
    }
    try {
      if (!rec.is_object()) throw std::runtime_error("record is not an object");
      if (!rec.contains("label")) throw std::runtime_error("missing \"label\"");
      if (!rec.contains("split")) throw std::runtime_error("missing \"split\"");
      bool has_text = rec.contains("text");
      bool has_raw = rec.contains("raw_features");
      if (has_text == has_raw)
        throw std::runtime_error("record needs exactly one of \"text\" / \"raw_features\"");
      Raw r;
      if (has_text) r.text = rec.at("text").get<std::string>();
      if (has_raw) r.raw_features = rec.at("raw_features").get<std::vector<double>>();
      r.label = label_name_of(rec.at("label"));
      std::string split = rec.at("split").get<std::string>();
      if (split != "train" && split != "test")
        throw std::runtime_error("split must be \"train\" or \"test\", got \"" + split + "\"");
      r.is_train = split == "train";
      label_names.emplace(r.label, 0);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (label_names.empty())
    throw std::runtime_error("invalid dataset " + path + ": empty label set");

  for (auto& [name, id] : label_names) id = next_global_label++;

  TaskSpec task;
  task.task_id = task_id;
  for (auto& [name, id] : label_names) task.labels.insert(id);
  int64_t next_id = 0;
  for (Raw& r : rows) {
    Example ex;
    ex.id = static_cast<int64_t>(task_id) * 1000000 + next_id++;
    ex.text = std::move(r.text);
    ex.raw_features = std::move(r.raw_features);
    ex.label = label_names.at(r.label);
    ex.task = task_id;
    (r.is_train ? task.train : task.test).push_back(std::move(ex));
  }
  return task;
}

TaskSequence load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path);
  std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();

  TaskSequence seq;
  seq.order_name = std::filesystem::path(manifest_path).stem().string();
  int next_label = 0;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    auto end = line.find_last_not_of(" \t\r");
    std::filesystem::path p = line.substr(begin, end - begin + 1);
    if (p.is_relative()) p = base / p;
    seq.tasks.push_back(load_jsonl(p.string(), seq.n(), next_label));
  }
  if (seq.tasks.empty()) throw std::runtime_error("manifest lists no datasets: " + manifest_path);
  return seq;
}

namespace {

// Token distributions for a synthetic label: a shared noise pool at the front
// of the vocabulary plus a label-specific slice with rank weights.
struct LabelVocab {
  std::vector<int> signature;
  std::vector<double> cumweight;  // cumulative, normalized
};

LabelVocab make_label_vocab(int label, int n_labels, int vocab_size, int noise_size) {
  LabelVocab lv;
  int pool = vocab_size - noise_size;
  int per_label = std::max(1, pool / n_labels);
  for (int k = 0; k < per_label; ++k) {
    int tok = noise_size + (label + static_cast<int64_t>(k) * n_labels) % pool;
    lv.signature.push_back(tok);
  }
  double total = 0.0;
  for (size_t k = 0; k < lv.signature.size(); ++k) {
    total += 1.0 / (1.0 + static_cast<double>(k));
    lv.cumweight.push_back(total);
  }
  for (double& c : lv.cumweight) c /= total;
  return lv;
}

std::string sample_text(const LabelVocab& lv, int noise_size, Rng& rng) {
  int len = rng.next_int(10, 30);
  std::string out;
  for (int i = 0; i < len; ++i) {
    int tok;
    if (rng.next_double() < 0.35) {
      tok = static_cast<int>(rng.next_below(static_cast<uint64_t>(noise_size)));
    } else {
      double u = rng.next_double();
      size_t k = std::lower_bound(lv.cumweight.begin(), lv.cumweight.end(), u) -
                 lv.cumweight.begin();
      if (k >= lv.signature.size()) k = lv.signature.size() - 1;
      tok = lv.signature[k];
    }
    if (!out.empty()) out += ' ';
    out += 'w' + std::to_string(tok);
  }
  return out;
}

}  // namespace

TaskSequence gen_synthetic_tasks(const SyntheticSpec& spec) {
  if (spec.n_tasks < 1 || spec.labels_per_task < 1 || spec.train_per_label < 1 ||
      spec.test_per_label < 1 || spec.vocab_size < 2)
    throw std::invalid_argument("gen_synthetic_tasks: all counts must be >= 1 (vocab >= 2)");

  int n_labels = spec.n_tasks * spec.labels_per_task;
  int noise_size = std::max(1, spec.vocab_size / 4);

  TaskSequence seq;
  seq.order_name = "synthetic";
  int64_t next_id = 0;
  for (int t = 0; t < spec.n_tasks; ++t) {
    TaskSpec task;
    task.task_id = t;
    for (int l = 0; l < spec.labels_per_task; ++l) {
      int label = t * spec.labels_per_task + l;
      task.labels.insert(label);
      LabelVocab lv = make_label_vocab(label, n_labels, spec.vocab_size, noise_size);
      Rng rng(mix_seed(spec.seed, 0x51u, static_cast<uint64_t>(label)));
      for (int i = 0; i < spec.train_per_label; ++i) {
        Example ex;
        ex.id = next_id++;
        ex.text = sample_text(lv, noise_size, rng);
        ex.label = label;
        ex.task = t;
        task.train.push_back(std::move(ex));
      }
      for (int i = 0; i < spec.test_per_label; ++i) {
        Example ex;
        ex.id = next_id++;
        ex.text = sample_text(lv, noise_size, rng);
        ex.label = label;
        ex.task = t;
        task.test.push_back(std::move(ex));
      }
    }
    seq.tasks.push_back(std::move(task));
  }
  return seq;
}

std::vector<std::vector<Example>> label_blocks(const std::vector<Example>& pool, Rng& rng) {
  std::map<int, std::vector<Example>> by_label;
  for (const Example& ex : pool) by_label[ex.label].push_back(ex);

  std::vector<std::vector<Example>> blocks;
  for (auto& [label, group] : by_label) {
    rng.shuffle(group);
    size_t i = 0;
    while (i < group.size()) {
      size_t remaining = group.size() - i;
      // a remainder of 3 stays one block so no label ends up alone
      size_t take = (remaining == 3 || remaining == 1) ? remaining : 2;
      blocks.emplace_back(group.begin() + i, group.begin() + i + take);
      i += take;
    }
  }
  rng.shuffle(blocks);
  return blocks;
}

std::vector<std::vector<Example>> batch_iter(const TaskSpec& task, int batch_size,
                                             uint64_t seed, int epoch) {
  if (batch_size < 2) throw std::invalid_argument("batch_iter: batch_size must be >= 2");
  if (task.train.empty()) return {};

  Rng rng(mix_seed(seed, static_cast<uint64_t>(epoch)));
  std::vector<std::vector<Example>> blocks = label_blocks(task.train, rng);

  std::vector<std::vector<Example>> batches;
  std::vector<Example> cur;
  for (auto& block : blocks) {
    if (!cur.empty() && cur.size() + block.size() > static_cast<size_t>(batch_size)) {
      batches.push_back(std::move(cur));
      cur.clear();
    }
    for (Example& ex : block) {
      cur.push_back(std::move(ex));
      if (cur.size() == static_cast<size_t>(batch_size)) {
        // only a block larger than batch_size is ever split here
        batches.push_back(std::move(cur));
        cur.clear();
      }
    }
  }
  if (!cur.empty()) {
    if (cur.size() >= 2 || batches.empty()) {
      batches.push_back(std::move(cur));
    } else {
      for (Example& ex : cur) batches.back().push_back(std::move(ex));
    }
  }
  return batches;
}

}  // namespace sccl
