#include "sccl/memory.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sccl/rng.hpp"
#include "sccl/selector.hpp"

namespace sccl {

void MemoryBuffer::add_task_exemplars(int task_id, std::vector<Example> exemplars) {
  if (tasks_.count(task_id))
    throw std::logic_error("memory buffer already holds task " + std::to_string(task_id));
  std::set<int64_t> seen;
  for (const Example& ex : exemplars) {
    if (ex.task != task_id)
      throw std::invalid_argument("exemplar " + std::to_string(ex.id) + " belongs to task " +
                                  std::to_string(ex.task) + ", not " + std::to_string(task_id));
    if (!seen.insert(ex.id).second)
      throw std::invalid_argument("duplicate exemplar id " + std::to_string(ex.id) +
                                  " for task " + std::to_string(task_id));
  }
  tasks_.emplace(task_id, std::move(exemplars));
}

const std::vector<Example>& MemoryBuffer::task_exemplars(int task_id) const {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end())
    throw std::out_of_range("task " + std::to_string(task_id) + " not in memory buffer");
  return it->second;
}

std::vector<int> MemoryBuffer::task_ids() const {
  std::vector<int> ids;
  ids.reserve(tasks_.size());
  for (const auto& [id, exemplars] : tasks_) {
    (void)exemplars;
    ids.push_back(id);
  }
  return ids;
}

int MemoryBuffer::size() const {
  int n = 0;
  for (const auto& [id, exemplars] : tasks_) {
    (void)id;
    n += static_cast<int>(exemplars.size());
  }
  return n;
}

std::vector<Example> MemoryBuffer::replay_batch(int batch_size, uint64_t seed, int step) const {
  if (batch_size < 2) throw std::invalid_argument("replay_batch: batch_size must be >= 2");
  if (tasks_.empty()) return {};

  std::vector<Example> pool;
  pool.reserve(size());
  for (const auto& [id, exemplars] : tasks_) {
    (void)id;
    pool.insert(pool.end(), exemplars.begin(), exemplars.end());
  }
  if (static_cast<int>(pool.size()) <= batch_size) return pool;

  Rng rng(mix_seed(seed, 0x3e91ULL, static_cast<uint64_t>(step)));
  std::vector<std::vector<Example>> blocks = label_blocks(pool, rng);

  // Greedy fill: take shuffled same-label blocks whole so every included
  // label keeps its positive pair; skip blocks that no longer fit.
  std::vector<Example> batch;
  batch.reserve(batch_size);
  for (const std::vector<Example>& block : blocks) {
    if (static_cast<int>(batch.size() + block.size()) > batch_size) continue;
    batch.insert(batch.end(), block.begin(), block.end());
    if (static_cast<int>(batch.size()) == batch_size) break;
  }
  return batch;
}

void MemoryBuffer::save(const std::string& exemplar_path, const std::string& manifest_path) const {
  std::vector<Example> all;
  all.reserve(size());
  nlohmann::json manifest;
  manifest["tasks"] = nlohmann::json::array();
  for (const auto& [id, exemplars] : tasks_) {
    all.insert(all.end(), exemplars.begin(), exemplars.end());
    manifest["tasks"].push_back({{"task_id", id}, {"count", exemplars.size()}});
  }
  save_exemplars_jsonl(all, exemplar_path);
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + manifest_path);
  out << manifest.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + manifest_path);
}

MemoryBuffer MemoryBuffer::load(const std::string& exemplar_path,
                                const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open: " + manifest_path);
  nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
  if (manifest.is_discarded())
    throw std::runtime_error(manifest_path + ": invalid JSON");

  std::vector<Example> all = load_exemplars_jsonl(exemplar_path);
  std::map<int, std::vector<Example>> by_task;
  for (Example& ex : all) by_task[ex.task].push_back(std::move(ex));

  MemoryBuffer buf;
  for (const auto& entry : manifest.at("tasks")) {
    int task_id = entry.at("task_id").get<int>();
    size_t count = entry.at("count").get<size_t>();
    auto it = by_task.find(task_id);
    if (it == by_task.end() || it->second.size() != count)
      throw std::runtime_error(manifest_path + ": task " + std::to_string(task_id) +
                               " exemplar count does not match " + exemplar_path);
    buf.add_task_exemplars(task_id, std::move(it->second));
    by_task.erase(it);
  }
  if (!by_task.empty())
    throw std::runtime_error(exemplar_path + ": contains tasks absent from " + manifest_path);
  return buf;
}

}  // namespace sccl
