#include "sccl/metrics.hpp"

#include <sstream>
#include <stdexcept>

#include "sccl/format.hpp"
#include "sccl/knn.hpp"

namespace sccl {

RMatrix::RMatrix(int n) : n_(n) {
  if (n <= 0) throw std::invalid_argument("RMatrix: task count must be positive");
  cells_.assign(static_cast<size_t>(n) * n, std::nullopt);
}

int RMatrix::index(int i, int j) const {
  if (i < 0 || i >= n_ || j < 0 || j > i)
    throw std::invalid_argument("RMatrix: entry (" + std::to_string(i) + ", " +
                                std::to_string(j) + ") outside the lower triangle of n=" +
                                std::to_string(n_));
  return i * n_ + j;
}

void RMatrix::set(int i, int j, double value) {
  if (!(value >= 0.0 && value <= 1.0))
    throw std::invalid_argument("RMatrix: accuracy " + format_double(value) +
                                " outside [0, 1]");
  cells_[index(i, j)] = value;
}

double RMatrix::get(int i, int j) const {
  const std::optional<double>& c = cells_[index(i, j)];
  if (!c)
    throw std::logic_error("RMatrix: entry (" + std::to_string(i) + ", " + std::to_string(j) +
                           ") not filled");
  return *c;
}

bool RMatrix::is_set(int i, int j) const { return cells_[index(i, j)].has_value(); }

std::vector<double> RMatrix::bottom_row() const {
  std::vector<double> row;
  row.reserve(n_);
  for (int j = 0; j < n_; ++j) row.push_back(get(n_ - 1, j));
  return row;
}

std::string RMatrix::to_csv() const {
  std::ostringstream out;
  out << "after_task";
  for (int j = 0; j < n_; ++j) out << ",task_" << j;
  out << "\n";
  for (int i = 0; i < n_; ++i) {
    out << i;
    for (int j = 0; j < n_; ++j) {
      out << ",";
      if (j <= i && is_set(i, j)) out << format_double(get(i, j));
    }
    out << "\n";
  }
  return out.str();
}

RMatrix RMatrix::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("R-matrix CSV: empty input");
  int n = 0;
  for (char c : line)
    if (c == ',') n++;
  if (n == 0) throw std::runtime_error("R-matrix CSV: no task columns in header");

  RMatrix r(n);
  int i = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (i >= n) throw std::runtime_error("R-matrix CSV: more rows than tasks");
    std::istringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ','))
      throw std::runtime_error("R-matrix CSV: malformed row " + std::to_string(i));
    for (int j = 0; j < n; ++j) {
      if (!std::getline(row, cell, ',')) cell.clear();
      if (!cell.empty()) r.set(i, j, std::stod(cell));
    }
    i++;
  }
  if (i != n) throw std::runtime_error("R-matrix CSV: expected " + std::to_string(n) + " rows");
  return r;
}

double acc(const RMatrix& r) {
  double total = 0.0;
  for (int j = 0; j < r.n(); ++j) total += r.get(r.n() - 1, j);
  return total / r.n();
}

std::optional<double> bwt(const RMatrix& r) {
  if (r.n() < 2) return std::nullopt;
  double total = 0.0;
  for (int i = 0; i < r.n() - 1; ++i) total += r.get(r.n() - 1, i) - r.get(i, i);
  return total / (r.n() - 1);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["acc"] = acc;
  if (bwt)
    j["bwt"] = *bwt;
  else
    j["bwt"] = nullptr;
  j["final_accuracies"] = final_accuracies;
  j["mode"] = mode;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["total_steps"] = total_steps;
  j["total_replay_steps"] = total_replay_steps;
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.acc = j.at("acc").get<double>();
  if (!j.at("bwt").is_null()) r.bwt = j.at("bwt").get<double>();
  r.final_accuracies = j.at("final_accuracies").get<std::vector<double>>();
  r.mode = j.at("mode").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.total_steps = j.at("total_steps").get<int64_t>();
  r.total_replay_steps = j.at("total_replay_steps").get<int64_t>();
  return r;
}

std::vector<SweepRow> knn_sweep(const MemoryBuffer& buf, const std::vector<TaskSpec>& tasks,
                                const EncoderState& encoder, const std::vector<int>& k_values,
                                double T) {
  if (tasks.empty()) throw std::invalid_argument("knn_sweep: no tasks");
  int min_criterion = 0;
  for (size_t i = 0; i < tasks.size(); ++i) {
    int n = static_cast<int>(buf.task_exemplars(tasks[i].task_id).size());
    min_criterion = (i == 0) ? n : std::min(min_criterion, n);
  }

  std::vector<SweepRow> rows;
  rows.reserve(k_values.size());
  for (int k : k_values) {
    if (k < 1) throw std::invalid_argument("knn_sweep: k must be >= 1");
    SweepRow row;
    row.k = k;
    row.k_clamped = k > min_criterion;
    double total = 0.0;
    for (const TaskSpec& task : tasks) total += evaluate_task(buf, task, encoder, k, T);
    row.acc = total / static_cast<double>(tasks.size());
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "k,acc,k_clamped\n";
  for (const SweepRow& r : rows)
    out << r.k << "," << format_double(r.acc) << "," << (r.k_clamped ? 1 : 0) << "\n";
  return out.str();
}

}  // namespace sccl
