#include "sccl/selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sccl/rng.hpp"

namespace sccl {
namespace {

double sq_dist(const Tensor2& a, int ra, const Tensor2& b, int rb) {
  double d = 0.0;
  const double* pa = a.row(ra);
  const double* pb = b.row(rb);
  for (int c = 0; c < a.cols; ++c) {
    double diff = pa[c] - pb[c];
    d += diff * diff;
  }
  return d;
}

}  // namespace

KMeansResult kmeans(const Tensor2& points, int k, uint64_t seed, int max_iter, double tol) {
  const int n = points.rows;
  const int d = points.cols;
  if (n == 0) throw std::invalid_argument("kmeans: no points");
  if (k <= 0) throw std::invalid_argument("kmeans: k must be positive");

  KMeansResult res;
  if (k > n) {
    k = n;
    res.k_clamped = true;
  }

  Rng rng(seed);

  // k-means++ seeding: first centroid uniform, then proportional to the
  // squared distance from the nearest chosen centroid.
  std::vector<int> chosen;
  chosen.push_back(rng.next_int(0, n - 1));
  std::vector<double> d2(n, 0.0);
  while (static_cast<int>(chosen.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c : chosen) best = std::min(best, sq_dist(points, i, points, c));
      d2[i] = best;
      total += best;
    }
    int pick = -1;
    if (total > 0.0) {
      double r = rng.next_double() * total;
      double cum = 0.0;
      for (int i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum >= r) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = n - 1;  // guard against accumulated rounding
    } else {
      pick = rng.next_int(0, n - 1);  // all points coincide with a centroid
    }
    chosen.push_back(pick);
  }

  Tensor2 centroids(k, d);
  for (int c = 0; c < k; ++c)
    std::copy(points.row(chosen[c]), points.row(chosen[c]) + d, centroids.row(c));

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    // Assignment step; ties go to the lowest centroid index.
    for (int i = 0; i < n; ++i) {
      int best_c = 0;
      double best_d = sq_dist(points, i, centroids, 0);
      for (int c = 1; c < k; ++c) {
        double dist = sq_dist(points, i, centroids, c);
        if (dist < best_d) {
          best_d = dist;
          best_c = c;
        }
      }
      assign[i] = best_c;
    }

    // Re-seed empty clusters to the point farthest from its centroid. The
    // stolen point is reassigned so a later empty cluster picks a different
    // one. Ties go to the lowest point index.
    std::vector<int> counts(k, 0);
    for (int a : assign) counts[a]++;
    for (int c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      int far_i = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[assign[i]] <= 1) continue;  // do not empty another cluster
        double dist = sq_dist(points, i, centroids, assign[i]);
        if (dist > far_d) {
          far_d = dist;
          far_i = i;
        }
      }
      if (far_i < 0) continue;  // every remaining cluster is a singleton
      counts[assign[far_i]]--;
      assign[far_i] = c;
      counts[c] = 1;
      std::copy(points.row(far_i), points.row(far_i) + d, centroids.row(c));
    }

    double inertia = 0.0;
    for (int i = 0; i < n; ++i) inertia += sq_dist(points, i, centroids, assign[i]);
    res.inertia_trace.push_back(inertia);
    res.inertia = inertia;
    res.assignment = assign;

    // Update step: move each centroid to the mean of its members.
    Tensor2 next(k, d);
    std::vector<int> sizes(k, 0);
    for (int i = 0; i < n; ++i) {
      sizes[assign[i]]++;
      double* dst = next.row(assign[i]);
      const double* src = points.row(i);
      for (int c = 0; c < d; ++c) dst[c] += src[c];
    }
    double max_shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (sizes[c] == 0) {
        std::copy(centroids.row(c), centroids.row(c) + d, next.row(c));
        continue;
      }
      double inv = 1.0 / sizes[c];
      double shift_sq = 0.0;
      for (int j = 0; j < d; ++j) {
        next.row(c)[j] *= inv;
        double diff = next.row(c)[j] - centroids.row(c)[j];
        shift_sq += diff * diff;
      }
      max_shift = std::max(max_shift, std::sqrt(shift_sq));
    }
    centroids = next;
    if (max_shift < tol) break;
  }

  res.centroids = std::move(centroids);
  return res;
}

std::vector<std::pair<int, int>> label_quotas(const std::vector<std::pair<int, int>>& train_counts,
                                              int m) {
  if (train_counts.empty()) throw std::invalid_argument("label_quotas: no labels");
  if (m <= 0) throw std::invalid_argument("label_quotas: m must be positive");

  const int n_labels = static_cast<int>(train_counts.size());
  int capacity = 0;
  for (const auto& [label, count] : train_counts) {
    (void)label;
    capacity += count;
  }
  const int target = std::min(m, capacity);
  const int base = m / n_labels;

  std::vector<std::pair<int, int>> alloc;
  alloc.reserve(train_counts.size());
  for (const auto& [label, count] : train_counts) alloc.emplace_back(label, std::min(base, count));

  // Hand out the remainder — and any shortfall from labels that could not
  // absorb their base quota — one draw at a time to labels with spare
  // capacity, largest training split first (ties: ascending label id).
  std::vector<int> order(n_labels);
  for (int i = 0; i < n_labels; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (train_counts[a].second != train_counts[b].second)
      return train_counts[a].second > train_counts[b].second;
    return train_counts[a].first < train_counts[b].first;
  });

  int total = 0;
  for (const auto& [label, got] : alloc) {
    (void)label;
    total += got;
  }
  while (total < target) {
    bool progressed = false;
    for (int idx : order) {
      if (total >= target) break;
      if (alloc[idx].second < train_counts[idx].second) {
        alloc[idx].second++;
        total++;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return alloc;
}

std::vector<int> proportional_counts(const std::vector<int>& cluster_sizes, int quota) {
  const int k = static_cast<int>(cluster_sizes.size());
  std::vector<int> out(k, 0);
  if (k == 0 || quota <= 0) return out;
  long long total = 0;
  for (int s : cluster_sizes) {
    if (s < 0) throw std::invalid_argument("proportional_counts: negative cluster size");
    total += s;
  }
  if (total == 0) return out;
  if (quota >= total) {
    for (int c = 0; c < k; ++c) out[c] = cluster_sizes[c];
    return out;
  }

  std::vector<double> frac(k, 0.0);
  int assigned = 0;
  for (int c = 0; c < k; ++c) {
    double share = static_cast<double>(quota) * cluster_sizes[c] / static_cast<double>(total);
    out[c] = std::min(static_cast<int>(std::floor(share)), cluster_sizes[c]);
    frac[c] = share - std::floor(share);
    assigned += out[c];
  }

  // Largest-remainder rounding; ties go to the lower cluster index.
  std::vector<int> order(k);
  for (int c = 0; c < k; ++c) order[c] = c;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (frac[a] != frac[b]) return frac[a] > frac[b];
    return a < b;
  });
  while (assigned < quota) {
    bool progressed = false;
    for (int c : order) {
      if (assigned >= quota) break;
      if (out[c] < cluster_sizes[c]) {
        out[c]++;
        assigned++;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return out;
}

std::vector<Example> select_samples(const TaskSpec& task, const EncoderState& encoder, int m,
                                    int clusters_per_label, uint64_t seed) {
  if (task.train.empty()) throw std::invalid_argument("select_samples: task has no training split");
  if (m <= 0) throw std::invalid_argument("select_samples: m must be positive");
  if (clusters_per_label <= 0)
    throw std::invalid_argument("select_samples: clusters_per_label must be positive");

  // Saturated budget: keep the whole training split.
  if (m >= static_cast<int>(task.train.size())) {
    std::vector<Example> all = task.train;
    std::sort(all.begin(), all.end(),
              [](const Example& a, const Example& b) { return a.id < b.id; });
    return all;
  }

  // Group training examples by label (map iteration = ascending label).
  std::map<int, std::vector<int>> by_label;
  for (int i = 0; i < static_cast<int>(task.train.size()); ++i)
    by_label[task.train[i].label].push_back(i);

  std::vector<std::pair<int, int>> counts;
  counts.reserve(by_label.size());
  for (const auto& [label, idxs] : by_label)
    counts.emplace_back(label, static_cast<int>(idxs.size()));
  std::vector<std::pair<int, int>> quotas = label_quotas(counts, m);

  std::vector<Example> picked;
  picked.reserve(m);
  for (const auto& [label, quota] : quotas) {
    if (quota == 0) continue;
    const std::vector<int>& members = by_label.at(label);

    std::vector<Example> group;
    group.reserve(members.size());
    for (int i : members) group.push_back(task.train[i]);
    Tensor2 reps = encode_batch(encoder, group);

    KMeansResult km =
        kmeans(reps, std::min(clusters_per_label, static_cast<int>(group.size())),
               mix_seed(seed, 0x6b6dULL, static_cast<uint64_t>(label)));
    const int k = km.centroids.rows;
    std::vector<std::vector<int>> cluster_members(k);
    for (int i = 0; i < static_cast<int>(group.size()); ++i)
      cluster_members[km.assignment[i]].push_back(i);

    std::vector<int> sizes(k, 0);
    for (int c = 0; c < k; ++c) sizes[c] = static_cast<int>(cluster_members[c].size());
    std::vector<int> draws = proportional_counts(sizes, quota);

    Rng draw_rng(mix_seed(seed, 0xd4a0ULL, static_cast<uint64_t>(label)));
    for (int c = 0; c < k; ++c) {
      if (draws[c] == 0) continue;
      std::vector<int> pool = cluster_members[c];
      draw_rng.shuffle(pool);
      for (int j = 0; j < draws[c]; ++j) picked.push_back(group[pool[j]]);
    }
  }

  std::sort(picked.begin(), picked.end(),
            [](const Example& a, const Example& b) { return a.id < b.id; });
  return picked;
}

void save_exemplars_jsonl(const std::vector<Example>& exemplars, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const Example& ex : exemplars) {
    nlohmann::json j;
    j["id"] = ex.id;
    j["label"] = ex.label;
    j["task"] = ex.task;
    if (ex.has_text())
      j["text"] = ex.text;
    else
      j["raw_features"] = *ex.raw_features;
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<Example> load_exemplars_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<Example> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": invalid JSON");
    Example ex;
    ex.id = j.at("id").get<int64_t>();
    ex.label = j.at("label").get<int>();
    ex.task = j.at("task").get<int>();
    if (j.contains("text"))
      ex.text = j.at("text").get<std::string>();
    else
      ex.raw_features = j.at("raw_features").get<std::vector<double>>();
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace sccl
