#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "sccl/rng.hpp"
#include "sccl/selector.hpp"

using namespace sccl;
namespace fs = std::filesystem;

namespace {

// Two tight groups far apart in 2-d; group membership = index < n_first.
Tensor2 separated_groups(int n_first, int n_second, uint64_t seed) {
  Rng rng(seed);
  Tensor2 pts(n_first + n_second, 2);
  for (int i = 0; i < n_first + n_second; ++i) {
    double cx = i < n_first ? -10.0 : 10.0;
    pts.at(i, 0) = cx + rng.next_uniform(-0.5, 0.5);
    pts.at(i, 1) = rng.next_uniform(-0.5, 0.5);
  }
  return pts;
}

// Inertia of the best 2-way partition, found by brute force over all
// assignments (centroid of each side = mean of its members).
double best_bipartition_inertia(const Tensor2& pts) {
  int n = pts.rows;
  REQUIRE(n <= 16);
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << n) - 1; ++mask) {
    double mean[2][2] = {{0, 0}, {0, 0}};
    int count[2] = {0, 0};
    for (int i = 0; i < n; ++i) {
      int side = (mask >> i) & 1;
      count[side]++;
      mean[side][0] += pts.at(i, 0);
      mean[side][1] += pts.at(i, 1);
    }
    for (int s = 0; s < 2; ++s)
      for (int c = 0; c < 2; ++c) mean[s][c] /= count[s];
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      int side = (mask >> i) & 1;
      double dx = pts.at(i, 0) - mean[side][0];
      double dy = pts.at(i, 1) - mean[side][1];
      inertia += dx * dx + dy * dy;
    }
    best = std::min(best, inertia);
  }
  return best;
}

TaskSpec clustered_task(int per_label, int n_labels, uint64_t seed) {
  Rng rng(seed);
  TaskSpec t;
  t.task_id = 2;
  int64_t id = 0;
  for (int l = 0; l < n_labels; ++l) {
    t.labels.insert(l);
    for (int i = 0; i < per_label; ++i) {
      Example ex;
      ex.id = id++;
      // a few distinct phrases per label so the encoder sees real structure
      ex.text = "label" + std::to_string(l) + " phrase" + std::to_string(i % 5) +
                " tail" + std::to_string(rng.next_int(0, 3));
      ex.label = l;
      ex.task = 2;
      t.train.push_back(ex);
    }
  }
  return t;
}

EncoderState tiny_encoder(uint64_t seed) {
  HashingConfig h;
  h.dim = 32;
  return EncoderState::init(h, {32, 8}, seed);
}

std::set<int64_t> ids_of(const std::vector<Example>& v) {
  std::set<int64_t> s;
  for (const auto& ex : v) s.insert(ex.id);
  return s;
}

}  // namespace

TEST_SUITE("selector") {
  TEST_CASE("k equal to the point count puts every point in its own cluster") {
    Tensor2 pts = separated_groups(3, 3, 1);
    KMeansResult res = kmeans(pts, 6, 42);
    CHECK_FALSE(res.k_clamped);
    CHECK(res.inertia == doctest::Approx(0.0).epsilon(1e-18));
    std::set<int> distinct(res.assignment.begin(), res.assignment.end());
    CHECK(distinct.size() == 6);
  }

  TEST_CASE("two separated groups are split exactly and optimally") {
    for (uint64_t seed : {0ULL, 9ULL, 77ULL}) {
      Tensor2 pts = separated_groups(6, 6, seed);
      KMeansResult res = kmeans(pts, 2, seed + 1);
      REQUIRE(res.centroids.rows == 2);

      // all of group one on one side, all of group two on the other
      for (int i = 1; i < 6; ++i) CHECK(res.assignment[i] == res.assignment[0]);
      for (int i = 7; i < 12; ++i) CHECK(res.assignment[i] == res.assignment[6]);
      CHECK(res.assignment[0] != res.assignment[6]);

      CHECK(res.inertia ==
            doctest::Approx(best_bipartition_inertia(pts)).epsilon(1e-9));
    }
  }

  TEST_CASE("objective trace never increases") {
    Rng rng(5);
    Tensor2 pts(40, 3);
    for (auto& x : pts.v) x = rng.next_uniform(-2, 2);
    KMeansResult res = kmeans(pts, 5, 7);
    REQUIRE(!res.inertia_trace.empty());
    for (size_t i = 1; i < res.inertia_trace.size(); ++i)
      CHECK(res.inertia_trace[i] <= res.inertia_trace[i - 1] + 1e-9);
    CHECK(res.inertia == doctest::Approx(res.inertia_trace.back()));
  }

  TEST_CASE("requesting more clusters than points clamps k") {
    Tensor2 pts = separated_groups(2, 2, 3);
    KMeansResult res = kmeans(pts, 10, 1);
    CHECK(res.k_clamped);
    CHECK(res.centroids.rows == 4);
    CHECK(res.inertia == doctest::Approx(0.0).epsilon(1e-18));
  }

  TEST_CASE("duplicate points still fill every cluster") {
    // Three coincident points with k = 3: after the empty-cluster rescue each
    // cluster must own exactly one point, at zero inertia.
    Tensor2 pts(3, 2);
    for (int i = 0; i < 3; ++i) {
      pts.at(i, 0) = 1.5;
      pts.at(i, 1) = -0.5;
    }
    KMeansResult res = kmeans(pts, 3, 11);
    std::vector<int> counts(3, 0);
    for (int a : res.assignment) counts[a]++;
    for (int c : counts) CHECK(c == 1);
    CHECK(res.inertia == doctest::Approx(0.0).epsilon(1e-18));
  }

  TEST_CASE("clustering is deterministic in the seed") {
    Tensor2 pts = separated_groups(8, 8, 13);
    KMeansResult a = kmeans(pts, 4, 99);
    KMeansResult b = kmeans(pts, 4, 99);
    CHECK(a.assignment == b.assignment);
    CHECK(a.inertia == b.inertia);
    for (size_t i = 0; i < a.centroids.v.size(); ++i)
      CHECK(a.centroids.v[i] == b.centroids.v[i]);
  }

  TEST_CASE("clustering input validation") {
    CHECK_THROWS_AS(kmeans(Tensor2(0, 2), 2, 0), std::invalid_argument);
    CHECK_THROWS_AS(kmeans(Tensor2(3, 2), 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(kmeans(Tensor2(3, 2), -1, 0), std::invalid_argument);
  }

  TEST_CASE("label quotas split a budget evenly when supply allows") {
    auto q = label_quotas({{0, 100}, {1, 100}}, 20);
    REQUIRE(q.size() == 2);
    CHECK(q[0] == std::pair<int, int>{0, 10});
    CHECK(q[1] == std::pair<int, int>{1, 10});
  }

  TEST_CASE("label quota remainder goes to the largest label first") {
    // equal counts: remainder breaks ties by ascending label id
    auto q = label_quotas({{0, 100}, {1, 100}, {2, 100}}, 7);
    CHECK(q[0].second == 3);
    CHECK(q[1].second == 2);
    CHECK(q[2].second == 2);

    // unequal counts: the biggest training split absorbs the extra draw
    q = label_quotas({{0, 10}, {1, 50}, {2, 30}}, 7);
    CHECK(q[0].second == 2);
    CHECK(q[1].second == 3);
    CHECK(q[2].second == 2);
  }

  TEST_CASE("short labels contribute everything and the rest is reallocated") {
    auto q = label_quotas({{0, 2}, {1, 100}, {2, 50}}, 9);
    CHECK(q[0].second == 2);
    CHECK(q[1].second == 4);
    CHECK(q[2].second == 3);

    // budget above capacity: everything is taken, nothing more
    q = label_quotas({{0, 3}, {1, 2}}, 100);
    CHECK(q[0].second == 3);
    CHECK(q[1].second == 2);
  }

  TEST_CASE("label quota validation") {
    CHECK_THROWS_AS(label_quotas({}, 5), std::invalid_argument);
    CHECK_THROWS_AS(label_quotas({{0, 10}}, 0), std::invalid_argument);
  }

  TEST_CASE("cluster draws are proportional to cluster size") {
    CHECK(proportional_counts({30, 10}, 4) == std::vector<int>{3, 1});
    CHECK(proportional_counts({10, 10, 10}, 4) == std::vector<int>{2, 1, 1});
    CHECK(proportional_counts({0, 4}, 2) == std::vector<int>{0, 2});
    CHECK(proportional_counts({5, 1}, 5) == std::vector<int>{4, 1});
  }

  TEST_CASE("cluster draws cap at availability and handle edge quotas") {
    CHECK(proportional_counts({3, 2}, 10) == std::vector<int>{3, 2});
    CHECK(proportional_counts({3, 2}, 0) == std::vector<int>{0, 0});
    CHECK(proportional_counts({}, 4).empty());
    CHECK(proportional_counts({0, 0}, 3) == std::vector<int>{0, 0});
    CHECK_THROWS_AS(proportional_counts({-1, 2}, 1), std::invalid_argument);
  }

  TEST_CASE("a saturated budget keeps the whole training split sorted by id") {
    TaskSpec task = clustered_task(5, 2, 1);
    EncoderState enc = tiny_encoder(1);
    std::vector<Example> sel = select_samples(task, enc, 10, 4, 3);
    REQUIRE(sel.size() == 10);
    for (size_t i = 1; i < sel.size(); ++i) CHECK(sel[i - 1].id < sel[i].id);
    CHECK(ids_of(sel) == ids_of(task.train));

    std::vector<Example> more = select_samples(task, enc, 500, 4, 3);
    CHECK(more.size() == 10);
  }

  TEST_CASE("a tight budget returns m distinct training examples, stratified") {
    TaskSpec task = clustered_task(30, 2, 7);
    EncoderState enc = tiny_encoder(2);
    std::vector<Example> sel = select_samples(task, enc, 20, 4, 5);
    REQUIRE(sel.size() == 20);

    std::set<int64_t> train_ids = ids_of(task.train);
    std::map<int, int> per_label;
    for (size_t i = 0; i < sel.size(); ++i) {
      CHECK(train_ids.count(sel[i].id) == 1);
      if (i > 0) CHECK(sel[i - 1].id < sel[i].id);  // sorted and distinct
      per_label[sel[i].label]++;
    }
    CHECK(per_label[0] == 10);
    CHECK(per_label[1] == 10);
  }

  TEST_CASE("selection is deterministic in the seed and sensitive to it") {
    TaskSpec task = clustered_task(40, 2, 11);
    EncoderState enc = tiny_encoder(3);
    std::vector<Example> a = select_samples(task, enc, 16, 4, 21);
    std::vector<Example> b = select_samples(task, enc, 16, 4, 21);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);

    bool any_differs = false;
    for (uint64_t s : {22ULL, 23ULL, 24ULL}) {
      std::vector<Example> c = select_samples(task, enc, 16, 4, s);
      if (ids_of(c) != ids_of(a)) any_differs = true;
    }
    CHECK(any_differs);
  }

  TEST_CASE("selection input validation") {
    TaskSpec task = clustered_task(4, 1, 0);
    EncoderState enc = tiny_encoder(4);
    CHECK_THROWS_AS(select_samples(task, enc, 0, 4, 1), std::invalid_argument);
    CHECK_THROWS_AS(select_samples(task, enc, 2, 0, 1), std::invalid_argument);
    TaskSpec empty;
    CHECK_THROWS_AS(select_samples(empty, enc, 2, 4, 1), std::invalid_argument);
  }

  TEST_CASE("exemplar files round-trip both text and raw features") {
    fs::path path = fs::temp_directory_path() / "sccl_exemplars_test.jsonl";
    std::vector<Example> out(2);
    out[0].id = 41;
    out[0].text = "kept example";
    out[0].label = 3;
    out[0].task = 1;
    out[1].id = 57;
    out[1].raw_features = std::vector<double>{0.5, -1.25, 3.0};
    out[1].label = 4;
    out[1].task = 1;
    save_exemplars_jsonl(out, path.string());

    std::vector<Example> in = load_exemplars_jsonl(path.string());
    REQUIRE(in.size() == 2);
    CHECK(in[0].id == 41);
    CHECK(in[0].text == "kept example");
    CHECK(in[0].label == 3);
    CHECK(in[0].task == 1);
    CHECK(in[0].has_text());
    CHECK(in[1].id == 57);
    REQUIRE(in[1].raw_features.has_value());
    CHECK((*in[1].raw_features)[1] == -1.25);
    fs::remove(path);
  }

  TEST_CASE("exemplar loader rejects malformed lines with a line number") {
    fs::path path = fs::temp_directory_path() / "sccl_exemplars_bad.jsonl";
    {
      std::ofstream f(path);
      f << R"({"id": 1, "label": 0, "task": 0, "text": "ok"})" << "\n";
      f << "garbage line\n";
    }
    try {
      load_exemplars_jsonl(path.string());
      FAIL("expected throw");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
    fs::remove(path);
    CHECK_THROWS_AS(load_exemplars_jsonl(path.string()), std::runtime_error);
  }
}
