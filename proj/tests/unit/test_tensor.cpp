#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>

#include "sccl/rng.hpp"
#include "sccl/tensor.hpp"

using namespace sccl;

namespace {

Tensor2 random_tensor(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Tensor2 t(rows, cols);
  for (auto& x : t.v) x = rng.next_uniform(-1.5, 1.5);
  return t;
}

double max_abs_diff(const Tensor2& a, const Tensor2& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::fabs(a.v[i] - b.v[i]));
  return m;
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("constructor and from() basics") {
    Tensor2 z(2, 3);
    CHECK(z.rows == 2);
    CHECK(z.cols == 3);
    CHECK(z.size() == 6);
    for (double x : z.v) CHECK(x == 0.0);

    Tensor2 f = Tensor2::from({{1, 2}, {3, 4}});
    CHECK(f.at(0, 0) == 1);
    CHECK(f.at(1, 1) == 4);
    CHECK_THROWS_AS(Tensor2::from({{1, 2}, {3}}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor2(-1, 2), std::invalid_argument);

    CHECK(Tensor2::scalar(7.5).at(0, 0) == 7.5);
    CHECK(Tensor2::scalar(7.5).size() == 1);
  }

  TEST_CASE("all_finite flags inf and nan") {
    Tensor2 t = Tensor2::from({{1, 2}, {3, 4}});
    CHECK(t.all_finite());
    t.at(1, 0) = std::nan("");
    CHECK_FALSE(t.all_finite());
    t.at(1, 0) = INFINITY;
    CHECK_FALSE(t.all_finite());
  }

  TEST_CASE("matmul against identity and a hand example") {
    Tensor2 a = Tensor2::from({{1, 2}, {3, 4}});
    Tensor2 id = Tensor2::from({{1, 0}, {0, 1}});
    CHECK(max_abs_diff(lin::matmul(a, id), a) == 0.0);
    CHECK(max_abs_diff(lin::matmul(id, a), a) == 0.0);

    // [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]]
    Tensor2 b = Tensor2::from({{5, 6}, {7, 8}});
    Tensor2 expect = Tensor2::from({{19, 22}, {43, 50}});
    CHECK(max_abs_diff(lin::matmul(a, b), expect) == 0.0);
  }

  TEST_CASE("shape mismatches mention a dimension error") {
    Tensor2 a(2, 3), b(2, 3);
    try {
      lin::matmul(a, b);
      FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("dimension error") != std::string::npos);
    }
    CHECK_THROWS_AS(lin::matmul_nt(Tensor2(2, 3), Tensor2(4, 5)), std::invalid_argument);
    CHECK_THROWS_AS(lin::matmul_tn(Tensor2(2, 3), Tensor2(4, 5)), std::invalid_argument);
  }

  TEST_CASE("matmul_nt and matmul_tn match transpose-composed matmul") {
    Tensor2 a = random_tensor(4, 6, 11);
    Tensor2 b = random_tensor(5, 6, 12);
    CHECK(max_abs_diff(lin::matmul_nt(a, b), lin::matmul(a, lin::transpose(b))) < 1e-12);

    Tensor2 c = random_tensor(6, 4, 13);
    Tensor2 d = random_tensor(6, 5, 14);
    CHECK(max_abs_diff(lin::matmul_tn(c, d), lin::matmul(lin::transpose(c), d)) < 1e-12);
  }

  TEST_CASE("transpose is an involution") {
    Tensor2 a = random_tensor(3, 7, 21);
    CHECK(max_abs_diff(lin::transpose(lin::transpose(a)), a) == 0.0);
  }

  TEST_CASE("sparse_matmul agrees with dense matmul") {
    SparseRows s;
    s.rows = 3;
    s.cols = 8;
    s.entries = {{{1, 2.0}, {5, -0.5}}, {}, {{0, 1.0}, {3, 4.0}, {7, 0.25}}};
    Tensor2 w = random_tensor(8, 4, 31);
    CHECK(max_abs_diff(lin::sparse_matmul(s, w), lin::matmul(s.to_dense(), w)) < 1e-12);
    CHECK_THROWS_AS(lin::sparse_matmul(s, Tensor2(7, 4)), std::invalid_argument);
  }

  TEST_CASE("add_bias_inplace broadcasts one row") {
    Tensor2 x = Tensor2::from({{1, 2}, {3, 4}});
    Tensor2 b = Tensor2::from({{10, 20}});
    lin::add_bias_inplace(x, b);
    CHECK(max_abs_diff(x, Tensor2::from({{11, 22}, {13, 24}})) == 0.0);
    Tensor2 bad = Tensor2::from({{1, 2, 3}});
    CHECK_THROWS_AS(lin::add_bias_inplace(x, bad), std::invalid_argument);
  }

  TEST_CASE("relu clips negatives only") {
    Tensor2 x = Tensor2::from({{-1, 0, 2.5}});
    Tensor2 y = lin::relu(x);
    CHECK(max_abs_diff(y, Tensor2::from({{0, 0, 2.5}})) == 0.0);
  }

  TEST_CASE("l2_normalize_rows produces unit rows") {
    Tensor2 x = Tensor2::from({{3, 4}});
    Tensor2 y = lin::l2_normalize_rows(x);
    CHECK(y.at(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(y.at(0, 1) == doctest::Approx(0.8).epsilon(1e-12));

    Tensor2 r = random_tensor(6, 9, 41);
    Tensor2 n = lin::l2_normalize_rows(r);
    for (int i = 0; i < n.rows; ++i)
      CHECK(lin::row_norm(n, i) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("l2_normalize_rows keeps a zero row finite") {
    Tensor2 x(2, 3);
    x.at(1, 0) = 1.0;
    Tensor2 y = lin::l2_normalize_rows(x);
    CHECK(y.all_finite());
    CHECK(y.at(0, 0) == 0.0);
    CHECK(y.at(1, 0) == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("softmax rows sum to one and survive huge logits") {
    Tensor2 x = Tensor2::from({{1, 2, 3}, {1e300, 1e300, -1e300}});
    Tensor2 p = lin::softmax_rows(x);
    CHECK(p.all_finite());
    for (int i = 0; i < p.rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < p.cols; ++j) {
        CHECK(p.at(i, j) >= 0.0);
        s += p.at(i, j);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(p.at(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.at(1, 2) == 0.0);
  }

  TEST_CASE("softmax matches direct formula on moderate values") {
    Tensor2 x = Tensor2::from({{0.1, -0.4, 1.2}});
    Tensor2 p = lin::softmax_rows(x);
    double den = std::exp(0.1) + std::exp(-0.4) + std::exp(1.2);
    CHECK(p.at(0, 0) == doctest::Approx(std::exp(0.1) / den).epsilon(1e-12));
    CHECK(p.at(0, 2) == doctest::Approx(std::exp(1.2) / den).epsilon(1e-12));
  }

  TEST_CASE("logsumexp_rows matches the naive sum and resists overflow") {
    Tensor2 x = Tensor2::from({{0.5, -1.0, 2.0}});
    Tensor2 l = lin::logsumexp_rows(x);
    CHECK(l.rows == 1);
    CHECK(l.cols == 1);
    double naive = std::log(std::exp(0.5) + std::exp(-1.0) + std::exp(2.0));
    CHECK(l.at(0, 0) == doctest::Approx(naive).epsilon(1e-12));

    Tensor2 big = Tensor2::from({{1000.0, 1000.0}});
    CHECK(lin::logsumexp_rows(big).at(0, 0) ==
          doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
  }

  TEST_CASE("sum and row_norm") {
    Tensor2 x = Tensor2::from({{1, -2}, {3, 4}});
    CHECK(lin::sum(x) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(lin::row_norm(x, 1) == doctest::Approx(5.0).epsilon(1e-12));
  }
}
