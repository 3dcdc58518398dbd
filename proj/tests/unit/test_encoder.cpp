#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sccl/encoder.hpp"

using namespace sccl;
namespace fs = std::filesystem;

namespace {

Example text_example(int64_t id, const std::string& text, int label = 0) {
  Example ex;
  ex.id = id;
  ex.text = text;
  ex.label = label;
  return ex;
}

HashingConfig small_hashing() {
  HashingConfig h;
  h.dim = 64;
  return h;
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("fnv1a64 matches the reference value for a known token") {
    CHECK(fnv1a64("the") % 1024 == 380);
    CHECK(fnv1a64("") == kFnvOffsetBasis);
    CHECK(fnv1a64("a") != fnv1a64("b"));
    CHECK(fnv1a64("ab") != fnv1a64("ba"));
    // the sign basis decorrelates sign from slot
    CHECK(fnv1a64("the", kSignBasis) != fnv1a64("the"));
  }

  TEST_CASE("hash_vectorize folds case and includes bigrams") {
    HashingConfig cfg;
    cfg.dim = 1 << 16;
    SparseVec lower = hash_vectorize(cfg, "the quick fox");
    SparseVec upper = hash_vectorize(cfg, "THE Quick FOX");
    CHECK(lower.entries == upper.entries);

    // unigrams {the, quick, fox} + bigrams {the quick, quick fox}
    double mass = 0.0;
    for (auto [idx, val] : lower.entries) {
      CHECK(idx >= 0);
      CHECK(idx < cfg.dim);
      mass += std::fabs(val);
    }
    CHECK(mass == doctest::Approx(5.0).epsilon(1e-12));

    HashingConfig uni = cfg;
    uni.ngram_max = 1;
    double uni_mass = 0.0;
    for (auto [idx, val] : hash_vectorize(uni, "the quick fox").entries) uni_mass += std::fabs(val);
    CHECK(uni_mass == doctest::Approx(3.0).epsilon(1e-12));
  }

  TEST_CASE("hash_vectorize output is sorted, unique, and in range") {
    HashingConfig cfg = small_hashing();
    SparseVec v = hash_vectorize(cfg, "alpha beta gamma delta epsilon zeta eta theta");
    CHECK(v.dim == cfg.dim);
    int prev = -1;
    for (auto [idx, val] : v.entries) {
      CHECK(idx > prev);  // strictly increasing => sorted and unique
      prev = idx;
      CHECK(idx < cfg.dim);
      CHECK(val != 0.0);
    }
  }

  TEST_CASE("hash_vectorize of empty or whitespace text is the zero vector") {
    HashingConfig cfg = small_hashing();
    CHECK(hash_vectorize(cfg, "").entries.empty());
    CHECK(hash_vectorize(cfg, "   \t  ").entries.empty());
  }

  TEST_CASE("unsigned hashing accumulates only +1 contributions") {
    HashingConfig cfg = small_hashing();
    cfg.signed_hash = false;
    SparseVec v = hash_vectorize(cfg, "one two three four five six");
    double total = 0.0;
    for (auto [idx, val] : v.entries) {
      CHECK(val > 0.0);
      total += val;
    }
    // 6 unigrams + 5 bigrams, all positive, possibly sharing slots
    CHECK(total == doctest::Approx(11.0).epsilon(1e-12));
  }

  TEST_CASE("init produces Glorot-bounded weights and zero biases") {
    HashingConfig h = small_hashing();
    EncoderState enc = EncoderState::init(h, {64, 32, 16}, 5);
    REQUIRE(enc.layers.size() == 2);
    CHECK(enc.input_dim() == 64);
    CHECK(enc.output_dim() == 16);
    CHECK(enc.layers[0].w.rows == 64);
    CHECK(enc.layers[0].w.cols == 32);
    CHECK(enc.layers[1].w.rows == 32);
    CHECK(enc.layers[1].w.cols == 16);

    for (size_t l = 0; l < enc.layers.size(); ++l) {
      double bound = std::sqrt(6.0 / (enc.layers[l].w.rows + enc.layers[l].w.cols));
      bool any_nonzero = false;
      for (double x : enc.layers[l].w.v) {
        CHECK(std::fabs(x) <= bound);
        if (x != 0.0) any_nonzero = true;
      }
      CHECK(any_nonzero);
      for (double b : enc.layers[l].b.v) CHECK(b == 0.0);
      CHECK(enc.layers[l].b.rows == 1);
    }
  }

  TEST_CASE("init is deterministic in the seed") {
    HashingConfig h = small_hashing();
    EncoderState a = EncoderState::init(h, {64, 16}, 7);
    EncoderState b = EncoderState::init(h, {64, 16}, 7);
    EncoderState c = EncoderState::init(h, {64, 16}, 8);
    CHECK(param_hash(a) == param_hash(b));
    CHECK(param_hash(a) != param_hash(c));
    CHECK_THROWS_AS(EncoderState::init(h, {64}, 1), std::invalid_argument);
  }

  TEST_CASE("encode_batch yields unit rows that depend on the text") {
    EncoderState enc = EncoderState::init(small_hashing(), {64, 32, 8}, 3);
    std::vector<Example> batch = {text_example(0, "apple banana pear"),
                                  text_example(1, "stock market crash"),
                                  text_example(2, "apple banana pear")};
    Tensor2 reps = encode_batch(enc, batch);
    REQUIRE(reps.rows == 3);
    REQUIRE(reps.cols == 8);
    for (int i = 0; i < 3; ++i)
      CHECK(lin::row_norm(reps, i) == doctest::Approx(1.0).epsilon(1e-9));
    // identical text encodes identically; different text differs
    double same = 0, diff = 0;
    for (int j = 0; j < 8; ++j) {
      same += std::fabs(reps.at(0, j) - reps.at(2, j));
      diff += std::fabs(reps.at(0, j) - reps.at(1, j));
    }
    CHECK(same == 0.0);
    CHECK(diff > 1e-6);
  }

  TEST_CASE("raw feature examples bypass hashing") {
    EncoderState enc = EncoderState::init(small_hashing(), {64, 8}, 3);
    Example ex;
    ex.id = 0;
    ex.raw_features = std::vector<double>(64, 0.0);
    (*ex.raw_features)[5] = 2.0;
    std::vector<Example> batch = {ex};
    Tensor2 reps = encode_batch(enc, batch);
    CHECK(lin::row_norm(reps, 0) == doctest::Approx(1.0).epsilon(1e-9));

    Example bad = ex;
    bad.raw_features = std::vector<double>(63, 0.0);
    std::vector<Example> bad_batch = {bad};
    try {
      encode_batch(enc, bad_batch);
      FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("dimension error") != std::string::npos);
    }
  }

  TEST_CASE("snapshot is immune to later training of the live encoder") {
    EncoderState enc = EncoderState::init(small_hashing(), {64, 16}, 9);
    std::vector<Example> batch = {text_example(0, "before mutation")};
    EncoderSnapshot snap = snapshot(enc);
    Tensor2 before = encode_batch(snap, batch);
    uint64_t frozen_hash = param_hash(snap.state());

    for (auto& layer : enc.layers)
      for (double& x : layer.w.v) x += 0.5;

    Tensor2 after = encode_batch(snap, batch);
    for (size_t i = 0; i < before.v.size(); ++i) CHECK(before.v[i] == after.v[i]);
    CHECK(param_hash(snap.state()) == frozen_hash);
    CHECK(param_hash(enc) != frozen_hash);
  }

  TEST_CASE("differentiable forward pass matches the pure forward pass") {
    EncoderState enc = EncoderState::init(small_hashing(), {64, 32, 8}, 21);
    std::vector<Example> batch = {text_example(0, "gradient path parity"),
                                  text_example(1, "other sentence entirely")};
    Tensor2 pure = encode_batch(enc, batch);

    Tape tape;
    EncoderVars vars = make_encoder_vars(tape, enc);
    Var reps = encode_batch(tape, vars, batch);
    const Tensor2& taped = tape.value(reps);
    REQUIRE(taped.same_shape(pure));
    for (size_t i = 0; i < pure.v.size(); ++i)
      CHECK(taped.v[i] == doctest::Approx(pure.v[i]).epsilon(1e-14));

    // parameters are registered as gradient leaves
    tape.backward(tape.sum(tape.exp(reps)));
    for (auto [w, b] : vars.layers) {
      CHECK(tape.has_grad(w));
      CHECK(tape.has_grad(b));
    }
  }

  TEST_CASE("checkpoints round-trip bit-exactly") {
    fs::path path = fs::temp_directory_path() / "sccl_enc_test.bin";
    EncoderState enc = EncoderState::init(small_hashing(), {64, 32, 8}, 13);
    enc.hashing.ngram_max = 3;
    enc.hashing.signed_hash = false;
    save_encoder(enc, path.string());
    EncoderState back = load_encoder(path.string());
    CHECK(param_hash(back) == param_hash(enc));
    CHECK(back.hashing.dim == 64);
    CHECK(back.hashing.ngram_max == 3);
    CHECK(back.hashing.signed_hash == false);
    REQUIRE(back.layers.size() == enc.layers.size());
    for (size_t l = 0; l < enc.layers.size(); ++l)
      for (size_t i = 0; i < enc.layers[l].w.v.size(); ++i)
        CHECK(back.layers[l].w.v[i] == enc.layers[l].w.v[i]);
    fs::remove(path);
  }

  TEST_CASE("loading garbage or a missing file fails") {
    fs::path path = fs::temp_directory_path() / "sccl_enc_garbage.bin";
    {
      std::ofstream out(path, std::ios::binary);
      out << "this is not a checkpoint";
    }
    CHECK_THROWS_AS(load_encoder(path.string()), std::runtime_error);
    fs::remove(path);
    CHECK_THROWS_AS(load_encoder(path.string()), std::runtime_error);
  }

  TEST_CASE("param_hash reacts to any single-parameter change") {
    EncoderState enc = EncoderState::init(small_hashing(), {64, 8}, 17);
    uint64_t h0 = param_hash(enc);
    enc.layers[0].b.at(0, 3) += 1e-12;
    CHECK(param_hash(enc) != h0);
  }
}
