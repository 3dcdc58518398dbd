#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sccl/autodiff.hpp"
#include "sccl/data.hpp"
#include "sccl/tensor.hpp"

namespace sccl {

inline constexpr uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ULL;
// Distinct basis for the sign hash so index and sign are decorrelated.
inline constexpr uint64_t kSignBasis = kFnvOffsetBasis ^ 0x9e3779b97f4a7c15ULL;

uint64_t fnv1a64(std::string_view s, uint64_t basis = kFnvOffsetBasis);

struct HashingConfig {
  int dim = 1024;
  int ngram_min = 1;
  int ngram_max = 2;
  bool signed_hash = true;
};

struct SparseVec {
  int dim = 0;
  std::vector<std::pair<int, double>> entries;  // sorted by index, unique
};

// Lowercases, whitespace-tokenizes, and accumulates +-1 per token n-gram at
// FNV-1a(ngram) mod dim. Empty text gives the zero vector.
SparseVec hash_vectorize(const HashingConfig& cfg, const std::string& text);

// Hashing front end plus an MLP (ReLU between layers, none after the last).
// encode_batch l2-normalizes the final rows.
struct EncoderState {
  HashingConfig hashing;
  struct Layer {
    Tensor2 w;  // in x out
    Tensor2 b;  // 1 x out
  };
  std::vector<Layer> layers;

  int input_dim() const { return layers.front().w.rows; }
  int output_dim() const { return layers.back().w.cols; }

  // Glorot-uniform init over the given dims, e.g. {1024, 256, 128}.
  static EncoderState init(const HashingConfig& hashing, const std::vector<int>& dims,
                           uint64_t seed);
};

// Immutable deep copy of an encoder, the frozen reference for distillation.
class EncoderSnapshot {
 public:
  explicit EncoderSnapshot(const EncoderState& live) : state_(live) {}
  const EncoderState& state() const { return state_; }

 private:
  EncoderState state_;
};

inline EncoderSnapshot snapshot(const EncoderState& state) { return EncoderSnapshot(state); }

// Batch features as sparse rows: hashed text, or raw_features passed through
// (their length must equal input_dim).
SparseRows featurize(const HashingConfig& cfg, int input_dim, std::span<const Example> batch);

// Pure forward pass; rows are unit-norm.
Tensor2 encode_batch(const EncoderState& state, std::span<const Example> batch);
Tensor2 encode_batch(const EncoderSnapshot& snap, std::span<const Example> batch);

// Differentiable forward pass: parameters live on the tape as grad leaves.
struct EncoderVars {
  HashingConfig hashing;
  int input_dim = 0;
  std::vector<std::pair<Var, Var>> layers;  // (w, b)
};
EncoderVars make_encoder_vars(Tape& tape, const EncoderState& state);
Var encode_batch(Tape& tape, const EncoderVars& vars, std::span<const Example> batch);

// Versioned binary checkpoint; round-trips bit-exactly.
void save_encoder(const EncoderState& state, const std::string& path);
EncoderState load_encoder(const std::string& path);

// FNV over the raw parameter bytes; used for drift checks and determinism tests.
uint64_t param_hash(const EncoderState& state);

}  // namespace sccl
