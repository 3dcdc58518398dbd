#include "sccl/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "sccl/rng.hpp"

namespace sccl {

uint64_t fnv1a64(std::string_view s, uint64_t basis) {
  uint64_t h = basis;
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

SparseVec hash_vectorize(const HashingConfig& cfg, const std::string& text) {
  if (cfg.dim < 2) throw std::invalid_argument("hash_vectorize: dim must be >= 2");
  if (cfg.ngram_min > cfg.ngram_max || cfg.ngram_min < 1)
    throw std::invalid_argument("hash_vectorize: bad ngram range");

  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));

  std::map<int, double> acc;
  for (int n = cfg.ngram_min; n <= cfg.ngram_max; ++n) {
    if (static_cast<size_t>(n) > tokens.size()) break;
    for (size_t i = 0; i + n <= tokens.size(); ++i) {
      std::string gram = tokens[i];
      for (int k = 1; k < n; ++k) gram += ' ' + tokens[i + k];
      int idx = static_cast<int>(fnv1a64(gram) % static_cast<uint64_t>(cfg.dim));
      double val = 1.0;
      if (cfg.signed_hash && (fnv1a64(gram, kSignBasis) & 1)) val = -1.0;
      acc[idx] += val;
    }
  }

  SparseVec out;
  out.dim = cfg.dim;
  for (auto [idx, val] : acc)
    if (val != 0.0) out.entries.emplace_back(idx, val);
  return out;
}

EncoderState EncoderState::init(const HashingConfig& hashing, const std::vector<int>& dims,
                                uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("EncoderState: need at least one layer");
  if (dims.front() != hashing.dim)
    throw std::invalid_argument("EncoderState: first dim must equal hashing dim");
  EncoderState s;
  s.hashing = hashing;
  Rng rng(mix_seed(seed, 0xe11c0de5ULL));
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    int fan_in = dims[l], fan_out = dims[l + 1];
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Layer layer{Tensor2(fan_in, fan_out), Tensor2(1, fan_out)};
    for (double& w : layer.w.v) w = rng.next_uniform(-bound, bound);
    s.layers.push_back(std::move(layer));
  }
  return s;
}

SparseRows featurize(const HashingConfig& cfg, int input_dim, std::span<const Example> batch) {
  SparseRows rows;
  rows.rows = static_cast<int>(batch.size());
  rows.cols = input_dim;
  rows.entries.resize(batch.size());
  for (size_t r = 0; r < batch.size(); ++r) {
    const Example& ex = batch[r];
    if (ex.raw_features) {
      if (static_cast<int>(ex.raw_features->size()) != input_dim)
        throw std::invalid_argument(
            "dimension error: raw_features length " + std::to_string(ex.raw_features->size()) +
            " != encoder input dim " + std::to_string(input_dim));
      auto& entries = rows.entries[r];
      for (int c = 0; c < input_dim; ++c) {
        double x = (*ex.raw_features)[c];
        if (x != 0.0) entries.emplace_back(c, x);
      }
    } else {
      rows.entries[r] = hash_vectorize(cfg, ex.text).entries;
    }
  }
  return rows;
}

Tensor2 encode_batch(const EncoderState& state, std::span<const Example> batch) {
  if (batch.empty()) throw std::invalid_argument("encode_batch: empty batch");
  SparseRows x = featurize(state.hashing, state.input_dim(), batch);
  Tensor2 h = lin::sparse_matmul(x, state.layers[0].w);
  lin::add_bias_inplace(h, state.layers[0].b);
  for (size_t l = 1; l < state.layers.size(); ++l) {
    h = lin::relu(h);
    h = lin::matmul(h, state.layers[l].w);
    lin::add_bias_inplace(h, state.layers[l].b);
  }
  return lin::l2_normalize_rows(h);
}

Tensor2 encode_batch(const EncoderSnapshot& snap, std::span<const Example> batch) {
  return encode_batch(snap.state(), batch);
}

EncoderVars make_encoder_vars(Tape& tape, const EncoderState& state) {
  EncoderVars vars;
  vars.hashing = state.hashing;
  vars.input_dim = state.input_dim();
  for (const auto& layer : state.layers)
    vars.layers.emplace_back(tape.leaf(layer.w, true), tape.leaf(layer.b, true));
  return vars;
}

Var encode_batch(Tape& tape, const EncoderVars& vars, std::span<const Example> batch) {
  if (batch.empty()) throw std::invalid_argument("encode_batch: empty batch");
  SparseRows x = featurize(vars.hashing, vars.input_dim, batch);
  Var h = tape.sparse_matmul(x, vars.layers[0].first);
  h = tape.add_bias(h, vars.layers[0].second);
  for (size_t l = 1; l < vars.layers.size(); ++l) {
    h = tape.relu(h);
    h = tape.matmul(h, vars.layers[l].first);
    h = tape.add_bias(h, vars.layers[l].second);
  }
  return tape.l2_normalize_rows(h);
}

namespace {
constexpr char kMagic[8] = {'S', 'C', 'C', 'L', 'E', 'N', 'C', '1'};

void write_u32(std::ostream& out, uint32_t x) { out.write(reinterpret_cast<const char*>(&x), 4); }
uint32_t read_u32(std::istream& in) {
  uint32_t x = 0;
  in.read(reinterpret_cast<char*>(&x), 4);
  return x;
}
}  // namespace

void save_encoder(const EncoderState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  write_u32(out, static_cast<uint32_t>(state.hashing.dim));
  write_u32(out, static_cast<uint32_t>(state.hashing.ngram_min));
  write_u32(out, static_cast<uint32_t>(state.hashing.ngram_max));
  write_u32(out, state.hashing.signed_hash ? 1 : 0);
  write_u32(out, static_cast<uint32_t>(state.layers.size()));
  for (const auto& layer : state.layers) {
    write_u32(out, static_cast<uint32_t>(layer.w.rows));
    write_u32(out, static_cast<uint32_t>(layer.w.cols));
    out.write(reinterpret_cast<const char*>(layer.w.v.data()),
              static_cast<std::streamsize>(layer.w.v.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(layer.b.v.data()),
              static_cast<std::streamsize>(layer.b.v.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("short write to checkpoint: " + path);
}

EncoderState load_encoder(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("bad checkpoint header: " + path);
  EncoderState s;
  s.hashing.dim = static_cast<int>(read_u32(in));
  s.hashing.ngram_min = static_cast<int>(read_u32(in));
  s.hashing.ngram_max = static_cast<int>(read_u32(in));
  s.hashing.signed_hash = read_u32(in) != 0;
  uint32_t n_layers = read_u32(in);
  for (uint32_t l = 0; l < n_layers; ++l) {
    uint32_t rows = read_u32(in), cols = read_u32(in);
    EncoderState::Layer layer{Tensor2(static_cast<int>(rows), static_cast<int>(cols)),
                              Tensor2(1, static_cast<int>(cols))};
    in.read(reinterpret_cast<char*>(layer.w.v.data()),
            static_cast<std::streamsize>(layer.w.v.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(layer.b.v.data()),
            static_cast<std::streamsize>(layer.b.v.size() * sizeof(double)));
    s.layers.push_back(std::move(layer));
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return s;
}

uint64_t param_hash(const EncoderState& state) {
  uint64_t h = kFnvOffsetBasis;
  auto mix_bytes = [&h](const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= kFnvPrime;
    }
  };
  for (const auto& layer : state.layers) {
    mix_bytes(layer.w.v.data(), layer.w.v.size() * sizeof(double));
    mix_bytes(layer.b.v.data(), layer.b.v.size() * sizeof(double));
  }
  return h;
}

}  // namespace sccl
