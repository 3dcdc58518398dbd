#include "sccl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sccl/format.hpp"
#include "sccl/knn.hpp"
#include "sccl/rng.hpp"
#include "sccl/selector.hpp"

namespace sccl {
namespace {

constexpr uint64_t kBatchSeedTag = 0xba7cULL;
constexpr uint64_t kReplaySeedTag = 0x4e9aULL;
constexpr uint64_t kHeadSeedTag = 0x4eadULL;
constexpr uint64_t kSelectSeedTag = 0x5e1eULL;

struct ParamRefs {
  std::vector<Tensor2*> params;
  std::vector<const Tensor2*> cparams;
  std::vector<std::string> names;

  void push(Tensor2* p, std::string name) {
    params.push_back(p);
    cparams.push_back(p);
    names.push_back(std::move(name));
  }
};

ParamRefs encoder_param_refs(EncoderState& enc) {
  ParamRefs refs;
  for (size_t i = 0; i < enc.layers.size(); ++i) {
    refs.push(&enc.layers[i].w, "layer" + std::to_string(i) + ".w");
    refs.push(&enc.layers[i].b, "layer" + std::to_string(i) + ".b");
  }
  return refs;
}

std::vector<Var> encoder_leaves(const EncoderVars& vars) {
  std::vector<Var> leaves;
  for (const auto& [w, b] : vars.layers) {
    leaves.push_back(w);
    leaves.push_back(b);
  }
  return leaves;
}

// One optimizer update from the tape's accumulated gradients. Parameters the
// backward sweep never reached get a zero gradient.
void apply_update(Tape& tape, const std::vector<Var>& leaves, ParamRefs& refs, AdamState& adam,
                  double lr_now) {
  std::vector<Tensor2> zeros;
  zeros.reserve(leaves.size());
  std::vector<const Tensor2*> grads;
  grads.reserve(leaves.size());
  for (size_t i = 0; i < leaves.size(); ++i) {
    if (tape.has_grad(leaves[i])) {
      grads.push_back(&tape.grad(leaves[i]));
    } else {
      zeros.emplace_back(refs.params[i]->rows, refs.params[i]->cols);
      grads.push_back(&zeros.back());
    }
  }
  adam_step(refs.params, grads, adam, lr_now);
}

std::vector<int> batch_labels(const std::vector<Example>& batch) {
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const Example& ex : batch) labels.push_back(ex.label);
  return labels;
}

[[noreturn]] void abort_step(const TaskSpec& task, int step, bool replay, const RunConfig& cfg,
                             double value) {
  std::ostringstream msg;
  msg << "training aborted: non-finite loss (" << value << ") at task " << task.task_id
      << ", step " << step << (replay ? " (replay)" : "") << ", mode " << mode_name(cfg.mode);
  throw std::runtime_error(msg.str());
}

double evaluate_task_head(const RunState& state, const TaskSpec& task) {
  auto it = state.heads.find(task.task_id);
  if (it == state.heads.end())
    throw std::logic_error("no classifier head for task " + std::to_string(task.task_id));
  const TaskHead& head = it->second;
  if (task.test.empty())
    throw std::invalid_argument("evaluate_task_head: task " + std::to_string(task.task_id) +
                                " has no test examples");

  const int n = static_cast<int>(task.test.size());
  int correct = 0;
  constexpr int kChunk = 512;
  for (int start = 0; start < n; start += kChunk) {
    int stop = std::min(n, start + kChunk);
    std::vector<Example> chunk(task.test.begin() + start, task.test.begin() + stop);
    Tensor2 reps = encode_batch(state.encoder, chunk);
    Tensor2 logits = lin::matmul(reps, head.w);
    lin::add_bias_inplace(logits, head.b);
    for (int i = 0; i < logits.rows; ++i) {
      int best = 0;  // ties keep the lowest column, i.e. the smallest label id
      for (int c = 1; c < logits.cols; ++c)
        if (logits.at(i, c) > logits.at(i, best)) best = c;
      if (head.labels[best] == chunk[i].label) correct++;
    }
  }
  return static_cast<double>(correct) / n;
}

}  // namespace

Mode parse_mode(const std::string& name) {
  if (name == "sccl") return Mode::kSccl;
  if (name == "sccl_no_mr") return Mode::kScclNoMr;
  if (name == "sccl_no_ird") return Mode::kScclNoIrd;
  if (name == "cl_only") return Mode::kClOnly;
  if (name == "ce_baseline") return Mode::kCeBaseline;
  throw std::invalid_argument("unknown mode \"" + name +
                              "\"; valid: sccl, sccl_no_mr, sccl_no_ird, cl_only, ce_baseline");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kSccl: return "sccl";
    case Mode::kScclNoMr: return "sccl_no_mr";
    case Mode::kScclNoIrd: return "sccl_no_ird";
    case Mode::kClOnly: return "cl_only";
    case Mode::kCeBaseline: return "ce_baseline";
  }
  throw std::logic_error("mode_name: unhandled mode");
}

const std::vector<Mode>& all_modes() {
  static const std::vector<Mode> modes = {Mode::kSccl, Mode::kScclNoMr, Mode::kScclNoIrd,
                                          Mode::kClOnly, Mode::kCeBaseline};
  return modes;
}

bool mode_uses_ird(Mode mode) { return mode == Mode::kSccl || mode == Mode::kScclNoMr; }

bool mode_uses_replay(Mode mode) { return mode == Mode::kSccl || mode == Mode::kScclNoIrd; }

void RunConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("config: batch_size must be >= 2");
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (!(base_lr > 0.0)) throw std::invalid_argument("config: base_lr must be positive");
  if (replay_every < 1) throw std::invalid_argument("config: replay_every must be >= 1");
  if (memory_per_task < 1) throw std::invalid_argument("config: memory_per_task must be >= 1");
  if (clusters_per_label < 1)
    throw std::invalid_argument("config: clusters_per_label must be >= 1");
  if (k < 1) throw std::invalid_argument("config: k must be >= 1");
  if (!(temps.kappa > 0.0) || !(temps.tau > 0.0) || !(temps.t_infer > 0.0))
    throw std::invalid_argument("config: temperatures must be positive");
  if (hashing.dim < 1) throw std::invalid_argument("config: hash_dim must be >= 1");
  if (hashing.ngram_min < 1 || hashing.ngram_max < hashing.ngram_min)
    throw std::invalid_argument("config: need 1 <= ngram_min <= ngram_max");
  if (encoder_dims.size() < 2)
    throw std::invalid_argument("config: encoder needs at least input and output dims");
  for (int d : encoder_dims)
    if (d < 1) throw std::invalid_argument("config: encoder dims must be positive");
  if (encoder_dims.front() != hashing.dim)
    throw std::invalid_argument("config: first encoder dim must equal hash_dim");
}

std::string config_fingerprint(const RunConfig& cfg) {
  std::ostringstream s;
  s << "mode=" << mode_name(cfg.mode) << ";batch_size=" << cfg.batch_size
    << ";epochs=" << cfg.epochs << ";base_lr=" << format_double(cfg.base_lr)
    << ";replay_every=" << cfg.replay_every << ";memory_per_task=" << cfg.memory_per_task
    << ";clusters_per_label=" << cfg.clusters_per_label
    << ";kappa=" << format_double(cfg.temps.kappa) << ";tau=" << format_double(cfg.temps.tau)
    << ";t_infer=" << format_double(cfg.temps.t_infer) << ";k=" << cfg.k
    << ";hash_dim=" << cfg.hashing.dim << ";ngram_min=" << cfg.hashing.ngram_min
    << ";ngram_max=" << cfg.hashing.ngram_max << ";signed=" << (cfg.hashing.signed_hash ? 1 : 0)
    << ";dims=";
  for (size_t i = 0; i < cfg.encoder_dims.size(); ++i) {
    if (i) s << "-";
    s << cfg.encoder_dims[i];
  }
  uint64_t h = fnv1a64(s.str());
  std::ostringstream hex;
  hex << std::hex;
  for (int shift = 60; shift >= 0; shift -= 4) hex << ((h >> shift) & 0xF);
  return hex.str();
}

std::string step_log_to_csv(const std::vector<StepLogRow>& rows) {
  std::ostringstream out;
  out << "step,task,loss_cl,loss_ird,lr,replay_flag\n";
  for (const StepLogRow& r : rows) {
    out << r.step << "," << r.task << "," << format_double(r.loss_cl) << ",";
    if (r.loss_ird) out << format_double(*r.loss_ird);
    out << "," << format_double(r.lr) << "," << (r.replay ? 1 : 0) << "\n";
  }
  return out.str();
}

RunState init_run_state(const TaskSequence& seq, const RunConfig& cfg) {
  cfg.validate();
  if (seq.tasks.empty()) throw std::invalid_argument("init_run_state: empty task sequence");
  RunState state;
  state.encoder = EncoderState::init(cfg.hashing, cfg.encoder_dims, cfg.seed);
  state.rmatrix = RMatrix(seq.n());
  return state;
}

void train_task(RunState& state, const TaskSpec& task, const RunConfig& cfg) {
  cfg.validate();
  if (task.train.empty())
    throw std::invalid_argument("train_task: task " + std::to_string(task.task_id) +
                                " has no training data");

  // Materialize every epoch's batches first: the linear decay and the replay
  // trigger both need the exact step total, and batch packing can differ by
  // one batch between epochs.
  std::vector<std::vector<Example>> batches;
  const uint64_t bseed = mix_seed(cfg.seed, kBatchSeedTag, static_cast<uint64_t>(task.task_id));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::vector<Example>> eb = batch_iter(task, cfg.batch_size, bseed, epoch);
    for (std::vector<Example>& b : eb) batches.push_back(std::move(b));
  }
  const int total_steps = static_cast<int>(batches.size());

  const bool use_ird = mode_uses_ird(cfg.mode) && state.prev_snapshot.has_value();
  const bool use_replay = mode_uses_replay(cfg.mode);
  const bool ce = cfg.mode == Mode::kCeBaseline;

  TaskHead head;
  if (ce) {
    head.labels = task.labels_sorted();
    const int in = state.encoder.output_dim();
    const int out = static_cast<int>(head.labels.size());
    head.w = Tensor2(in, out);
    head.b = Tensor2(1, out);
    Rng hrng(mix_seed(cfg.seed, kHeadSeedTag, static_cast<uint64_t>(task.task_id)));
    const double limit = std::sqrt(6.0 / (in + out));
    for (double& x : head.w.v) x = hrng.next_uniform(-limit, limit);
  }

  ParamRefs refs = encoder_param_refs(state.encoder);
  if (ce) {
    refs.push(&head.w, "head.w");
    refs.push(&head.b, "head.b");
  }
  // Fresh moments per task: each task is its own decay phase.
  AdamState adam = AdamState::init(refs.cparams, refs.names);

  int t = 0;
  for (const std::vector<Example>& batch : batches) {
    t++;
    const double lr_now = linear_lr(cfg.base_lr, t - 1, total_steps);

    Tape tape;
    EncoderVars vars = make_encoder_vars(tape, state.encoder);
    std::vector<Var> leaves = encoder_leaves(vars);

    StepLogRow row;
    row.task = task.task_id;
    row.step = t;
    row.lr = lr_now;

    Var loss;
    if (ce) {
      Var hw = tape.leaf(head.w, true);
      Var hb = tape.leaf(head.b, true);
      leaves.push_back(hw);
      leaves.push_back(hb);
      Var reps = encode_batch(tape, vars, batch);
      loss = ce_head_loss(tape, reps, batch_labels(batch), head.labels, hw, hb);
      row.loss_cl = tape.scalar(loss);
    } else {
      TotalLoss tl = total_loss(tape, vars, batch,
                                use_ird ? state.prev_snapshot : std::optional<EncoderSnapshot>{},
                                cfg.temps);
      loss = tl.total;
      row.loss_cl = tape.scalar(tl.l_cl);
      if (tl.l_ird) row.loss_ird = tape.scalar(*tl.l_ird);
    }
    const double loss_value = tape.scalar(loss);
    if (!std::isfinite(loss_value)) abort_step(task, t, false, cfg, loss_value);

    tape.backward(loss);
    apply_update(tape, leaves, refs, adam, lr_now);
    state.step_log.push_back(row);
    state.total_steps++;

    if (use_replay && t % cfg.replay_every == 0 && !state.buffer.empty()) {
      std::vector<Example> replay = state.buffer.replay_batch(
          cfg.batch_size, mix_seed(cfg.seed, kReplaySeedTag, static_cast<uint64_t>(task.task_id)),
          t);
      if (!replay.empty()) {
        Tape rtape;
        EncoderVars rvars = make_encoder_vars(rtape, state.encoder);
        std::vector<Var> rleaves = encoder_leaves(rvars);
        Var rreps = encode_batch(rtape, rvars, replay);
        SupconLoss sc = supcon_loss(rtape, rreps, batch_labels(replay), cfg.temps.kappa);
        const double rvalue = rtape.scalar(sc.loss);
        if (!std::isfinite(rvalue)) abort_step(task, t, true, cfg, rvalue);

        rtape.backward(sc.loss);
        // Same scheduled rate as the triggering step; the schedule's step
        // counter does not advance for replay.
        ParamRefs enc_refs = encoder_param_refs(state.encoder);
        apply_update(rtape, rleaves, enc_refs, adam, lr_now);

        StepLogRow rrow;
        rrow.task = task.task_id;
        rrow.step = t;
        rrow.loss_cl = rvalue;
        rrow.lr = lr_now;
        rrow.replay = true;
        state.step_log.push_back(rrow);
        state.total_replay_steps++;
      }
    }
  }

  if (ce) state.heads[task.task_id] = std::move(head);
}

void finish_task(RunState& state, const TaskSequence& seq, int task_index, const RunConfig& cfg) {
  if (task_index < 0 || task_index >= seq.n())
    throw std::invalid_argument("finish_task: task index out of range");
  const TaskSpec& task = seq.tasks[task_index];

  // Selection and buffering run in every mode so run artifacts keep one
  // shape; replay and retrieval use the buffer only where the mode says so.
  std::vector<Example> exemplars =
      select_samples(task, state.encoder, cfg.memory_per_task, cfg.clusters_per_label,
                     mix_seed(cfg.seed, kSelectSeedTag, static_cast<uint64_t>(task.task_id)));
  state.buffer.add_task_exemplars(task.task_id, std::move(exemplars));

  // Reference model for the next task's distillation term.
  state.prev_snapshot.emplace(state.encoder);

  for (int j = 0; j <= task_index; ++j) {
    const TaskSpec& tj = seq.tasks[j];
    const double a = (cfg.mode == Mode::kCeBaseline)
                         ? evaluate_task_head(state, tj)
                         : evaluate_task(state.buffer, tj, state.encoder, cfg.k,
                                         cfg.temps.t_infer);
    state.rmatrix.set(task_index, j, a);
  }
  state.tasks_trained++;
}

MetricsReport make_report(const RunState& state, const RunConfig& cfg) {
  MetricsReport report;
  report.acc = acc(state.rmatrix);
  report.bwt = bwt(state.rmatrix);
  report.final_accuracies = state.rmatrix.bottom_row();
  report.mode = mode_name(cfg.mode);
  report.seed = cfg.seed;
  report.config_hash = config_fingerprint(cfg);
  report.total_steps = state.total_steps;
  report.total_replay_steps = state.total_replay_steps;
  return report;
}

RunResult run_sequence(const TaskSequence& seq, const RunConfig& cfg) {
  cfg.validate();
  if (seq.tasks.empty()) throw std::invalid_argument("run_sequence: empty task sequence");

  RunState state = init_run_state(seq, cfg);
  for (int i = 0; i < seq.n(); ++i) {
    train_task(state, seq.tasks[i], cfg);
    finish_task(state, seq, i, cfg);
  }

  MetricsReport report = make_report(state, cfg);
  return {std::move(state), std::move(report)};
}

}  // namespace sccl
