#include "sccl/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace sccl {

AdamState AdamState::init(const std::vector<const Tensor2*>& params,
                          std::vector<std::string> names, AdamConfig cfg) {
  if (!names.empty() && names.size() != params.size())
    throw std::invalid_argument("AdamState: names/params size mismatch");
  AdamState s;
  s.cfg = cfg;
  for (size_t i = 0; i < params.size(); ++i) {
    s.m.emplace_back(params[i]->rows, params[i]->cols);
    s.v.emplace_back(params[i]->rows, params[i]->cols);
    s.names.push_back(names.empty() ? "param" + std::to_string(i) : names[i]);
  }
  return s;
}

void adam_step(const std::vector<Tensor2*>& params,
               const std::vector<const Tensor2*>& grads, AdamState& state,
               double lr_now) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter group size mismatch");
  for (size_t p = 0; p < params.size(); ++p) {
    if (!params[p]->same_shape(*grads[p]) || !params[p]->same_shape(state.m[p]))
      throw std::invalid_argument("adam_step: shape mismatch for " + state.names[p]);
    if (!grads[p]->all_finite())
      throw std::runtime_error("adam_step: non-finite gradient in " + state.names[p]);
  }
  state.step += 1;
  double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor2& w = *params[p];
    const Tensor2& g = *grads[p];
    Tensor2& m = state.m[p];
    Tensor2& v = state.v[p];
    for (int64_t i = 0; i < w.size(); ++i) {
      m.v[i] = b1 * m.v[i] + (1.0 - b1) * g.v[i];
      v.v[i] = b2 * v.v[i] + (1.0 - b2) * g.v[i] * g.v[i];
      double mhat = m.v[i] / bc1;
      double vhat = v.v[i] / bc2;
      w.v[i] -= lr_now * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
  }
}

double linear_lr(double base_lr, int64_t step, int64_t total_steps) {
  if (total_steps < 1) throw std::invalid_argument("linear_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("linear_lr: step out of [0, total_steps]");
  return base_lr * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

}  // namespace sccl
