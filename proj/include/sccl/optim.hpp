#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sccl/tensor.hpp"

namespace sccl {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators for one parameter group. Moments are
// shaped like their parameters; the step counter feeds bias correction.
struct AdamState {
  AdamConfig cfg;
  int64_t step = 0;
  std::vector<Tensor2> m;
  std::vector<Tensor2> v;
  std::vector<std::string> names;

  static AdamState init(const std::vector<const Tensor2*>& params,
                        std::vector<std::string> names, AdamConfig cfg = {});
};

// One Adam update with bias correction. Throws on a non-finite gradient,
// naming the offending parameter.
void adam_step(const std::vector<Tensor2*>& params,
               const std::vector<const Tensor2*>& grads, AdamState& state,
               double lr_now);

// base_lr * (1 - step/total_steps)
double linear_lr(double base_lr, int64_t step, int64_t total_steps);

}  // namespace sccl
