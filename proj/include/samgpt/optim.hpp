#pragma once

#include <vector>

#include "samgpt/tensor.hpp"

namespace samgpt {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction, no weight decay. Parameters without gradient
/// buffers are skipped, so frozen tensors are never touched.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamConfig config);

  void zero_grad();
  void step();
  long steps_taken() const { return t_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<Matrix> m_, v_;
  AdamConfig config_;
  long t_ = 0;
};

}  // namespace samgpt
