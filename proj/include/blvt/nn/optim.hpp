#pragma once

#include <vector>

#include "blvt/nn/matrix.hpp"

namespace blvt::nn {

// base_lr * (1 + cos(pi * step / total)) / 2, one cycle, no restarts.
double cosine_lr(long step, long total_steps, double base_lr);

// Adam with decoupled weight decay: params shrink by (1 - lr*wd) before the
// moment update. beta1=0.9, beta2=0.999, eps=1e-8.
class AdamW {
 public:
  AdamW(double weight_decay = 0.0, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);

  // params and grads are parallel lists; shapes fixed after the first call.
  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
            double lr);

  long steps_taken() const { return t_; }

 private:
  double wd_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace blvt::nn
