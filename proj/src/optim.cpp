#include "blvt/nn/optim.hpp"

#include <cmath>
#include <numbers>

#include "blvt/errors.hpp"

namespace blvt::nn {

double cosine_lr(long step, long total_steps, double base_lr) {
  if (total_steps < 1) throw RangeError("cosine_lr: total_steps must be positive");
  if (step < 0 || step > total_steps) throw RangeError("cosine_lr: step outside [0, total]");
  const double phase = std::numbers::pi * static_cast<double>(step) /
                       static_cast<double>(total_steps);
  return base_lr * (1.0 + std::cos(phase)) / 2.0;
}

AdamW::AdamW(double weight_decay, double beta1, double beta2, double eps)
    : wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
                 double lr) {
  if (params.size() != grads.size()) throw ShapeError("adam: params/grads size mismatch");
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Matrix::zeros(p->rows, p->cols));
      v_.push_back(Matrix::zeros(p->rows, p->cols));
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter count changed");

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = *grads[i];
    if (!p.same_shape(m_[i]) || !g.same_shape(p)) throw ShapeError("adam: shape mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) {
      p.data[j] *= 1.0 - lr * wd_;
      const double gj = g.data[j];
      m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * gj;
      v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * gj * gj;
      const double mhat = m_[i].data[j] / bc1;
      const double vhat = v_[i].data[j] / bc2;
      p.data[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace blvt::nn
