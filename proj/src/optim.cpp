#include "samgpt/optim.hpp"

#include <cmath>

namespace samgpt {

Adam::Adam(std::vector<Tensor*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (Tensor* p : params_) {
    m_.push_back(Matrix::Zero(p->rows(), p->cols()));
    v_.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
}

void Adam::zero_grad() {
  for (Tensor* p : params_) p->zero_grad();
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    if (!p.requires_grad()) continue;
    const Matrix& g = p.grad();
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
    p.value().array() -= config_.learning_rate * (m_[i].array() / c1) /
                         ((v_[i].array() / c2).sqrt() + config_.epsilon);
  }
}

}  // namespace samgpt
