#include "l2h/optim.hpp"

#include <cmath>

namespace l2h {

OneCycleSchedule::OneCycleSchedule(double max_lr, int total_steps, double pct_start,
                                   double div_factor, double final_div_factor)
    : max_lr_(max_lr),
      initial_lr_(max_lr / div_factor),
      final_lr_(max_lr / final_div_factor),
      total_(std::max(total_steps, 2)) {
  peak_ = std::clamp(static_cast<int>(std::lround(pct_start * (total_ - 1))), 1, total_ - 1);
}

double OneCycleSchedule::lr_at(int step) const {
  step = std::clamp(step, 0, total_ - 1);
  if (step == peak_) return max_lr_;
  if (step < peak_) {
    const double t = static_cast<double>(step) / peak_;
    return initial_lr_ + (max_lr_ - initial_lr_) * 0.5 * (1.0 - std::cos(3.141592653589793 * t));
  }
  const double t = static_cast<double>(step - peak_) / (total_ - 1 - peak_);
  return final_lr_ + (max_lr_ - final_lr_) * 0.5 * (1.0 + std::cos(3.141592653589793 * t));
}

template <typename T>
void AdamW<T>::init(const std::vector<ParamRef<T>>& params, double weight_decay) {
  weight_decay_ = weight_decay;
  t_ = 0;
  m_.clear();
  v_.clear();
  for (const auto& p : params) {
    m_.emplace_back(p.value->shape);
    v_.emplace_back(p.value->shape);
  }
}

template <typename T>
void AdamW<T>::step(std::vector<ParamRef<T>>& params, double lr) {
  if (params.size() != m_.size()) fail(ErrorCode::dim_mismatch, "optimizer/param list mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    TensorT<T>& value = *params[i].value;
    const TensorT<T>& grad = *params[i].grad;
    TensorT<T>& m = m_[i];
    TensorT<T>& v = v_[i];
    for (std::size_t j = 0; j < value.numel(); ++j) {
      const double g = static_cast<double>(grad[j]);
      const double mj = beta1_ * static_cast<double>(m[j]) + (1.0 - beta1_) * g;
      const double vj = beta2_ * static_cast<double>(v[j]) + (1.0 - beta2_) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double mhat = mj / bc1;
      const double vhat = vj / bc2;
      const double update = mhat / (std::sqrt(vhat) + eps_) +
                            weight_decay_ * static_cast<double>(value[j]);
      value[j] = static_cast<T>(static_cast<double>(value[j]) - lr * update);
    }
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace l2h
