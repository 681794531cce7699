#pragma once

#include <vector>

#include "l2h/layers.hpp"

namespace l2h {

struct OptimizerConfig {
  double max_lr = 1e-4;
  int max_epochs = 30;       // 180 at paper scale
  int pretrain_epochs = 20;
  int batch_size = 4;
  double weight_decay = 1e-4;
  // One-cycle shape.
  double pct_start = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(max_lr > 0.0)) fail(ErrorCode::config_error, "max_lr must be positive");
    if (max_epochs < 1 || batch_size < 1)
      fail(ErrorCode::config_error, "epochs and batch size must be >= 1");
  }
};

// Cosine one-cycle schedule: warmup from max_lr/div_factor, peak exactly at
// max_lr, anneal to max_lr/final_div_factor.
class OneCycleSchedule {
 public:
  OneCycleSchedule(double max_lr, int total_steps, double pct_start, double div_factor,
                   double final_div_factor);

  double lr_at(int step) const;
  int peak_step() const { return peak_; }
  int total_steps() const { return total_; }

 private:
  double max_lr_, initial_lr_, final_lr_;
  int total_, peak_;
};

// AdamW with decoupled weight decay. State order follows the parameter list
// given at init, so updates are deterministic.
template <typename T>
class AdamW {
 public:
  void init(const std::vector<ParamRef<T>>& params, double weight_decay);
  void step(std::vector<ParamRef<T>>& params, double lr);
  int steps_taken() const { return t_; }

 private:
  std::vector<TensorT<T>> m_, v_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8, weight_decay_ = 0.0;
  int t_ = 0;
};

}  // namespace l2h
