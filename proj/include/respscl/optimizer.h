#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "respscl/nn.h"

namespace respscl {

enum class OptKind { Adam, Sgd };
enum class LrSchedule { Cosine, Constant };

struct OptimizerConfig {
  OptKind kind = OptKind::Adam;
  double lr = 1e-4;        // 1e-4 pretrained, 1e-3 scratch
  double momentum = 0.9;   // Adam beta1 / SGD momentum
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // decoupled; normalization params excluded
  LrSchedule schedule = LrSchedule::Cosine;
  int epochs = 400;
  int batch_size = 128;

  void validate() const {
    if (!(lr > 0)) {
      throw std::invalid_argument("optimizer.lr must be > 0");
    }
    if (epochs < 1) {
      throw std::invalid_argument("optimizer.epochs must be >= 1");
    }
    if (batch_size < 1) {
      throw std::invalid_argument("optimizer.batch_size must be >= 1");
    }
    if (momentum < 0 || momentum >= 1) {
      throw std::invalid_argument("optimizer.momentum must be in [0, 1)");
    }
    if (weight_decay < 0) {
      throw std::invalid_argument("optimizer.weight_decay must be >= 0");
    }
  }
};

// lr(step) = lr0 * (1 + cos(pi * step / total)) / 2, no warm restarts.
inline double cosine_lr(int64_t step, int64_t total_steps, double lr0) {
  if (total_steps <= 0 || step < 0 || step > total_steps) {
    throw std::invalid_argument("cosine_lr: need 0 <= step <= total_steps");
  }
  return lr0 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                               static_cast<double>(total_steps))) /
         2.0;
}

// Adam with decoupled weight decay, or SGD with momentum, over a fixed
// parameter list. Normalization parameters never receive weight decay.
template <typename T>
class Optimizer {
 public:
  Optimizer(std::vector<ParamRef<T>> params, OptimizerConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    state_m_.reserve(params_.size());
    state_v_.reserve(params_.size());
    for (const auto& p : params_) {
      state_m_.emplace_back(p.value->shape);
      state_v_.emplace_back(p.value->shape);
    }
  }

  // One update with the given learning rate; gradients are read as-is.
  void step(double lr) {
    ++t_;
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i].value;
      auto& g = *params_[i].grad;
      const bool decay = !params_[i].is_norm && cfg_.weight_decay > 0;
      if (cfg_.kind == OptKind::Adam) {
        const double b1 = cfg_.momentum;
        const double b2 = cfg_.beta2;
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (size_t j = 0; j < p.data.size(); ++j) {
          const double grad = g.data[j];
          double m = state_m_[i].data[j];
          double v = state_v_[i].data[j];
          m = b1 * m + (1 - b1) * grad;
          v = b2 * v + (1 - b2) * grad * grad;
          state_m_[i].data[j] = static_cast<T>(m);
          state_v_[i].data[j] = static_cast<T>(v);
          double update = (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
          if (decay) {
            update += cfg_.weight_decay * p.data[j];
          }
          p.data[j] = static_cast<T>(p.data[j] - lr * update);
        }
      } else {
        const double mu = cfg_.momentum;
        for (size_t j = 0; j < p.data.size(); ++j) {
          double vel = state_m_[i].data[j];
          double update = g.data[j];
          if (decay) {
            update += cfg_.weight_decay * p.data[j];
          }
          vel = mu * vel + update;
          state_m_[i].data[j] = static_cast<T>(vel);
          p.data[j] = static_cast<T>(p.data[j] - lr * vel);
        }
      }
    }
  }

  const OptimizerConfig& config() const { return cfg_; }

  // Whether weight decay applies to the i-th bound parameter; exposed so the
  // exclusion policy is inspectable.
  bool decays(size_t i) const {
    return !params_.at(i).is_norm && cfg_.weight_decay > 0;
  }
  const std::vector<ParamRef<T>>& params() const { return params_; }

 private:
  std::vector<ParamRef<T>> params_;
  OptimizerConfig cfg_;
  std::vector<Tensor<T>> state_m_, state_v_;
  int64_t t_ = 0;
};

template <typename T>
std::vector<ParamRef<T>> collect_params(ModelGraph<T>& model, bool include_encoder = true) {
  std::vector<ParamRef<T>> out;
  model.visit_params([&](const ParamRef<T>& p) {
    if (!include_encoder && p.name.rfind("encoder.", 0) == 0) {
      return;
    }
    out.push_back(p);
  });
  return out;
}

}  // namespace respscl
