#pragma once

#include <cmath>

#include "rl/param_store.hpp"

namespace rl {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard bias-corrected Adam. No gradient clipping.
class Adam {
 public:
  Adam(const ParamStore& params, AdamConfig cfg = {})
      : cfg_(cfg), m_(ParamStore::zeros_like(params)), v_(ParamStore::zeros_like(params)) {}

  void step(ParamStore& params, const ParamStore& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.tensor_count(); ++i) {
      auto& p = params.tensor(i).a;
      const auto& g = grads.tensor(i).a;
      auto& m = m_.tensor(i).a;
      auto& v = v_.tensor(i).a;
      for (size_t k = 0; k < p.size(); ++k) {
        m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
        v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
        double mhat = m[k] / c1;
        double vhat = v[k] / c2;
        p[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  ParamStore m_, v_;
  long t_ = 0;
};

}  // namespace rl
