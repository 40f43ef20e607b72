#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "rl/mat.hpp"

namespace rl {

// Loss functions over a batch of head outputs. Each returns the scalar loss
// (mean over the batch, optionally importance-weighted), the gradient with
// respect to the predictions, and the unweighted per-sample losses (used for
// replay priorities). Targets are constants; no gradient flows into them.
struct LossOut {
  double value = 0.0;
  Mat dpred;
  std::vector<double> per_sample;
};

namespace detail {
inline double weight_at(std::span<const double> w, int b) { return w.empty() ? 1.0 : w[b]; }
}

// Squared error on one selected column per row.
inline LossOut mse_loss(const Mat& pred, std::span<const int> cols, std::span<const double> targets,
                        std::span<const double> weights = {}) {
  const int B = pred.rows;
  LossOut out;
  out.dpred = Mat(pred.rows, pred.cols);
  out.per_sample.resize(B);
  for (int b = 0; b < B; ++b) {
    double x = pred(b, cols[b]) - targets[b];
    double w = detail::weight_at(weights, b);
    out.per_sample[b] = x * x;
    out.value += w * x * x / B;
    out.dpred(b, cols[b]) = 2.0 * w * x / B;
  }
  return out;
}

// Quadratic inside the unit band, absolute outside: x^2 if |x| < 1 else |x|.
inline LossOut huber_loss(const Mat& pred, std::span<const int> cols,
                          std::span<const double> targets, std::span<const double> weights = {}) {
  const int B = pred.rows;
  LossOut out;
  out.dpred = Mat(pred.rows, pred.cols);
  out.per_sample.resize(B);
  for (int b = 0; b < B; ++b) {
    double x = pred(b, cols[b]) - targets[b];
    double w = detail::weight_at(weights, b);
    double l = std::abs(x) < 1.0 ? x * x : std::abs(x);
    double dl = std::abs(x) < 1.0 ? 2.0 * x : (x > 0 ? 1.0 : -1.0);
    out.per_sample[b] = l;
    out.value += w * l / B;
    out.dpred(b, cols[b]) = w * dl / B;
  }
  return out;
}

// KL(target || pred) on the chosen action's atom block. Zero predicted mass
// where the target has mass is signaled as +infinity, not thrown.
inline LossOut kl_to_target_loss(const Mat& pred, std::span<const int> actions, int atoms,
                                 const Mat& target_rows, std::span<const double> weights = {}) {
  const int B = pred.rows;
  LossOut out;
  out.dpred = Mat(pred.rows, pred.cols);
  out.per_sample.resize(B);
  for (int b = 0; b < B; ++b) {
    double w = detail::weight_at(weights, b);
    double l = 0.0;
    bool infinite = false;
    for (int i = 0; i < atoms; ++i) {
      double t = target_rows(b, i);
      if (t <= 0.0) continue;
      double p = pred(b, actions[b] * atoms + i);
      if (p <= 0.0) {
        infinite = true;
        break;
      }
      l += t * std::log(t / p);
    }
    if (infinite) {
      out.per_sample[b] = std::numeric_limits<double>::infinity();
      out.value = std::numeric_limits<double>::infinity();
      continue;
    }
    out.per_sample[b] = l;
    out.value += w * l / B;
    for (int i = 0; i < atoms; ++i) {
      double t = target_rows(b, i);
      if (t <= 0.0) continue;
      double p = pred(b, actions[b] * atoms + i);
      out.dpred(b, actions[b] * atoms + i) = -w * t / p / B;
    }
  }
  return out;
}

// Quantile-regression loss: for the chosen action's atom block zeta_i against
// the equal-weight target atoms y_j,
//   loss = 1/(B*A) sum_b sum_i sum_j (tau_i - I[zeta_i < y_j]) (zeta_i - y_j).
inline LossOut quantile_regression_loss(const Mat& pred, std::span<const int> actions, int atoms,
                                        const Mat& target_rows, std::span<const double> taus,
                                        std::span<const double> weights = {}) {
  const int B = pred.rows;
  LossOut out;
  out.dpred = Mat(pred.rows, pred.cols);
  out.per_sample.resize(B);
  for (int b = 0; b < B; ++b) {
    double w = detail::weight_at(weights, b);
    double l = 0.0;
    for (int i = 0; i < atoms; ++i) {
      double z = pred(b, actions[b] * atoms + i);
      double dz = 0.0;
      for (int j = 0; j < atoms; ++j) {
        double y = target_rows(b, j);
        double coef = taus[i] - (z < y ? 1.0 : 0.0);
        l += coef * (z - y) / atoms;
        dz += coef / atoms;
      }
      out.dpred(b, actions[b] * atoms + i) = w * dz / B;
    }
    out.per_sample[b] = l;
    out.value += w * l / B;
  }
  return out;
}

// PPO clipped surrogate, negated so smaller is better:
//   loss = -1/B sum_b min(r_b * adv_b, clip(r_b, 1-eps, 1+eps) * adv_b),
// with r_b = probs(b, a_b) / old_probs_b. Gradient is zero where the clip
// binds and the clipped branch is active.
inline LossOut clipped_ppo_loss(const Mat& probs, std::span<const int> actions,
                                std::span<const double> old_probs,
                                std::span<const double> advantages, double clip_eps) {
  const int B = probs.rows;
  LossOut out;
  out.dpred = Mat(probs.rows, probs.cols);
  out.per_sample.resize(B);
  for (int b = 0; b < B; ++b) {
    double r = probs(b, actions[b]) / old_probs[b];
    double rc = std::min(std::max(r, 1.0 - clip_eps), 1.0 + clip_eps);
    double o1 = r * advantages[b];
    double o2 = rc * advantages[b];
    double obj = std::min(o1, o2);
    out.per_sample[b] = -obj;
    out.value += -obj / B;
    double dobj_dr;
    if (o1 <= o2)
      dobj_dr = advantages[b];
    else
      dobj_dr = (r > 1.0 - clip_eps && r < 1.0 + clip_eps) ? advantages[b] : 0.0;
    out.dpred(b, actions[b]) = -dobj_dr / old_probs[b] / B;
  }
  return out;
}

// Mean row entropy of a batch of probability rows.
inline LossOut entropy_loss(const Mat& probs) {
  const int B = probs.rows;
  LossOut out;
  out.dpred = Mat(probs.rows, probs.cols);
  out.per_sample.resize(B);
  for (int b = 0; b < B; ++b) {
    double h = 0.0;
    for (int j = 0; j < probs.cols; ++j) {
      double p = probs(b, j);
      if (p <= 0.0) continue;
      h -= p * std::log(p);
      out.dpred(b, j) = (-std::log(p) - 1.0) / B;
    }
    out.per_sample[b] = h;
    out.value += h / B;
  }
  return out;
}

// Coefficient-weighted negative log-likelihood of the chosen actions:
//   loss = -1/B sum_b coeff_b * log probs(b, a_b).
// The REINFORCE and actor-critic policy terms are this loss with the
// appropriate (detached) coefficients.
inline LossOut log_prob_loss(const Mat& probs, std::span<const int> actions,
                             std::span<const double> coeffs) {
  const int B = probs.rows;
  LossOut out;
  out.dpred = Mat(probs.rows, probs.cols);
  out.per_sample.resize(B);
  for (int b = 0; b < B; ++b) {
    double p = probs(b, actions[b]);
    if (p <= 0.0) {
      out.value = std::numeric_limits<double>::infinity();
      out.per_sample[b] = std::numeric_limits<double>::infinity();
      continue;
    }
    double l = -coeffs[b] * std::log(p);
    out.per_sample[b] = l;
    out.value += l / B;
    out.dpred(b, actions[b]) = -coeffs[b] / p / B;
  }
  return out;
}

}  // namespace rl
