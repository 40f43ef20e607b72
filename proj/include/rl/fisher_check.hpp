#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "rl/mat.hpp"
#include "rl/tabular_dp.hpp"

namespace rl {

// Numeric verification that the Fisher matrix transforms as
// F(nu) = J^T F(theta) J under a smooth reparametrization theta(nu), and that
// the natural-gradient step is invariant while the plain-gradient step is
// not. The toy family is a 3-outcome softmax with logits (theta0, theta1, 0),
// which keeps the 2x2 Fisher nonsingular; the reparametrization is an
// invertible linear map theta = M nu. The nu-side quantities are obtained by
// finite differences so the check does not just restate the formula.
struct FisherInvarianceReport {
  double fisher_rel_err = 0.0;      // ||F_fd(nu) - J^T F(theta) J|| / ||J^T F J||
  double natural_step_rel_err = 0.0;  // ||J dnu_nat - dtheta_nat|| / ||dtheta_nat||
  double plain_step_rel_diff = 0.0;   // ||J dnu_plain - dtheta_plain|| / ||dtheta_plain||
};

namespace detail_fisher {

inline std::array<double, 3> softmax3(double t0, double t1) {
  double m = std::max(std::max(t0, t1), 0.0);
  double e0 = std::exp(t0 - m), e1 = std::exp(t1 - m), e2 = std::exp(-m);
  double z = e0 + e1 + e2;
  return {e0 / z, e1 / z, e2 / z};
}

inline double log_prob(double t0, double t1, int x) {
  auto q = softmax3(t0, t1);
  return std::log(q[x]);
}

// Exact 2x2 Fisher of the theta-parametrized family.
inline Mat fisher_theta(double t0, double t1) {
  auto q = softmax3(t0, t1);
  Mat f(2, 2);
  for (int x = 0; x < 3; ++x) {
    double g0 = (x == 0 ? 1.0 : 0.0) - q[0];
    double g1 = (x == 1 ? 1.0 : 0.0) - q[1];
    f(0, 0) += q[x] * g0 * g0;
    f(0, 1) += q[x] * g0 * g1;
    f(1, 0) += q[x] * g1 * g0;
    f(1, 1) += q[x] * g1 * g1;
  }
  return f;
}

// f(q) = sum_x c_x q_x and its exact theta-gradient.
inline double objective(double t0, double t1, std::span<const double> c) {
  auto q = softmax3(t0, t1);
  return c[0] * q[0] + c[1] * q[1] + c[2] * q[2];
}

inline std::array<double, 2> objective_grad_theta(double t0, double t1,
                                                  std::span<const double> c) {
  auto q = softmax3(t0, t1);
  std::array<double, 2> g{0.0, 0.0};
  for (int x = 0; x < 3; ++x) {
    g[0] += c[x] * q[x] * ((x == 0 ? 1.0 : 0.0) - q[0]);
    g[1] += c[x] * q[x] * ((x == 1 ? 1.0 : 0.0) - q[1]);
  }
  return g;
}

inline std::array<double, 2> solve2(const Mat& A, const std::array<double, 2>& b) {
  auto x = solve_linear(A, {b[0], b[1]});
  return {x[0], x[1]};
}

inline double frob(const Mat& m) {
  double s = 0.0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

}  // namespace detail_fisher

inline FisherInvarianceReport natural_gradient_invariance_check(const Mat& reparam,
                                                                std::span<const double> coeffs,
                                                                std::span<const double> theta0) {
  using namespace detail_fisher;
  if (reparam.rows != 2 || reparam.cols != 2)
    throw std::invalid_argument("natural_gradient_invariance_check: reparam must be 2x2");
  if (coeffs.size() != 3 || theta0.size() != 2)
    throw std::invalid_argument("natural_gradient_invariance_check: bad inputs");
  const Mat& J = reparam;  // theta = J * nu
  double det = J(0, 0) * J(1, 1) - J(0, 1) * J(1, 0);
  if (std::abs(det) < 1e-12)
    throw std::invalid_argument("natural_gradient_invariance_check: reparam must be invertible");

  // nu0 = J^-1 theta0
  std::array<double, 2> nu0 = {(J(1, 1) * theta0[0] - J(0, 1) * theta0[1]) / det,
                               (-J(1, 0) * theta0[0] + J(0, 0) * theta0[1]) / det};
  auto theta_of = [&](double n0, double n1) {
    return std::array<double, 2>{J(0, 0) * n0 + J(0, 1) * n1, J(1, 0) * n0 + J(1, 1) * n1};
  };

  // FD gradient of log q_x and of the objective on the nu side.
  const double h = 1e-6;
  auto grad_nu_logq = [&](int x) {
    std::array<double, 2> g;
    for (int i = 0; i < 2; ++i) {
      auto np = nu0, nm = nu0;
      np[i] += h;
      nm[i] -= h;
      auto tp = theta_of(np[0], np[1]);
      auto tm = theta_of(nm[0], nm[1]);
      g[i] = (log_prob(tp[0], tp[1], x) - log_prob(tm[0], tm[1], x)) / (2 * h);
    }
    return g;
  };
  auto q = softmax3(theta0[0], theta0[1]);
  Mat f_nu_fd(2, 2);
  for (int x = 0; x < 3; ++x) {
    auto g = grad_nu_logq(x);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) f_nu_fd(i, j) += q[x] * g[i] * g[j];
  }

  Mat f_theta = fisher_theta(theta0[0], theta0[1]);
  Mat jt_f_j = matmul(matmul_tn(J, f_theta), J);  // J^T F J

  FisherInvarianceReport rep;
  Mat diff = f_nu_fd;
  for (size_t k = 0; k < diff.a.size(); ++k) diff.a[k] -= jt_f_j.a[k];
  rep.fisher_rel_err = frob(diff) / frob(jt_f_j);

  // Objective gradients: exact on the theta side, FD on the nu side.
  auto g_theta = objective_grad_theta(theta0[0], theta0[1], coeffs);
  std::array<double, 2> g_nu;
  for (int i = 0; i < 2; ++i) {
    auto np = nu0, nm = nu0;
    np[i] += h;
    nm[i] -= h;
    auto tp = theta_of(np[0], np[1]);
    auto tm = theta_of(nm[0], nm[1]);
    g_nu[i] = (objective(tp[0], tp[1], coeffs) - objective(tm[0], tm[1], coeffs)) / (2 * h);
  }

  // Natural steps on both sides; the induced theta step J dnu must match.
  auto dtheta = solve2(f_theta, g_theta);
  auto dnu = solve2(f_nu_fd, g_nu);
  std::array<double, 2> j_dnu = {J(0, 0) * dnu[0] + J(0, 1) * dnu[1],
                                 J(1, 0) * dnu[0] + J(1, 1) * dnu[1]};
  double num = std::hypot(j_dnu[0] - dtheta[0], j_dnu[1] - dtheta[1]);
  double den = std::hypot(dtheta[0], dtheta[1]);
  rep.natural_step_rel_err = den > 0 ? num / den : num;

  // Plain-gradient steps are parametrization-dependent: J g_nu != g_theta
  // for a generic invertible map.
  std::array<double, 2> j_gnu = {J(0, 0) * g_nu[0] + J(0, 1) * g_nu[1],
                                 J(1, 0) * g_nu[0] + J(1, 1) * g_nu[1]};
  double pnum = std::hypot(j_gnu[0] - g_theta[0], j_gnu[1] - g_theta[1]);
  double pden = std::hypot(g_theta[0], g_theta[1]);
  rep.plain_step_rel_diff = pden > 0 ? pnum / pden : pnum;
  return rep;
}

}  // namespace rl
