#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "rl/mat.hpp"
#include "rl/tabular_mdp.hpp"

namespace rl {

// Action-value table. Rows belonging to terminal states are kept at zero.
struct QTable {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> v;

  QTable() = default;
  QTable(int s, int a) : num_states(s), num_actions(a), v(static_cast<size_t>(s) * a, 0.0) {}

  double& at(int s, int a) { return v[static_cast<size_t>(s) * num_actions + a]; }
  double at(int s, int a) const { return v[static_cast<size_t>(s) * num_actions + a]; }

  double row_max(int s) const {
    double m = at(s, 0);
    for (int a = 1; a < num_actions; ++a) m = std::max(m, at(s, a));
    return m;
  }
  // Ties break to the lowest action index.
  int row_argmax(int s) const {
    int best = 0;
    for (int a = 1; a < num_actions; ++a)
      if (at(s, a) > at(s, best)) best = a;
    return best;
  }
};

inline double sup_norm_diff(const QTable& a, const QTable& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

struct TabularPolicy {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> probs;

  TabularPolicy() = default;
  TabularPolicy(int s, int a)
      : num_states(s), num_actions(a), probs(static_cast<size_t>(s) * a, 0.0) {}

  double& at(int s, int a) { return probs[static_cast<size_t>(s) * num_actions + a]; }
  double at(int s, int a) const { return probs[static_cast<size_t>(s) * num_actions + a]; }

  static TabularPolicy uniform(int s, int a) {
    TabularPolicy p(s, a);
    std::fill(p.probs.begin(), p.probs.end(), 1.0 / a);
    return p;
  }

  // Row-softmax of a parameter matrix theta[s][a].
  static TabularPolicy softmax(const Mat& theta) {
    TabularPolicy p(theta.rows, theta.cols);
    for (int s = 0; s < theta.rows; ++s) {
      double mx = theta(s, 0);
      for (int a = 1; a < theta.cols; ++a) mx = std::max(mx, theta(s, a));
      double z = 0.0;
      for (int a = 0; a < theta.cols; ++a) {
        p.at(s, a) = std::exp(theta(s, a) - mx);
        z += p.at(s, a);
      }
      for (int a = 0; a < theta.cols; ++a) p.at(s, a) /= z;
    }
    return p;
  }

  void validate() const {
    for (int s = 0; s < num_states; ++s) {
      double z = 0.0;
      for (int a = 0; a < num_actions; ++a) {
        if (at(s, a) < 0.0) throw std::logic_error("TabularPolicy: negative probability");
        z += at(s, a);
      }
      if (std::abs(z - 1.0) > 1e-12) throw std::logic_error("TabularPolicy: row does not sum to 1");
    }
  }
};

// One exact Bellman optimality backup over the whole table:
//   Q'(s,a) = E_{s'} [ r(s') + gamma * (1 - terminal(s')) * max_a' Q(s',a') ].
// Terminal rows of the output are forced to zero.
inline QTable bellman_optimality_backup(const QTable& q, const TabularMdp& mdp) {
  QTable out(mdp.num_states, mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < mdp.num_actions; ++a) {
      double acc = 0.0;
      for (int s2 = 0; s2 < mdp.num_states; ++s2) {
        double pr = mdp.prob(s, a, s2);
        if (pr == 0.0) continue;
        double boot = mdp.terminal[s2] ? 0.0 : mdp.gamma * q.row_max(s2);
        acc += pr * (mdp.reward[s2] + boot);
      }
      out.at(s, a) = acc;
    }
  }
  return out;
}

// Tabular transition in index form (observations of TabularEnv are one-hot).
struct IndexTransition {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  bool done = false;
};

inline IndexTransition index_transition(const Transition& t) {
  return {onehot_index(t.state), t.action, t.reward, onehot_index(t.next_state), t.done};
}

// Single-cell temporal-difference update:
//   Q(s,a) += alpha * [ r + (1-done) * gamma * max_a' Q(s',a') - Q(s,a) ].
inline void td_update(QTable& q, const IndexTransition& t, double alpha, double gamma) {
  if (alpha <= 0.0 || alpha > 1.0) throw std::invalid_argument("td_update: alpha must be in (0,1]");
  double boot = t.done ? 0.0 : gamma * q.row_max(t.next_state);
  q.at(t.state, t.action) += alpha * (t.reward + boot - q.at(t.state, t.action));
}

// Dense linear solve by Gaussian elimination with partial pivoting. The
// systems here are tiny (tens of unknowns); this is oracle-grade.
inline std::vector<double> solve_linear(Mat A, std::vector<double> b) {
  const int n = A.rows;
  if (A.cols != n || static_cast<int>(b.size()) != n)
    throw std::invalid_argument("solve_linear: shape mismatch");
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(A(i, k)) > std::abs(A(piv, k))) piv = i;
    if (std::abs(A(piv, k)) < 1e-300) throw std::runtime_error("solve_linear: singular system");
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
      std::swap(b[k], b[piv]);
    }
    for (int i = k + 1; i < n; ++i) {
      double f = A(i, k) / A(k, k);
      if (f == 0.0) continue;
      for (int j = k; j < n; ++j) A(i, j) -= f * A(k, j);
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= A(i, j) * x[j];
    x[i] = s / A(i, i);
  }
  return x;
}

// Policy transition matrix P_pi(s -> s') with terminal rows zeroed (episode
// mass stops flowing once a terminal state is entered).
inline Mat policy_transition_matrix(const TabularMdp& mdp, const TabularPolicy& pi) {
  Mat P(mdp.num_states, mdp.num_states);
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < mdp.num_actions; ++a) {
      double pa = pi.at(s, a);
      if (pa == 0.0) continue;
      for (int s2 = 0; s2 < mdp.num_states; ++s2) P(s, s2) += pa * mdp.prob(s, a, s2);
    }
  }
  return P;
}

// Exact V^pi by direct solve of (I - gamma * P_pi) V = R_pi, where R_pi is
// the expected one-step reward and bootstrap through terminals is zero.
inline std::vector<double> solve_v(const TabularMdp& mdp, const TabularPolicy& pi) {
  const int n = mdp.num_states;
  Mat P = policy_transition_matrix(mdp, pi);
  std::vector<double> r_pi(n, 0.0);
  for (int s = 0; s < n; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < mdp.num_actions; ++a) {
      double pa = pi.at(s, a);
      if (pa == 0.0) continue;
      for (int s2 = 0; s2 < n; ++s2) r_pi[s] += pa * mdp.prob(s, a, s2) * mdp.reward[s2];
    }
  }
  Mat A(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double boot = mdp.terminal[j] ? 0.0 : P(i, j);
      A(i, j) = (i == j ? 1.0 : 0.0) - mdp.gamma * boot;
    }
  }
  return solve_linear(A, r_pi);
}

inline QTable q_from_v(const TabularMdp& mdp, const std::vector<double>& v) {
  QTable q(mdp.num_states, mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < mdp.num_actions; ++a) {
      double acc = 0.0;
      for (int s2 = 0; s2 < mdp.num_states; ++s2) {
        double pr = mdp.prob(s, a, s2);
        if (pr == 0.0) continue;
        acc += pr * (mdp.reward[s2] + (mdp.terminal[s2] ? 0.0 : mdp.gamma * v[s2]));
      }
      q.at(s, a) = acc;
    }
  }
  return q;
}

// J(pi) = V^pi(s0).
inline double policy_performance(const TabularMdp& mdp, const TabularPolicy& pi) {
  return solve_v(mdp, pi)[mdp.start_state];
}

struct VisitationVector {
  std::vector<double> d;
  double sum() const {
    double s = 0.0;
    for (double x : d) s += x;
    return s;
  }
};

// Unnormalized occupancy sum_t gamma^t P(s_t = s), solved from the flow
// system d = e_{s0} + gamma * P_pi^T d. Terminal states self-loop here so the
// occupancy keeps total mass 1 at every horizon, matching the convention in
// which an ended episode idles in its final state.
inline std::vector<double> discounted_occupancy(const TabularMdp& mdp, const TabularPolicy& pi) {
  const int n = mdp.num_states;
  Mat P = policy_transition_matrix(mdp, pi);
  for (int s = 0; s < n; ++s)
    if (mdp.terminal[s]) P(s, s) = 1.0;
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = (i == j ? 1.0 : 0.0) - mdp.gamma * P(j, i);
  std::vector<double> e0(n, 0.0);
  e0[mdp.start_state] = 1.0;
  return solve_linear(A, e0);
}

// d_pi(s) = (1 - gamma) * sum_t gamma^t P(s_t = s); entries are nonnegative
// and sum to 1.
inline VisitationVector discounted_visitation(const TabularMdp& mdp, const TabularPolicy& pi) {
  auto occ = discounted_occupancy(mdp, pi);
  VisitationVector out;
  out.d.resize(occ.size());
  for (size_t i = 0; i < occ.size(); ++i) out.d[i] = (1.0 - mdp.gamma) * occ[i];
  return out;
}

// Exact policy gradient for the softmax tabular family pi(a|s) = softmax
// over theta[s][.]. Uses the advantage form
//   dJ/dtheta[s][a] = occ(s) * pi(a|s) * A^pi(s,a),
// with occupancy and value functions obtained by direct linear solves, so it
// matches finite differences of the exact objective.
inline Mat exact_policy_gradient(const TabularMdp& mdp, const Mat& theta) {
  TabularPolicy pi = TabularPolicy::softmax(theta);
  auto v = solve_v(mdp, pi);
  QTable q = q_from_v(mdp, v);
  auto occ = discounted_occupancy(mdp, pi);
  Mat g(theta.rows, theta.cols);
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < mdp.num_actions; ++a)
      g(s, a) = occ[s] * pi.at(s, a) * (q.at(s, a) - v[s]);
  }
  return g;
}

inline double exact_objective(const TabularMdp& mdp, const Mat& theta) {
  return policy_performance(mdp, TabularPolicy::softmax(theta));
}

// Surrogate of the relative-performance identity with the state distribution
// swapped to the old policy's:
//   L_{pi_old}(pi) = 1/(1-gamma) * E_{d_{pi_old}} E_{pi} A^{pi_old}(s,a).
inline double surrogate_objective(const TabularMdp& mdp, const TabularPolicy& pi_new,
                                  const TabularPolicy& pi_old) {
  auto v_old = solve_v(mdp, pi_old);
  QTable q_old = q_from_v(mdp, v_old);
  auto occ_old = discounted_occupancy(mdp, pi_old);
  double acc = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < mdp.num_actions; ++a)
      acc += occ_old[s] * pi_new.at(s, a) * (q_old.at(s, a) - v_old[s]);
  }
  return acc;
}

// Residual of the relative policy performance identity
//   J(pi) - J(pi_old) = 1/(1-gamma) * E_{d_pi} E_pi A^{pi_old}(s,a),
// evaluated with exact solves. Should vanish to solver precision.
inline double performance_identity_residual(const TabularMdp& mdp, const TabularPolicy& pi_new,
                                            const TabularPolicy& pi_old) {
  double lhs = policy_performance(mdp, pi_new) - policy_performance(mdp, pi_old);
  auto v_old = solve_v(mdp, pi_old);
  QTable q_old = q_from_v(mdp, v_old);
  auto occ_new = discounted_occupancy(mdp, pi_new);
  double rhs = 0.0;
  for (int s = 0; s < mdp.num_states; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < mdp.num_actions; ++a)
      rhs += occ_new[s] * pi_new.at(s, a) * (q_old.at(s, a) - v_old[s]);
  }
  return std::abs(lhs - rhs);
}

inline void write_qtable_csv(std::ostream& os, const QTable& q) {
  os << "state,action,value\n";
  for (int s = 0; s < q.num_states; ++s)
    for (int a = 0; a < q.num_actions; ++a) os << s << "," << a << "," << q.at(s, a) << "\n";
}

}  // namespace rl
