#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "rl/tabular_dp.hpp"
#include "rl/tabular_mdp.hpp"

namespace rl {

// Finitely supported distribution: sorted support points with probabilities.
struct DiscreteDistribution {
  std::vector<double> support;
  std::vector<double> probs;

  static DiscreteDistribution point_mass(double x) { return {{x}, {1.0}}; }

  double mean() const {
    double m = 0.0;
    for (size_t i = 0; i < support.size(); ++i) m += support[i] * probs[i];
    return m;
  }

  double total_mass() const {
    double z = 0.0;
    for (double p : probs) z += p;
    return z;
  }

  void validate() const {
    if (support.size() != probs.size()) throw std::logic_error("DiscreteDistribution: size mismatch");
    for (size_t i = 1; i < support.size(); ++i)
      if (support[i] < support[i - 1]) throw std::logic_error("DiscreteDistribution: support not sorted");
    for (double p : probs)
      if (p < -1e-15) throw std::logic_error("DiscreteDistribution: negative probability");
    if (std::abs(total_mass() - 1.0) > 1e-12)
      throw std::logic_error("DiscreteDistribution: mass does not sum to 1");
  }
};

// Projects src onto a fixed strictly increasing grid: each source atom's mass
// is split between its two bracketing grid atoms proportional to closeness;
// atoms beyond the grid edges give all their mass to the nearest edge atom.
inline DiscreteDistribution categorical_projection(const DiscreteDistribution& src,
                                                   std::span<const double> grid) {
  const int n = static_cast<int>(grid.size());
  if (n < 1) throw std::invalid_argument("categorical_projection: empty grid");
  for (int i = 1; i < n; ++i)
    if (!(grid[i] > grid[i - 1]))
      throw std::invalid_argument("categorical_projection: grid must be strictly increasing");

  DiscreteDistribution out;
  out.support.assign(grid.begin(), grid.end());
  out.probs.assign(n, 0.0);
  for (size_t k = 0; k < src.support.size(); ++k) {
    double v = src.support[k];
    double p = src.probs[k];
    if (p == 0.0) continue;
    if (v <= grid[0]) {
      out.probs[0] += p;
    } else if (v >= grid[n - 1]) {
      out.probs[n - 1] += p;
    } else {
      int j = static_cast<int>(std::upper_bound(grid.begin(), grid.end(), v) - grid.begin()) - 1;
      double w = (v - grid[j]) / (grid[j + 1] - grid[j]);
      out.probs[j] += p * (1.0 - w);
      out.probs[j + 1] += p * w;
    }
  }
  return out;
}

// Exact Wasserstein distance between two discrete distributions, computed by
// walking the merged quantile breakpoints (two-pointer over sorted atoms).
// order may be any real >= 1; +infinity returns the sup of |F_p^-1 - F_q^-1|.
inline double wasserstein(const DiscreteDistribution& p, const DiscreteDistribution& q,
                          double order) {
  if (!(order >= 1.0)) throw std::invalid_argument("wasserstein: order must be >= 1");
  const bool is_inf = std::isinf(order);
  size_t i = 0, j = 0;
  double rem_p = p.probs.empty() ? 0.0 : p.probs[0];
  double rem_q = q.probs.empty() ? 0.0 : q.probs[0];
  double acc = 0.0, sup = 0.0;
  while (i < p.support.size() && j < q.support.size()) {
    if (rem_p <= 1e-18) {
      if (++i < p.support.size()) rem_p = p.probs[i];
      continue;
    }
    if (rem_q <= 1e-18) {
      if (++j < q.support.size()) rem_q = q.probs[j];
      continue;
    }
    double m = std::min(rem_p, rem_q);
    double d = std::abs(p.support[i] - q.support[j]);
    if (is_inf)
      sup = std::max(sup, d);
    else
      acc += m * std::pow(d, order);
    rem_p -= m;
    rem_q -= m;
  }
  return is_inf ? sup : std::pow(acc, 1.0 / order);
}

struct DivergencePair {
  double kl = 0.0;
  double cramer = 0.0;
};

// KL(p || q) over value-matched support (+infinity when p has mass where q
// has none) and the Cramer distance, the L2 norm of the CDF difference.
inline DivergencePair divergences(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  DivergencePair out;

  // KL: match support points by value.
  for (size_t i = 0; i < p.support.size(); ++i) {
    double pi = p.probs[i];
    if (pi <= 0.0) continue;
    double v = p.support[i];
    double qi = 0.0;
    auto it = std::lower_bound(q.support.begin(), q.support.end(), v - 1e-9);
    for (; it != q.support.end() && *it <= v + 1e-9; ++it)
      qi += q.probs[it - q.support.begin()];
    if (qi <= 0.0) {
      out.kl = std::numeric_limits<double>::infinity();
      break;
    }
    out.kl += pi * std::log(pi / qi);
  }

  // Cramer: integrate (F_p - F_q)^2 over the merged support intervals.
  std::vector<double> xs;
  xs.reserve(p.support.size() + q.support.size());
  xs.insert(xs.end(), p.support.begin(), p.support.end());
  xs.insert(xs.end(), q.support.begin(), q.support.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  double acc = 0.0;
  size_t ip = 0, iq = 0;
  double fp = 0.0, fq = 0.0;
  for (size_t k = 0; k + 1 <= xs.size(); ++k) {
    double x = xs[k];
    while (ip < p.support.size() && p.support[ip] <= x) fp += p.probs[ip++];
    while (iq < q.support.size() && q.support[iq] <= x) fq += q.probs[iq++];
    if (k + 1 < xs.size()) {
      double width = xs[k + 1] - x;
      acc += width * (fp - fq) * (fp - fq);
    }
  }
  out.cramer = std::sqrt(acc);
  return out;
}

// Midpoint quantile levels tau_i = (2i+1)/(2A).
inline std::vector<double> quantile_midpoints(int num_atoms) {
  std::vector<double> taus(num_atoms);
  for (int i = 0; i < num_atoms; ++i) taus[i] = (2.0 * i + 1.0) / (2.0 * num_atoms);
  return taus;
}

// W1-optimal projection onto equal-weight A-atom distributions: atom i is the
// tau_i-th quantile of src, F^-1(tau) = inf { x : F(x) >= tau }.
inline std::vector<double> quantile_projection(const DiscreteDistribution& src, int num_atoms) {
  if (num_atoms < 1) throw std::invalid_argument("quantile_projection: need at least one atom");
  std::vector<double> atoms(num_atoms);
  auto taus = quantile_midpoints(num_atoms);
  size_t k = 0;
  double cum = src.probs.empty() ? 0.0 : src.probs[0];
  for (int i = 0; i < num_atoms; ++i) {
    while (cum < taus[i] && k + 1 < src.support.size()) cum += src.probs[++k];
    atoms[i] = src.support[k];
  }
  return atoms;
}

// Table of value distributions indexed by (state, action).
using DistTable = std::vector<DiscreteDistribution>;

inline DistTable make_dist_table(const TabularMdp& mdp, const DiscreteDistribution& init) {
  return DistTable(static_cast<size_t>(mdp.num_states) * mdp.num_actions, init);
}

inline const DiscreteDistribution& dist_at(const DistTable& z, const TabularMdp& mdp, int s, int a) {
  return z[static_cast<size_t>(s) * mdp.num_actions + a];
}

// One exact distributional policy-evaluation backup: each cell becomes the
// mixture over (s',a') of the shifted and scaled distributions
// r(s') + gamma * Z(s',a'), projected back onto the grid. Terminal-state
// cells are pinned to a point mass at 0.
inline DistTable distributional_policy_eval_backup(const DistTable& z, const TabularPolicy& pi,
                                                   const TabularMdp& mdp,
                                                   std::span<const double> grid) {
  DistTable out(z.size());
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      auto& cell = out[static_cast<size_t>(s) * mdp.num_actions + a];
      if (mdp.terminal[s]) {
        cell = categorical_projection(DiscreteDistribution::point_mass(0.0), grid);
        continue;
      }
      // Accumulate the mixture as raw (value, mass) atoms, then project once.
      DiscreteDistribution mix;
      for (int s2 = 0; s2 < mdp.num_states; ++s2) {
        double pr = mdp.prob(s, a, s2);
        if (pr == 0.0) continue;
        if (mdp.terminal[s2]) {
          mix.support.push_back(mdp.reward[s2]);
          mix.probs.push_back(pr);
          continue;
        }
        for (int a2 = 0; a2 < mdp.num_actions; ++a2) {
          double pa = pi.at(s2, a2);
          if (pa == 0.0) continue;
          const auto& src = dist_at(z, mdp, s2, a2);
          for (size_t k = 0; k < src.support.size(); ++k) {
            if (src.probs[k] == 0.0) continue;
            mix.support.push_back(mdp.reward[s2] + mdp.gamma * src.support[k]);
            mix.probs.push_back(pr * pa * src.probs[k]);
          }
        }
      }
      // categorical_projection does not require sorted input support.
      cell = categorical_projection(mix, grid);
    }
  }
  return out;
}

// Maximal-form Wasserstein between two distribution tables.
inline double max_wasserstein(const DistTable& z1, const DistTable& z2, double order) {
  double m = 0.0;
  for (size_t i = 0; i < z1.size(); ++i) m = std::max(m, wasserstein(z1[i], z2[i], order));
  return m;
}

}  // namespace rl
