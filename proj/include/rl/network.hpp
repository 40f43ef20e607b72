#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rl/mat.hpp"
#include "rl/param_store.hpp"
#include "rl/rng.hpp"

namespace rl {

// Dense feed-forward networks with an algorithm-specific head and exact
// reverse-mode gradients. Layers: dense, noisy-dense (factorized Gaussian
// noise on weights and biases) and relu. Exactly one head per network.

enum class LayerKind { kDense, kNoisyDense, kRelu };

struct LayerDef {
  LayerKind kind = LayerKind::kDense;
  int width = 0;  // ignored for relu
};

enum class HeadKind {
  kQValues,            // linear to |A|
  kSoftmaxPolicy,      // linear to |A|, softmax rows
  kDueling,            // V stream + advantage stream, max or mean aggregation
  kCategorical,        // per-action atom logits, softmax across atoms
  kDuelingCategorical, // two streams combined per atom, softmax across atoms
  kQuantile,           // per-action atom values, unconstrained
  kDuelingQuantile,    // two streams combined per atom, no softmax
  kActorCritic,        // softmax policy head plus scalar value head
};

enum class DuelingMode { kMax, kMean, kSoftmaxAtoms };

struct NetworkSpec {
  int input_dim = 0;
  std::vector<LayerDef> layers;
  HeadKind head = HeadKind::kQValues;
  int action_count = 2;
  int atoms = 1;
  DuelingMode dueling_mode = DuelingMode::kMean;
  bool noisy_head = false;

  bool distributional_head() const {
    return head == HeadKind::kCategorical || head == HeadKind::kDuelingCategorical ||
           head == HeadKind::kQuantile || head == HeadKind::kDuelingQuantile;
  }

  int trunk_out_dim() const {
    int d = input_dim;
    for (const auto& l : layers)
      if (l.kind != LayerKind::kRelu) d = l.width;
    return d;
  }

  int output_dim() const {
    switch (head) {
      case HeadKind::kQValues:
      case HeadKind::kSoftmaxPolicy:
      case HeadKind::kDueling:
        return action_count;
      case HeadKind::kActorCritic:
        return action_count + 1;
      default:
        return action_count * atoms;
    }
  }

  void validate() const {
    if (input_dim <= 0) throw std::invalid_argument("NetworkSpec: bad input_dim");
    if (action_count < 1) throw std::invalid_argument("NetworkSpec: bad action_count");
    if (atoms < 1) throw std::invalid_argument("NetworkSpec: bad atoms");
    for (const auto& l : layers)
      if (l.kind != LayerKind::kRelu && l.width <= 0)
        throw std::invalid_argument("NetworkSpec: bad layer width");
  }
};

// Convenience builder: relu MLP trunk with the given hidden widths.
inline NetworkSpec make_mlp_spec(int input_dim, const std::vector<int>& hidden, HeadKind head,
                                 int action_count, int atoms = 1,
                                 DuelingMode mode = DuelingMode::kMean, bool noisy = false) {
  NetworkSpec s;
  s.input_dim = input_dim;
  for (int w : hidden) {
    s.layers.push_back({noisy ? LayerKind::kNoisyDense : LayerKind::kDense, w});
    s.layers.push_back({LayerKind::kRelu, 0});
  }
  s.head = head;
  s.action_count = action_count;
  s.atoms = atoms;
  s.dueling_mode = mode;
  s.noisy_head = noisy;
  s.validate();
  return s;
}

struct AffineUnitDef {
  std::string prefix;
  int in = 0, out = 0;
  bool noisy = false;
};

// Every affine unit of the network (trunk layers then head streams), in the
// fixed order used by parameter init, noise draws and the forward pass.
inline std::vector<AffineUnitDef> affine_units(const NetworkSpec& spec) {
  std::vector<AffineUnitDef> units;
  int d = spec.input_dim;
  int li = 0;
  for (const auto& l : spec.layers) {
    if (l.kind == LayerKind::kRelu) {
      ++li;
      continue;
    }
    units.push_back({"l" + std::to_string(li) + ".", d, l.width, l.kind == LayerKind::kNoisyDense});
    d = l.width;
    ++li;
  }
  const int h = d;
  const int A = spec.action_count;
  const int n_atoms = spec.atoms;
  switch (spec.head) {
    case HeadKind::kQValues:
    case HeadKind::kSoftmaxPolicy:
      units.push_back({"head.", h, A, spec.noisy_head});
      break;
    case HeadKind::kCategorical:
    case HeadKind::kQuantile:
      units.push_back({"head.", h, A * n_atoms, spec.noisy_head});
      break;
    case HeadKind::kDueling:
      units.push_back({"head.v.", h, 1, spec.noisy_head});
      units.push_back({"head.a.", h, A, spec.noisy_head});
      break;
    case HeadKind::kDuelingCategorical:
    case HeadKind::kDuelingQuantile:
      units.push_back({"head.v.", h, n_atoms, spec.noisy_head});
      units.push_back({"head.a.", h, A * n_atoms, spec.noisy_head});
      break;
    case HeadKind::kActorCritic:
      units.push_back({"head.pi.", h, A, spec.noisy_head});
      units.push_back({"head.v.", h, 1, spec.noisy_head});
      break;
  }
  return units;
}

// Dense weights uniform in +-1/sqrt(fan_in), biases zero. Noisy layers get
// the same mu init and constant sigma = sigma_init / fan_in.
inline ParamStore init_params(const NetworkSpec& spec, Rng& rng, double sigma_init = 0.5) {
  spec.validate();
  ParamStore p;
  for (const auto& u : affine_units(spec)) {
    double bound = 1.0 / std::sqrt(static_cast<double>(u.in));
    if (!u.noisy) {
      Mat& w = p.add(u.prefix + "W", u.in, u.out);
      for (auto& x : w.a) x = rng.uniform(-bound, bound);
      p.add(u.prefix + "b", 1, u.out);
    } else {
      Mat& wmu = p.add(u.prefix + "Wmu", u.in, u.out);
      for (auto& x : wmu.a) x = rng.uniform(-bound, bound);
      Mat& wsig = p.add(u.prefix + "Wsig", u.in, u.out);
      double s0 = sigma_init / static_cast<double>(u.in);
      for (auto& x : wsig.a) x = s0;
      p.add(u.prefix + "bmu", 1, u.out);
      Mat& bsig = p.add(u.prefix + "bsig", 1, u.out);
      for (auto& x : bsig.a) x = s0;
    }
  }
  return p;
}

// Factorized noise for one noisy unit: eps_in in R^m, eps_out in R^n. The
// weight noise matrix is f(eps_in) f(eps_out)^T and the bias noise f(eps_out)
// with f(x) = sign(x) sqrt(|x|). One draw is shared across the mini-batch.
struct LayerNoise {
  std::vector<double> eps_in, eps_out;
};

struct NoiseDraw {
  std::vector<LayerNoise> units;
  bool zeroed = false;

  static NoiseDraw sample(const NetworkSpec& spec, Rng& rng) {
    NoiseDraw d;
    for (const auto& u : affine_units(spec)) {
      if (!u.noisy) continue;
      LayerNoise n;
      n.eps_in.resize(u.in);
      n.eps_out.resize(u.out);
      for (auto& v : n.eps_in) v = rng.normal();
      for (auto& v : n.eps_out) v = rng.normal();
      d.units.push_back(std::move(n));
    }
    return d;
  }

  static NoiseDraw zeros(const NetworkSpec& spec) {
    NoiseDraw d;
    d.zeroed = true;
    for (const auto& u : affine_units(spec)) {
      if (!u.noisy) continue;
      LayerNoise n;
      n.eps_in.assign(u.in, 0.0);
      n.eps_out.assign(u.out, 0.0);
      d.units.push_back(std::move(n));
    }
    return d;
  }
};

inline double noise_scale_fn(double x) { return (x < 0 ? -1.0 : 1.0) * std::sqrt(std::abs(x)); }

namespace detail {

struct AffineRec {
  Mat in;      // unit input batch
  Mat w_eff;   // effective weights used on this pass
  Mat e;       // weight noise matrix (empty for plain dense)
  std::vector<double> f2;  // scaled output noise (empty for plain dense)
  bool noisy = false;
  std::string prefix;
};

inline Mat affine_forward(const Mat& x, const AffineUnitDef& u, const ParamStore& params,
                          const NoiseDraw& noise, size_t& noise_idx,
                          std::vector<AffineRec>* recs) {
  AffineRec rec;
  rec.noisy = u.noisy;
  rec.prefix = u.prefix;
  if (!u.noisy) {
    rec.w_eff = params.at(u.prefix + "W");
    Mat y = matmul(x, rec.w_eff);
    add_row_broadcast(y, params.at(u.prefix + "b").row(0));
    if (recs) {
      rec.in = x;
      recs->push_back(std::move(rec));
    }
    return y;
  }
  if (noise_idx >= noise.units.size())
    throw std::invalid_argument("forward: noise draw does not match network spec");
  const LayerNoise& n = noise.units[noise_idx++];
  if (static_cast<int>(n.eps_in.size()) != u.in || static_cast<int>(n.eps_out.size()) != u.out)
    throw std::invalid_argument("forward: noise draw shape mismatch");
  std::vector<double> f1(u.in), f2(u.out);
  for (int i = 0; i < u.in; ++i) f1[i] = noise_scale_fn(n.eps_in[i]);
  for (int j = 0; j < u.out; ++j) f2[j] = noise_scale_fn(n.eps_out[j]);
  Mat e(u.in, u.out);
  for (int i = 0; i < u.in; ++i)
    for (int j = 0; j < u.out; ++j) e(i, j) = f1[i] * f2[j];
  const Mat& wmu = params.at(u.prefix + "Wmu");
  const Mat& wsig = params.at(u.prefix + "Wsig");
  Mat w_eff(u.in, u.out);
  for (size_t k = 0; k < w_eff.a.size(); ++k) w_eff.a[k] = wmu.a[k] + wsig.a[k] * e.a[k];
  Mat y = matmul(x, w_eff);
  const Mat& bmu = params.at(u.prefix + "bmu");
  const Mat& bsig = params.at(u.prefix + "bsig");
  std::vector<double> b_eff(u.out);
  for (int j = 0; j < u.out; ++j) b_eff[j] = bmu.a[j] + bsig.a[j] * f2[j];
  add_row_broadcast(y, b_eff);
  if (recs) {
    rec.in = x;
    rec.w_eff = std::move(w_eff);
    rec.e = std::move(e);
    rec.f2 = std::move(f2);
    recs->push_back(std::move(rec));
  }
  return y;
}

// Accumulates parameter gradients for one affine unit and returns the
// gradient with respect to its input.
inline Mat affine_backward(const AffineRec& rec, const Mat& g, ParamStore& grads) {
  Mat dw = matmul_tn(rec.in, g);
  auto db = col_sums(g);
  if (!rec.noisy) {
    grads.at(rec.prefix + "W") += dw;
    Mat& gb = grads.at(rec.prefix + "b");
    for (int j = 0; j < gb.cols; ++j) gb.a[j] += db[j];
  } else {
    grads.at(rec.prefix + "Wmu") += dw;
    Mat& gs = grads.at(rec.prefix + "Wsig");
    for (size_t k = 0; k < gs.a.size(); ++k) gs.a[k] += dw.a[k] * rec.e.a[k];
    Mat& gbm = grads.at(rec.prefix + "bmu");
    Mat& gbs = grads.at(rec.prefix + "bsig");
    for (int j = 0; j < gbm.cols; ++j) {
      gbm.a[j] += db[j];
      gbs.a[j] += db[j] * rec.f2[j];
    }
  }
  return matmul_nt(g, rec.w_eff);
}

}  // namespace detail

// Per-atom dueling combination: out(b, a*atoms+i) =
//   v(b,i) + adv(b,a*atoms+i) - mean_a' adv(b,a'*atoms+i).
inline Mat dueling_combine_atoms(const Mat& value_stream, const Mat& adv_stream, int action_count,
                                 int atoms) {
  Mat out(adv_stream.rows, adv_stream.cols);
  for (int b = 0; b < adv_stream.rows; ++b) {
    for (int i = 0; i < atoms; ++i) {
      double mean = 0.0;
      for (int a = 0; a < action_count; ++a) mean += adv_stream(b, a * atoms + i);
      mean /= action_count;
      for (int a = 0; a < action_count; ++a)
        out(b, a * atoms + i) = value_stream(b, i) + adv_stream(b, a * atoms + i) - mean;
    }
  }
  return out;
}

// Scalar or distributional dueling aggregation.
//   kMax:          Q = V + A - max_a A          (value B x 1, adv B x |A|)
//   kMean:         Q = V + A - mean_a A
//   kSoftmaxAtoms: per-atom combination followed by softmax across atoms
//                  (value B x atoms, adv B x |A|*atoms).
inline Mat dueling_aggregate(const Mat& value_stream, const Mat& adv_stream, DuelingMode mode,
                             int action_count, int atoms = 1) {
  if (mode == DuelingMode::kSoftmaxAtoms) {
    Mat out = dueling_combine_atoms(value_stream, adv_stream, action_count, atoms);
    for (int b = 0; b < out.rows; ++b)
      for (int a = 0; a < action_count; ++a)
        softmax_span(out.a.data() + static_cast<size_t>(b) * out.cols + a * atoms, atoms);
    return out;
  }
  Mat out(adv_stream.rows, adv_stream.cols);
  for (int b = 0; b < adv_stream.rows; ++b) {
    double agg;
    if (mode == DuelingMode::kMax) {
      agg = adv_stream(b, 0);
      for (int a = 1; a < action_count; ++a) agg = std::max(agg, adv_stream(b, a));
    } else {
      agg = 0.0;
      for (int a = 0; a < action_count; ++a) agg += adv_stream(b, a);
      agg /= action_count;
    }
    for (int a = 0; a < action_count; ++a)
      out(b, a) = value_stream(b, 0) + adv_stream(b, a) - agg;
  }
  return out;
}

// Reverse-pass record. Holds copies of everything the backward pass needs;
// nets here are small enough that value semantics cost nothing that matters.
struct Tape {
  struct TrunkRec {
    bool is_relu = false;
    Mat relu_pre;
    detail::AffineRec aff;
  };
  std::vector<TrunkRec> trunk;
  detail::AffineRec head_a;  // single stream, or value stream / policy stream
  detail::AffineRec head_b;  // advantage stream / critic stream
  bool has_head_b = false;
  std::vector<int> max_idx;  // per-row argmax of the advantage stream (max mode)
  Mat output;
};

// Runs the network on a batch (rows = samples). Deterministic given
// (params, input, noise). Pass a tape to enable backward().
inline Mat forward(const NetworkSpec& spec, const ParamStore& params, const Mat& input,
                   const NoiseDraw& noise, Tape* tape = nullptr) {
  if (input.cols != spec.input_dim) throw std::invalid_argument("forward: input width mismatch");
  auto units = affine_units(spec);
  size_t unit_idx = 0;
  size_t noise_idx = 0;
  Mat cur = input;

  std::vector<detail::AffineRec> recs;
  for (const auto& l : spec.layers) {
    if (l.kind == LayerKind::kRelu) {
      if (tape) {
        Tape::TrunkRec tr;
        tr.is_relu = true;
        tr.relu_pre = cur;
        tape->trunk.push_back(std::move(tr));
      }
      for (auto& v : cur.a) v = v > 0.0 ? v : 0.0;
      continue;
    }
    recs.clear();
    cur = detail::affine_forward(cur, units[unit_idx++], params, noise, noise_idx,
                                 tape ? &recs : nullptr);
    if (tape) {
      Tape::TrunkRec tr;
      tr.aff = std::move(recs[0]);
      tape->trunk.push_back(std::move(tr));
    }
  }

  const int A = spec.action_count;
  const int n_atoms = spec.atoms;
  Mat out;
  auto run_stream = [&](detail::AffineRec* slot) {
    recs.clear();
    Mat y = detail::affine_forward(cur, units[unit_idx++], params, noise, noise_idx,
                                   tape ? &recs : nullptr);
    if (tape && slot) *slot = std::move(recs[0]);
    return y;
  };

  switch (spec.head) {
    case HeadKind::kQValues:
    case HeadKind::kQuantile:
      out = run_stream(tape ? &tape->head_a : nullptr);
      break;
    case HeadKind::kSoftmaxPolicy:
      out = run_stream(tape ? &tape->head_a : nullptr);
      softmax_rows_inplace(out);
      break;
    case HeadKind::kCategorical: {
      out = run_stream(tape ? &tape->head_a : nullptr);
      for (int b = 0; b < out.rows; ++b)
        for (int a = 0; a < A; ++a)
          softmax_span(out.a.data() + static_cast<size_t>(b) * out.cols + a * n_atoms, n_atoms);
      break;
    }
    case HeadKind::kDueling: {
      Mat v = run_stream(tape ? &tape->head_a : nullptr);
      Mat adv = run_stream(tape ? &tape->head_b : nullptr);
      if (tape) {
        tape->has_head_b = true;
        if (spec.dueling_mode == DuelingMode::kMax) {
          tape->max_idx.resize(adv.rows);
          for (int b = 0; b < adv.rows; ++b) {
            int best = 0;
            for (int a = 1; a < A; ++a)
              if (adv(b, a) > adv(b, best)) best = a;
            tape->max_idx[b] = best;
          }
        }
      }
      out = dueling_aggregate(v, adv, spec.dueling_mode, A);
      break;
    }
    case HeadKind::kDuelingCategorical:
    case HeadKind::kDuelingQuantile: {
      Mat v = run_stream(tape ? &tape->head_a : nullptr);
      Mat adv = run_stream(tape ? &tape->head_b : nullptr);
      if (tape) tape->has_head_b = true;
      out = dueling_combine_atoms(v, adv, A, n_atoms);
      if (spec.head == HeadKind::kDuelingCategorical)
        for (int b = 0; b < out.rows; ++b)
          for (int a = 0; a < A; ++a)
            softmax_span(out.a.data() + static_cast<size_t>(b) * out.cols + a * n_atoms, n_atoms);
      break;
    }
    case HeadKind::kActorCritic: {
      Mat pi = run_stream(tape ? &tape->head_a : nullptr);
      Mat v = run_stream(tape ? &tape->head_b : nullptr);
      if (tape) tape->has_head_b = true;
      softmax_rows_inplace(pi);
      out = Mat(pi.rows, A + 1);
      for (int b = 0; b < pi.rows; ++b) {
        for (int a = 0; a < A; ++a) out(b, a) = pi(b, a);
        out(b, A) = v(b, 0);
      }
      break;
    }
  }
  if (tape) tape->output = out;
  return out;
}

namespace detail {

// d(softmax)/d(logits) applied to a gradient w.r.t. probabilities, blockwise:
// dl_i = p_i * (g_i - sum_k p_k g_k).
inline void softmax_jacobian_span(const double* p, const double* g, double* dl, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += p[i] * g[i];
  for (int i = 0; i < n; ++i) dl[i] = p[i] * (g[i] - s);
}

}  // namespace detail

// Exact reverse pass. dout is the gradient of the loss with respect to the
// head output as returned by forward (for softmax heads that means w.r.t.
// the probabilities). Parameter gradients are accumulated into grads.
inline void backward(const NetworkSpec& spec, const Tape& tape, const Mat& dout,
                     ParamStore& grads) {
  const int A = spec.action_count;
  const int n_atoms = spec.atoms;
  Mat d_trunk;

  switch (spec.head) {
    case HeadKind::kQValues:
    case HeadKind::kQuantile:
      d_trunk = detail::affine_backward(tape.head_a, dout, grads);
      break;
    case HeadKind::kSoftmaxPolicy: {
      Mat dl(dout.rows, dout.cols);
      for (int b = 0; b < dout.rows; ++b)
        detail::softmax_jacobian_span(tape.output.row(b).data(), dout.row(b).data(),
                                      dl.row(b).data(), dout.cols);
      d_trunk = detail::affine_backward(tape.head_a, dl, grads);
      break;
    }
    case HeadKind::kCategorical: {
      Mat dl(dout.rows, dout.cols);
      for (int b = 0; b < dout.rows; ++b)
        for (int a = 0; a < A; ++a) {
          size_t off = static_cast<size_t>(b) * dout.cols + a * n_atoms;
          detail::softmax_jacobian_span(tape.output.a.data() + off, dout.a.data() + off,
                                        dl.a.data() + off, n_atoms);
        }
      d_trunk = detail::affine_backward(tape.head_a, dl, grads);
      break;
    }
    case HeadKind::kDueling: {
      Mat dv(dout.rows, 1);
      Mat da(dout.rows, A);
      for (int b = 0; b < dout.rows; ++b) {
        double s = 0.0;
        for (int a = 0; a < A; ++a) s += dout(b, a);
        dv(b, 0) = s;
        if (spec.dueling_mode == DuelingMode::kMax) {
          for (int a = 0; a < A; ++a) da(b, a) = dout(b, a);
          da(b, tape.max_idx[b]) -= s;
        } else {
          for (int a = 0; a < A; ++a) da(b, a) = dout(b, a) - s / A;
        }
      }
      d_trunk = detail::affine_backward(tape.head_a, dv, grads);
      d_trunk += detail::affine_backward(tape.head_b, da, grads);
      break;
    }
    case HeadKind::kDuelingCategorical:
    case HeadKind::kDuelingQuantile: {
      Mat dl = dout;
      if (spec.head == HeadKind::kDuelingCategorical) {
        dl = Mat(dout.rows, dout.cols);
        for (int b = 0; b < dout.rows; ++b)
          for (int a = 0; a < A; ++a) {
            size_t off = static_cast<size_t>(b) * dout.cols + a * n_atoms;
            detail::softmax_jacobian_span(tape.output.a.data() + off, dout.a.data() + off,
                                          dl.a.data() + off, n_atoms);
          }
      }
      Mat dv(dout.rows, n_atoms);
      Mat da(dout.rows, A * n_atoms);
      for (int b = 0; b < dout.rows; ++b)
        for (int i = 0; i < n_atoms; ++i) {
          double s = 0.0;
          for (int a = 0; a < A; ++a) s += dl(b, a * n_atoms + i);
          dv(b, i) = s;
          for (int a = 0; a < A; ++a) da(b, a * n_atoms + i) = dl(b, a * n_atoms + i) - s / A;
        }
      d_trunk = detail::affine_backward(tape.head_a, dv, grads);
      d_trunk += detail::affine_backward(tape.head_b, da, grads);
      break;
    }
    case HeadKind::kActorCritic: {
      Mat dpi(dout.rows, A);
      Mat dv(dout.rows, 1);
      for (int b = 0; b < dout.rows; ++b) {
        detail::softmax_jacobian_span(tape.output.row(b).data(), dout.row(b).data(),
                                      dpi.row(b).data(), A);
        dv(b, 0) = dout(b, A);
      }
      d_trunk = detail::affine_backward(tape.head_a, dpi, grads);
      d_trunk += detail::affine_backward(tape.head_b, dv, grads);
      break;
    }
  }

  for (auto it = tape.trunk.rbegin(); it != tape.trunk.rend(); ++it) {
    if (it->is_relu) {
      for (size_t k = 0; k < d_trunk.a.size(); ++k)
        if (it->relu_pre.a[k] <= 0.0) d_trunk.a[k] = 0.0;
    } else {
      d_trunk = detail::affine_backward(it->aff, d_trunk, grads);
    }
  }
}

}  // namespace rl
