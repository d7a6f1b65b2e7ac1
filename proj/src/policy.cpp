#include "uam/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uam/errors.hpp"

namespace uam {

PolicyLayout::PolicyLayout(std::size_t hidden_width) : hidden(hidden_width) {
  const std::size_t h = hidden_width;
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    const std::size_t off = at;
    at += n;
    return off;
  };
  own_w1 = take(h * kOwnFeatures);
  own_b1 = take(h);
  own_w2 = take(h * h);
  own_b2 = take(h);
  int_w1 = take(h * kIntruderFeatures);
  int_b1 = take(h);
  int_w2 = take(h * h);
  int_b2 = take(h);
  att_q = take(h * h);
  att_k = take(h * h);
  att_v = take(h * h);
  trunk_w = take(h * 2 * h);
  trunk_b = take(h);
  pi_w = take(kNumActions * h);
  pi_b = take(kNumActions);
  v_w = take(h);
  v_b = take(1);
  total = at;
}

PolicyParams::PolicyParams(std::size_t hidden) : layout_(hidden), values_(layout_.total, 0.0) {}

PolicyParams PolicyParams::initialize(std::size_t hidden, std::uint64_t seed) {
  if (hidden == 0) throw ValidationError("policy: hidden width must be positive");
  PolicyParams p(hidden);
  Rng rng(seed);
  const PolicyLayout& L = p.layout_;
  auto glorot = [&](std::size_t off, std::size_t out, std::size_t in, double gain) {
    const double a = gain * std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < out * in; ++i) p.values_[off + i] = a * (2.0 * uniform01(rng) - 1.0);
  };
  const std::size_t h = hidden;
  glorot(L.own_w1, h, kOwnFeatures, 1.0);
  glorot(L.own_w2, h, h, 1.0);
  glorot(L.int_w1, h, kIntruderFeatures, 1.0);
  glorot(L.int_w2, h, h, 1.0);
  glorot(L.att_q, h, h, 1.0);
  glorot(L.att_k, h, h, 1.0);
  glorot(L.att_v, h, h, 1.0);
  glorot(L.trunk_w, h, 2 * h, 1.0);
  glorot(L.pi_w, kNumActions, h, 0.01);
  glorot(L.v_w, 1, h, 1.0);
  return p;
}

void encode_own(const OwnObservation& own, std::span<double, kOwnFeatures> x) {
  x[0] = own.z_norm;
  x[1] = own.changing ? 1.0 : 0.0;
  x[2] = own.z_target_norm;
  x[3] = x[4] = x[5] = 0.0;
  x[3 + action_code(own.last_action)] = 1.0;
}

void encode_intruder(const IntruderObservation& in, std::span<double, kIntruderFeatures> x) {
  x[0] = in.z_rel_norm;
  x[1] = in.distance_norm;
  x[2] = x[3] = x[4] = 0.0;
  x[2 + action_code(in.last_action)] = 1.0;
}

namespace {

// y = W x (+ b), W row-major [out x in].
void affine(const double* w, const double* b, const double* x, std::size_t out, std::size_t in, double* y) {
  for (std::size_t o = 0; o < out; ++o) {
    const double* row = w + o * in;
    double s = b ? b[o] : 0.0;
    for (std::size_t i = 0; i < in; ++i) s += row[i] * x[i];
    y[o] = s;
  }
}

void tanh_inplace(double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(y[i]);
}

// Given dy for y = W x + b: dW += dy x^T, db += dy, dx (optional) = W^T dy.
void affine_backward(const double* w, const double* x, const double* dy, std::size_t out, std::size_t in,
                     double* dw, double* db, double* dx) {
  if (dx) std::fill(dx, dx + in, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    const double g = dy[o];
    if (db) db[o] += g;
    if (g == 0.0) continue;
    double* drow = dw + o * in;
    const double* row = w + o * in;
    for (std::size_t i = 0; i < in; ++i) drow[i] += g * x[i];
    if (dx) {
      for (std::size_t i = 0; i < in; ++i) dx[i] += g * row[i];
    }
  }
}

// dz = dy * (1 - y^2) for y = tanh(z).
void tanh_backward(const double* y, double* d, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) d[i] *= 1.0 - y[i] * y[i];
}

}  // namespace

const PolicyOutput& policy_forward(const PolicyParams& params, const Observation& obs,
                                   const ActionMask& mask, PolicyWorkspace& ws) {
  if (!mask[0] && !mask[1] && !mask[2]) throw ContractError("policy_forward: mask allows no action");
  const PolicyLayout& L = params.layout();
  const double* p = params.values().data();
  const std::size_t h = L.hidden;
  const std::size_t n = obs.intruders.size();

  ws.mask = mask;
  ws.n_intruders = n;
  ws.own_h1.resize(h);
  ws.own_e.resize(h);
  ws.query.resize(h);
  ws.pooled.assign(h, 0.0);
  ws.concat.resize(2 * h);
  ws.trunk.resize(h);

  encode_own(obs.own, ws.own_x);
  affine(p + L.own_w1, p + L.own_b1, ws.own_x.data(), h, kOwnFeatures, ws.own_h1.data());
  tanh_inplace(ws.own_h1.data(), h);
  affine(p + L.own_w2, p + L.own_b2, ws.own_h1.data(), h, h, ws.own_e.data());
  tanh_inplace(ws.own_e.data(), h);

  if (n > 0) {
    ws.int_x.resize(n * kIntruderFeatures);
    ws.int_h1.resize(n * h);
    ws.int_u.resize(n * h);
    ws.keys.resize(n * h);
    ws.vals.resize(n * h);
    ws.scores.resize(n);
    ws.alpha.resize(n);
    affine(p + L.att_q, nullptr, ws.own_e.data(), h, h, ws.query.data());
    const double scale = 1.0 / std::sqrt(static_cast<double>(h));
    for (std::size_t j = 0; j < n; ++j) {
      double* x = &ws.int_x[j * kIntruderFeatures];
      encode_intruder(obs.intruders[j], std::span<double, kIntruderFeatures>(x, kIntruderFeatures));
      double* h1 = &ws.int_h1[j * h];
      double* u = &ws.int_u[j * h];
      affine(p + L.int_w1, p + L.int_b1, x, h, kIntruderFeatures, h1);
      tanh_inplace(h1, h);
      affine(p + L.int_w2, p + L.int_b2, h1, h, h, u);
      tanh_inplace(u, h);
      affine(p + L.att_k, nullptr, u, h, h, &ws.keys[j * h]);
      affine(p + L.att_v, nullptr, u, h, h, &ws.vals[j * h]);
      double s = 0.0;
      for (std::size_t i = 0; i < h; ++i) s += ws.query[i] * ws.keys[j * h + i];
      ws.scores[j] = s * scale;
    }
    const double mx = *std::max_element(ws.scores.begin(), ws.scores.end());
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += ws.alpha[j] = std::exp(ws.scores[j] - mx);
    for (std::size_t j = 0; j < n; ++j) {
      ws.alpha[j] /= z;
      const double* v = &ws.vals[j * h];
      for (std::size_t i = 0; i < h; ++i) ws.pooled[i] += ws.alpha[j] * v[i];
    }
  }

  std::copy(ws.own_e.begin(), ws.own_e.end(), ws.concat.begin());
  std::copy(ws.pooled.begin(), ws.pooled.end(), ws.concat.begin() + static_cast<std::ptrdiff_t>(h));
  affine(p + L.trunk_w, p + L.trunk_b, ws.concat.data(), h, 2 * h, ws.trunk.data());
  tanh_inplace(ws.trunk.data(), h);

  PolicyOutput& out = ws.out;
  affine(p + L.pi_w, p + L.pi_b, ws.trunk.data(), kNumActions, h, out.logits.data());
  affine(p + L.v_w, p + L.v_b, ws.trunk.data(), 1, h, &out.value);

  constexpr double inf = std::numeric_limits<double>::infinity();
  double mx = -inf;
  for (std::size_t a = 0; a < kNumActions; ++a) {
    if (!mask[a]) out.logits[a] = -inf;
    mx = std::max(mx, out.logits[a]);
  }
  double z = 0.0;
  for (std::size_t a = 0; a < kNumActions; ++a) z += mask[a] ? std::exp(out.logits[a] - mx) : 0.0;
  const double log_z = std::log(z);
  for (std::size_t a = 0; a < kNumActions; ++a) {
    out.log_probs[a] = mask[a] ? out.logits[a] - mx - log_z : -inf;
    out.probs[a] = mask[a] ? std::exp(out.log_probs[a]) : 0.0;
  }
  return out;
}

PolicyOutput policy_forward(const PolicyParams& params, const Observation& obs, const ActionMask& mask) {
  PolicyWorkspace ws;
  return policy_forward(params, obs, mask, ws);
}

void policy_backward(const PolicyParams& params, const PolicyWorkspace& ws,
                     const std::array<double, kNumActions>& d_logits, double d_value,
                     std::span<double> grad) {
  const PolicyLayout& L = params.layout();
  const double* p = params.values().data();
  double* g = grad.data();
  const std::size_t h = L.hidden;
  const std::size_t n = ws.n_intruders;

  std::array<double, kNumActions> dl = d_logits;
  for (std::size_t a = 0; a < kNumActions; ++a) {
    if (!ws.mask[a]) dl[a] = 0.0;
  }

  std::vector<double> d_trunk(h, 0.0);
  {
    std::vector<double> tmp(h);
    affine_backward(p + L.pi_w, ws.trunk.data(), dl.data(), kNumActions, h, g + L.pi_w, g + L.pi_b, d_trunk.data());
    affine_backward(p + L.v_w, ws.trunk.data(), &d_value, 1, h, g + L.v_w, g + L.v_b, tmp.data());
    for (std::size_t i = 0; i < h; ++i) d_trunk[i] += tmp[i];
  }
  tanh_backward(ws.trunk.data(), d_trunk.data(), h);

  std::vector<double> d_concat(2 * h);
  affine_backward(p + L.trunk_w, ws.concat.data(), d_trunk.data(), h, 2 * h, g + L.trunk_w, g + L.trunk_b,
                  d_concat.data());
  std::vector<double> d_e(d_concat.begin(), d_concat.begin() + static_cast<std::ptrdiff_t>(h));
  const double* d_pooled = d_concat.data() + h;

  if (n > 0) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(h));
    // pooled = sum_j alpha_j v_j ; alpha = softmax(scores)
    std::vector<double> d_alpha(n), d_scores(n);
    double weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < h; ++i) s += d_pooled[i] * ws.vals[j * h + i];
      d_alpha[j] = s;
      weighted += ws.alpha[j] * s;
    }
    for (std::size_t j = 0; j < n; ++j) d_scores[j] = ws.alpha[j] * (d_alpha[j] - weighted);

    std::vector<double> d_query(h, 0.0), d_key(h), d_val(h), d_u(h), d_u_tmp(h), d_h1(h);
    for (std::size_t j = 0; j < n; ++j) {
      const double* k = &ws.keys[j * h];
      const double ds = d_scores[j] * scale;
      for (std::size_t i = 0; i < h; ++i) {
        d_query[i] += ds * k[i];
        d_key[i] = ds * ws.query[i];
        d_val[i] = ws.alpha[j] * d_pooled[i];
      }
      const double* u = &ws.int_u[j * h];
      affine_backward(p + L.att_k, u, d_key.data(), h, h, g + L.att_k, nullptr, d_u.data());
      affine_backward(p + L.att_v, u, d_val.data(), h, h, g + L.att_v, nullptr, d_u_tmp.data());
      for (std::size_t i = 0; i < h; ++i) d_u[i] += d_u_tmp[i];
      tanh_backward(u, d_u.data(), h);
      const double* h1 = &ws.int_h1[j * h];
      affine_backward(p + L.int_w2, h1, d_u.data(), h, h, g + L.int_w2, g + L.int_b2, d_h1.data());
      tanh_backward(h1, d_h1.data(), h);
      affine_backward(p + L.int_w1, &ws.int_x[j * kIntruderFeatures], d_h1.data(), h, kIntruderFeatures,
                      g + L.int_w1, g + L.int_b1, nullptr);
    }
    std::vector<double> d_e_q(h);
    affine_backward(p + L.att_q, ws.own_e.data(), d_query.data(), h, h, g + L.att_q, nullptr, d_e_q.data());
    for (std::size_t i = 0; i < h; ++i) d_e[i] += d_e_q[i];
  }

  tanh_backward(ws.own_e.data(), d_e.data(), h);
  std::vector<double> d_h1(h);
  affine_backward(p + L.own_w2, ws.own_h1.data(), d_e.data(), h, h, g + L.own_w2, g + L.own_b2, d_h1.data());
  tanh_backward(ws.own_h1.data(), d_h1.data(), h);
  affine_backward(p + L.own_w1, ws.own_x.data(), d_h1.data(), h, kOwnFeatures, g + L.own_w1, g + L.own_b1,
                  nullptr);
}

SampledAction sample_action(const PolicyOutput& dist, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last_allowed = 0;
  for (std::size_t a = 0; a < kNumActions; ++a) {
    if (dist.probs[a] <= 0.0) continue;
    last_allowed = a;
    acc += dist.probs[a];
    if (u < acc) return {static_cast<Action>(a), dist.log_probs[a]};
  }
  return {static_cast<Action>(last_allowed), dist.log_probs[last_allowed]};
}

SampledAction greedy_action(const PolicyOutput& dist) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < kNumActions; ++a) {
    if (dist.probs[a] > dist.probs[best]) best = a;
  }
  return {static_cast<Action>(best), dist.log_probs[best]};
}

}  // namespace uam
