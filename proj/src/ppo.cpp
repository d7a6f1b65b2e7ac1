#include "uam/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "uam/errors.hpp"

namespace uam {

void compute_advantages(TrajectoryBatch& batch, double gamma, double lambda) {
  for (auto& traj : batch) {
    double gae = 0.0;
    for (std::size_t k = traj.size(); k-- > 0;) {
      Transition& tr = traj[k];
      double next_value;
      if (k + 1 == traj.size()) {
        next_value = tr.done ? 0.0 : tr.bootstrap_value;
      } else {
        next_value = traj[k + 1].value;
      }
      const double delta = tr.reward + gamma * next_value - tr.value;
      gae = delta + gamma * lambda * gae;
      tr.advantage = gae;
      tr.ret = gae + tr.value;
    }
  }
}

void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : 0.0;
}

namespace {

struct SampleTerms {
  double loss, policy, value, entropy;
  bool clipped;
  std::array<double, kNumActions> d_logits;
  double d_value;
};

SampleTerms sample_terms(const PolicyOutput& out, const TrainingSample& s, const LossCoefficients& c) {
  SampleTerms t{};
  const std::size_t a = static_cast<std::size_t>(s.action);
  const double logp = out.log_probs[a];
  const double ratio = std::exp(logp - s.old_log_prob);
  const double clipped = std::clamp(ratio, 1.0 - c.clip_eps, 1.0 + c.clip_eps);
  const double surr1 = ratio * s.advantage;
  const double surr2 = clipped * s.advantage;
  t.policy = -std::min(surr1, surr2);
  t.clipped = surr2 < surr1;
  // d(-min)/dlogp: the unclipped branch carries the gradient.
  const double d_logp = t.clipped ? 0.0 : -s.advantage * ratio;

  double entropy = 0.0;
  for (std::size_t k = 0; k < kNumActions; ++k) {
    if (out.probs[k] > 0.0) entropy -= out.probs[k] * out.log_probs[k];
  }
  t.entropy = entropy;

  const double err = out.value - s.ret;
  t.value = err * err;
  t.loss = t.policy + c.value_coef * t.value - c.entropy_coef * entropy;

  for (std::size_t k = 0; k < kNumActions; ++k) {
    if (!s.mask[k]) {
      t.d_logits[k] = 0.0;
      continue;
    }
    const double pk = out.probs[k];
    const double dlogp_dk = (k == a ? 1.0 : 0.0) - pk;
    // dH/dlogit_k = -p_k (log p_k + H)
    const double dh_dk = pk > 0.0 ? -pk * (out.log_probs[k] + entropy) : 0.0;
    t.d_logits[k] = d_logp * dlogp_dk - c.entropy_coef * dh_dk;
  }
  t.d_value = 2.0 * c.value_coef * err;
  return t;
}

void add_stats(LossStats& acc, const SampleTerms& t) {
  acc.total += t.loss;
  acc.policy += t.policy;
  acc.value += t.value;
  acc.entropy += t.entropy;
  acc.clip_fraction += t.clipped ? 1.0 : 0.0;
}

void scale_stats(LossStats& s, double inv) {
  s.total *= inv;
  s.policy *= inv;
  s.value *= inv;
  s.entropy *= inv;
  s.clip_fraction *= inv;
}

constexpr std::size_t kChunk = 16;

}  // namespace

LossStats minibatch_loss(const PolicyParams& params, std::span<const TrainingSample> samples,
                         const LossCoefficients& coefs) {
  LossStats stats;
  PolicyWorkspace ws;
  for (const auto& s : samples) {
    const auto& out = policy_forward(params, *s.obs, s.mask, ws);
    add_stats(stats, sample_terms(out, s, coefs));
  }
  if (!samples.empty()) scale_stats(stats, 1.0 / static_cast<double>(samples.size()));
  return stats;
}

LossStats minibatch_gradient_serial(const PolicyParams& params, std::span<const TrainingSample> samples,
                                    const LossCoefficients& coefs, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  LossStats stats;
  PolicyWorkspace ws;
  for (const auto& s : samples) {
    const auto& out = policy_forward(params, *s.obs, s.mask, ws);
    const SampleTerms t = sample_terms(out, s, coefs);
    add_stats(stats, t);
    policy_backward(params, ws, t.d_logits, t.d_value, grad);
  }
  if (!samples.empty()) {
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (double& g : grad) g *= inv;
    scale_stats(stats, inv);
  }
  return stats;
}

LossStats minibatch_gradient(const PolicyParams& params, std::span<const TrainingSample> samples,
                             const LossCoefficients& coefs, std::span<double> grad) {
  const std::size_t n = samples.size();
  const std::size_t p = params.size();
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks * p, 0.0);
  std::vector<LossStats> chunk_stats(chunks);

#pragma omp parallel
  {
    PolicyWorkspace ws;
#pragma omp for schedule(static)
    for (long c = 0; c < static_cast<long>(chunks); ++c) {
      const std::size_t cc = static_cast<std::size_t>(c);
      std::span<double> g(&partial[cc * p], p);
      const std::size_t end = std::min(n, (cc + 1) * kChunk);
      for (std::size_t i = cc * kChunk; i < end; ++i) {
        const auto& out = policy_forward(params, *samples[i].obs, samples[i].mask, ws);
        const SampleTerms t = sample_terms(out, samples[i], coefs);
        add_stats(chunk_stats[cc], t);
        policy_backward(params, ws, t.d_logits, t.d_value, g);
      }
    }
  }

  std::fill(grad.begin(), grad.end(), 0.0);
  LossStats stats;
  for (std::size_t c = 0; c < chunks; ++c) {
    const double* g = &partial[c * p];
    for (std::size_t k = 0; k < p; ++k) grad[k] += g[k];
    stats.total += chunk_stats[c].total;
    stats.policy += chunk_stats[c].policy;
    stats.value += chunk_stats[c].value;
    stats.entropy += chunk_stats[c].entropy;
    stats.clip_fraction += chunk_stats[c].clip_fraction;
  }
  if (n > 0) {
    const double inv = 1.0 / static_cast<double>(n);
    for (double& g : grad) g *= inv;
    scale_stats(stats, inv);
  }
  return stats;
}

AdamOptimizer::AdamOptimizer(std::size_t n, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
  }
}

UpdateStats ppo_update(PolicyParams& params, AdamOptimizer& optimizer, const TrajectoryBatch& batch,
                       const PpoSettings& settings, Rng& rng) {
  std::vector<TrainingSample> samples;
  for (const auto& traj : batch) {
    for (const auto& tr : traj) {
      samples.push_back({&tr.obs, tr.mask, tr.action, tr.log_prob, tr.advantage, tr.ret});
    }
  }
  if (samples.empty()) throw ContractError("ppo_update: empty batch");

  std::vector<double> adv(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) adv[i] = samples[i].advantage;
  normalize_advantages(adv);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].advantage = adv[i];

  const PolicyParams params_on_entry = params;
  const AdamOptimizer optimizer_on_entry = optimizer;

  UpdateStats stats;
  std::vector<double> grad(params.size());
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainingSample> mb;
  const std::size_t mb_size = std::max<std::size_t>(1, settings.minibatch_size);

  for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += mb_size) {
      const std::size_t end = std::min(order.size(), start + mb_size);
      mb.clear();
      for (std::size_t i = start; i < end; ++i) mb.push_back(samples[order[i]]);

      const LossStats ls = minibatch_gradient(params, mb, settings.loss, grad);
      double norm2 = 0.0;
      for (double g : grad) norm2 += g * g;
      if (!std::isfinite(ls.total) || !std::isfinite(norm2)) {
        params = params_on_entry;
        optimizer = optimizer_on_entry;
        std::ostringstream msg;
        msg << "ppo_update: non-finite loss at epoch " << epoch << ", minibatch starting " << start
            << " (policy=" << ls.policy << ", value=" << ls.value << ", entropy=" << ls.entropy
            << ", grad_norm^2=" << norm2 << ")";
        throw TrainingError(msg.str());
      }
      if (settings.max_grad_norm > 0.0) {
        const double nrm = std::sqrt(norm2);
        if (nrm > settings.max_grad_norm) {
          const double s = settings.max_grad_norm / nrm;
          for (double& g : grad) g *= s;
        }
      }
      optimizer.step(params.values(), grad);
      stats.last = ls;
      ++stats.gradient_steps;
    }
  }
  return stats;
}

}  // namespace uam
