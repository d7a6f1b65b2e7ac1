#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uam/action.hpp"
#include "uam/mdp.hpp"
#include "uam/policy.hpp"
#include "uam/random.hpp"

namespace uam {

struct Transition {
  Observation obs;
  ActionMask mask{};
  Action action = Action::Hold;
  double log_prob = 0.0;  // under the masked distribution sampled from
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
  // Value of the state after the last transition of a truncated trajectory.
  double bootstrap_value = 0.0;
  std::size_t agent = 0;

  double advantage = 0.0;
  double ret = 0.0;
};

// One trajectory per agent, ordered in time.
using TrajectoryBatch = std::vector<std::vector<Transition>>;

// GAE(gamma, lambda) per trajectory; fills advantage and ret (= advantage +
// value). Advantages are left unnormalized.
void compute_advantages(TrajectoryBatch& batch, double gamma, double lambda);

// Zero mean, unit variance (population); a constant batch becomes all zeros.
void normalize_advantages(std::span<double> advantages);

struct TrainingSample {
  const Observation* obs = nullptr;
  ActionMask mask{};
  Action action = Action::Hold;
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct LossCoefficients {
  double clip_eps = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
};

struct LossStats {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Mean over samples of
//   -min(r A, clip(r, 1-eps, 1+eps) A) + c_v (V - R)^2 - c_e H(pi).
LossStats minibatch_loss(const PolicyParams& params, std::span<const TrainingSample> samples,
                         const LossCoefficients& coefs);

// Loss and its exact gradient (overwrites grad). The serial version
// accumulates sample by sample; the parallel one sums fixed-size chunks
// with OpenMP and reduces them in chunk order, so its result does not
// depend on the thread count.
LossStats minibatch_gradient_serial(const PolicyParams& params, std::span<const TrainingSample> samples,
                                    const LossCoefficients& coefs, std::span<double> grad);
LossStats minibatch_gradient(const PolicyParams& params, std::span<const TrainingSample> samples,
                             const LossCoefficients& coefs, std::span<double> grad);

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const { return t_; }

 private:
  double lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

struct PpoSettings {
  LossCoefficients loss;
  std::size_t epochs = 4;
  std::size_t minibatch_size = 256;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
};

struct UpdateStats {
  LossStats last;
  std::size_t gradient_steps = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Clipped-surrogate PPO over the flattened batch with normalized advantages.
// A non-finite loss restores params and optimizer to their state on entry
// and throws TrainingError with diagnostics.
UpdateStats ppo_update(PolicyParams& params, AdamOptimizer& optimizer, const TrajectoryBatch& batch,
                       const PpoSettings& settings, Rng& rng);

}  // namespace uam
