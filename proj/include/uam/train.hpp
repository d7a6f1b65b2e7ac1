#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "uam/mdp.hpp"
#include "uam/policy.hpp"
#include "uam/ppo.hpp"
#include "uam/sim.hpp"

namespace uam {

// One iteration = one rollout episode followed by one PPO update.
struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double learning_rate = 3e-4;
  std::size_t epochs = 4;
  std::size_t minibatch_size = 256;
  std::size_t horizon = 0;  // decision ticks per rollout; 0 = full episode
  std::size_t iterations = 0;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  std::size_t hidden = 64;
  std::size_t checkpoint_every = 0;  // 0 = no intermediate checkpoints
  std::uint64_t seed = 0;

  void validate() const;
  PpoSettings ppo() const;
};

struct IterationMetrics {
  std::size_t iteration = 0;
  double mean_return = 0.0;
  double los_events = 0.0;
  double top_layer_fraction = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<IterationMetrics> log;
};

using CheckpointCallback = std::function<void(std::size_t iteration, const PolicyParams&)>;

TrainResult train(const std::shared_ptr<const ScenarioContext>& context, const TrainConfig& train_config,
                  const SimConfig& sim, const RewardConfig& reward, const CheckpointCallback& on_checkpoint = {});

// CSV: iteration,mean_return,mean_los,top_layer_fraction
std::string metrics_log_csv(const std::vector<IterationMetrics>& log);

// Fraction of (aircraft, decision tick) samples counted at the top layer.
double top_layer_fraction(const TrajectoryBatch& batch, const AltitudeLayerSet& layers);

// Weights plus every config that produced them.
struct Checkpoint {
  PolicyParams params;
  TrainConfig train;
  SimConfig sim;
  double rho = 0.5;
  double lambda = 0.1;
  AltitudeLayerSet layers;
  std::size_t iterations_done = 0;

  RewardConfig reward_config() const { return RewardConfig(rho, layers, lambda, sim.d_los); }
};

// Structured text (JSON, schema 1); doubles use round-trip precision so the
// weights reload bit-exactly.
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace uam
