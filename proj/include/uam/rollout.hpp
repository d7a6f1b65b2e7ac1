#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "uam/mdp.hpp"
#include "uam/policy.hpp"
#include "uam/ppo.hpp"
#include "uam/sim.hpp"
#include "uam/trace.hpp"

namespace uam {

struct DecisionContext {
  std::size_t agent = 0;
  double t = 0.0;
};

struct Decision {
  Action action = Action::Hold;
  double log_prob = 0.0;
  double value = 0.0;
};

// Decentralized execution: each enroute aircraft asks the policy for an
// action from its own observation.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Decision decide(const DecisionContext& ctx, const Observation& obs, const ActionMask& mask,
                          Rng& rng) = 0;
  virtual double value(const Observation&, const ActionMask&) { return 0.0; }
};

class HoldPolicy final : public Policy {
 public:
  Decision decide(const DecisionContext&, const Observation&, const ActionMask&, Rng&) override {
    return {Action::Hold, 0.0, 0.0};
  }
};

// Replays a fixed action log keyed by (agent, decision time); missing
// entries hold.
class ActionLogPolicy final : public Policy {
 public:
  explicit ActionLogPolicy(std::map<std::pair<std::size_t, double>, Action> log) : log_(std::move(log)) {}
  Decision decide(const DecisionContext& ctx, const Observation&, const ActionMask&, Rng&) override;

 private:
  std::map<std::pair<std::size_t, double>, Action> log_;
};

class NetworkPolicy final : public Policy {
 public:
  NetworkPolicy(const PolicyParams& params, bool greedy) : params_(&params), greedy_(greedy) {}
  Decision decide(const DecisionContext& ctx, const Observation& obs, const ActionMask& mask,
                  Rng& rng) override;
  double value(const Observation& obs, const ActionMask& mask) override;

 private:
  const PolicyParams* params_;
  bool greedy_;
  PolicyWorkspace ws_;
};

struct EpisodeOptions {
  std::size_t horizon = 0;  // max decision ticks, 0 = run to completion
  bool record_transitions = false;
  bool record_trace = false;
};

struct EpisodeRecord {
  TrajectoryBatch trajectories;  // indexed by aircraft; empty unless recorded
  std::vector<TraceRow> trace;
  std::vector<double> returns;   // undiscounted reward sum per aircraft
  std::vector<bool> acted;       // aircraft that made at least one decision
  std::vector<LosEvent> los_events;
  double end_time = 0.0;
  std::size_t decision_ticks = 0;

  // Mean return over aircraft that acted; 0 when none did.
  double mean_return() const;
};

// Runs one episode. Each action is credited with the reward of the state
// reached at the next decision tick, or at arrival.
EpisodeRecord run_policy_episode(const std::shared_ptr<const ScenarioContext>& context,
                                 const SimConfig& sim, const RewardConfig& reward, Policy& policy, Rng& rng,
                                 const EpisodeOptions& options);

// Training rollout: every aircraft samples from the shared parameters.
EpisodeRecord collect_rollout(const std::shared_ptr<const ScenarioContext>& context, const PolicyParams& params,
                              const SimConfig& sim, const RewardConfig& reward, std::size_t horizon, Rng& rng);

}  // namespace uam
