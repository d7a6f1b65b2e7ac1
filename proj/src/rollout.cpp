#include "uam/rollout.hpp"

#include <numeric>

namespace uam {

Decision ActionLogPolicy::decide(const DecisionContext& ctx, const Observation&, const ActionMask&, Rng&) {
  auto it = log_.find({ctx.agent, ctx.t});
  return {it == log_.end() ? Action::Hold : it->second, 0.0, 0.0};
}

Decision NetworkPolicy::decide(const DecisionContext&, const Observation& obs, const ActionMask& mask, Rng& rng) {
  const auto& out = policy_forward(*params_, obs, mask, ws_);
  const SampledAction s = greedy_ ? greedy_action(out) : sample_action(out, rng);
  return {s.action, s.log_prob, out.value};
}

double NetworkPolicy::value(const Observation& obs, const ActionMask& mask) {
  return policy_forward(*params_, obs, mask, ws_).value;
}

double EpisodeRecord::mean_return() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    if (!acted[i]) continue;
    sum += returns[i];
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

EpisodeRecord run_policy_episode(const std::shared_ptr<const ScenarioContext>& context,
                                 const SimConfig& sim, const RewardConfig& reward, Policy& policy, Rng& rng,
                                 const EpisodeOptions& options) {
  World world(context, sim);
  const Network& net = world.network();
  const AltitudeLayerSet& layers = net.layers();
  const ObservationConfig obs_cfg{sim.d_comm, 10, layers};
  const std::size_t n = world.aircraft().size();

  EpisodeRecord rec;
  rec.returns.assign(n, 0.0);
  rec.acted.assign(n, false);
  if (options.record_transitions) rec.trajectories.resize(n);
  std::vector<bool> pending(n, false);

  auto credit = [&](std::size_t i, const Observation& obs, bool done) {
    const double r = reward_total(reward_noise(world.aircraft()[i].z_ft, reward),
                                  reward_separation(obs, reward), reward.rho());
    rec.returns[i] += r;
    if (options.record_transitions) {
      Transition& tr = rec.trajectories[i].back();
      tr.reward = r;
      tr.done = done;
    }
    pending[i] = false;
  };

  JointAction joint(n);
  bool truncated = false;
  while (!world.terminal()) {
    if (world.decision_tick()) {
      spawn_due_aircraft(world);
      if (options.horizon > 0 && rec.decision_ticks == options.horizon) {
        truncated = true;
        break;
      }
      std::fill(joint.begin(), joint.end(), std::nullopt);
      const double t = world.time();
      for (std::size_t i = 0; i < n; ++i) {
        const AircraftState& a = world.aircraft()[i];
        if (a.phase != Phase::Enroute) continue;
        Observation obs = observe(world, i, world.relation(), obs_cfg);
        if (pending[i]) credit(i, obs, false);
        const ActionMask mask = action_mask(a, layers);
        const Decision d = policy.decide({i, t}, obs, mask, rng);
        joint[i] = d.action;
        rec.acted[i] = true;
        if (options.record_trace) {
          const Action executed = mask[action_code(d.action)] ? d.action : Action::Hold;
          double z_target = a.z_target_ft;
          if (executed == Action::Climb) z_target = layers.levels()[layers.index_of(a.z_ft) + 1];
          if (executed == Action::Descend) z_target = layers.levels()[layers.index_of(a.z_ft) - 1];
          const auto& links = world.scenario().routes[a.route].links;
          rec.trace.push_back({t, a.id, a.position.x, a.position.y, a.z_ft, z_target, executed,
                               a.changing || executed != Action::Hold, net.links()[links[a.leg]].id});
        }
        if (options.record_transitions) {
          Transition tr;
          tr.obs = std::move(obs);
          tr.mask = mask;
          tr.action = d.action;
          tr.log_prob = d.log_prob;
          tr.value = d.value;
          tr.agent = i;
          rec.trajectories[i].push_back(std::move(tr));
        }
        pending[i] = true;
      }
      ++rec.decision_ticks;
    }

    std::vector<Phase> before(n);
    for (std::size_t i = 0; i < n; ++i) before[i] = world.aircraft()[i].phase;
    step(world, joint);
    for (std::size_t i = 0; i < n; ++i) {
      if (pending[i] && before[i] == Phase::Enroute && world.aircraft()[i].phase == Phase::Arrived) {
        credit(i, observe(world, i, world.relation(), obs_cfg), true);
      }
    }
  }

  // Time limit or horizon: credit the last actions and bootstrap.
  for (std::size_t i = 0; i < n; ++i) {
    if (!pending[i]) continue;
    Observation obs = observe(world, i, world.relation(), obs_cfg);
    credit(i, obs, false);
    if (options.record_transitions) {
      rec.trajectories[i].back().bootstrap_value =
          policy.value(obs, action_mask(world.aircraft()[i], layers));
    }
  }

  if (truncated) world.close_open_intervals();
  rec.los_events = world.los_events();
  rec.end_time = world.time();
  return rec;
}

EpisodeRecord collect_rollout(const std::shared_ptr<const ScenarioContext>& context, const PolicyParams& params,
                              const SimConfig& sim, const RewardConfig& reward, std::size_t horizon, Rng& rng) {
  NetworkPolicy policy(params, false);
  EpisodeOptions opts;
  opts.horizon = horizon;
  opts.record_transitions = true;
  return run_policy_episode(context, sim, reward, policy, rng, opts);
}

}  // namespace uam
