#include "uam/mdp.hpp"

#include <algorithm>
#include <cmath>

#include "uam/errors.hpp"

namespace uam {

Observation observe(const World& world, std::size_t id, const RouteRelation& relation,
                    const ObservationConfig& config) {
  const auto& all = world.aircraft();
  const AircraftState& self = all[id];
  const double lo = config.layers.lowest();
  const double span = config.layers.span();

  Observation obs;
  obs.own.z_ft = self.z_ft;
  obs.own.z_target_ft = self.z_target_ft;
  obs.own.changing = self.changing;
  obs.own.last_action = self.last_action;
  obs.own.z_norm = std::clamp((self.z_ft - lo) / span, 0.0, 1.0);
  obs.own.z_target_norm = std::clamp((self.z_target_ft - lo) / span, 0.0, 1.0);

  auto ids = neighbors(world, id, config.d_comm, relation);
  if (ids.size() > config.max_intruders) ids.resize(config.max_intruders);
  obs.intruders.reserve(ids.size());
  for (auto j : ids) {
    const AircraftState& other = all[j];
    IntruderObservation in;
    in.z_rel_ft = other.z_ft - self.z_ft;
    in.distance_m = separation_m(self, other);
    in.last_action = other.last_action;
    in.z_rel_norm = std::clamp(in.z_rel_ft / span, -1.0, 1.0);
    in.distance_norm = std::clamp(in.distance_m / config.d_comm, 0.0, 1.0);
    obs.intruders.push_back(in);
  }
  return obs;
}

RewardConfig::RewardConfig(double rho, const AltitudeLayerSet& layers, double lambda, double d_los_m,
                           NpdModel model)
    : rho_(rho),
      lambda_(lambda),
      d_los_m_(d_los_m),
      z_min_ft_(layers.lowest()),
      z_max_ft_(layers.highest()),
      model_(std::move(model)),
      noise_max_db_(single_event_level(model_, kLevelCenterline, z_min_ft_)),
      noise_min_db_(single_event_level(model_, kLevelCenterline, z_max_ft_)) {
  if (!(rho_ >= 0.0 && rho_ <= 1.0)) throw ValidationError("reward config: rho must be in [0, 1]");
  if (!(lambda_ >= 0.0) || !std::isfinite(lambda_)) throw ValidationError("reward config: lambda must be >= 0");
  if (!(d_los_m_ > 0.0)) throw ValidationError("reward config: d_los must be positive");
  if (!(noise_max_db_ > noise_min_db_)) {
    throw ValidationError("reward config: noise at the lowest layer must exceed noise at the highest");
  }
}

double reward_noise(double z_ft, const RewardConfig& config) {
  const double level = single_event_level(config.model(), kLevelCenterline, z_ft);
  return (config.noise_min_db() - level) / (config.noise_max_db() - config.noise_min_db());
}

double reward_separation(const Observation& obs, const RewardConfig& config) {
  std::size_t close = 0;
  for (const auto& in : obs.intruders) {
    if (std::abs(in.z_rel_ft) * kFeetToMeters < config.d_los_m()) ++close;
  }
  return -std::min(config.lambda() * static_cast<double>(close), 1.0);
}

double reward_total(double r_noise, double r_sep, double rho) {
  return rho * r_noise + (1.0 - rho) * r_sep;
}

double occupied_layer(double z_ft, double z_target_ft, const AltitudeLayerSet& layers) {
  const auto& lv = layers.levels();
  if (z_target_ft >= z_ft) {
    // Level or climbing: the highest layer at or below z.
    auto it = std::upper_bound(lv.begin(), lv.end(), z_ft);
    return it == lv.begin() ? lv.front() : *(it - 1);
  }
  auto it = std::lower_bound(lv.begin(), lv.end(), z_ft);
  return it == lv.end() ? lv.back() : *it;
}

ActionMask action_mask(const AircraftState& state, const AltitudeLayerSet& layers) {
  if (state.changing) return {true, false, false};
  const std::size_t at = layers.index_of(state.z_ft);
  if (at == AltitudeLayerSet::npos) return {true, false, false};
  return {true, at > 0, at + 1 < layers.size()};
}

}  // namespace uam
