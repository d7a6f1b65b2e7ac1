#pragma once

#include <cstddef>
#include <vector>

#include "uam/action.hpp"
#include "uam/network.hpp"
#include "uam/noise.hpp"
#include "uam/sim.hpp"

namespace uam {

struct ObservationConfig {
  double d_comm = 2500.0;         // m, normalizes intruder distance
  std::size_t max_intruders = 10;
  AltitudeLayerSet layers;        // span normalizes altitudes
};

struct OwnObservation {
  double z_ft = 0.0;
  double z_target_ft = 0.0;
  bool changing = false;
  Action last_action = Action::Hold;
  double z_norm = 0.0;         // (z - lowest) / span
  double z_target_norm = 0.0;
};

struct IntruderObservation {
  double z_rel_ft = 0.0;       // intruder minus own
  double distance_m = 0.0;     // 3-D
  Action last_action = Action::Hold;
  double z_rel_norm = 0.0;     // z_rel / span, in [-1, 1]
  double distance_norm = 0.0;  // distance / d_comm, clamped to [0, 1]
};

struct Observation {
  OwnObservation own;
  std::vector<IntruderObservation> intruders;  // nearest first
};

Observation observe(const World& world, std::size_t id, const RouteRelation& relation,
                    const ObservationConfig& config);

class RewardConfig {
 public:
  RewardConfig() : RewardConfig(0.5, AltitudeLayerSet{}) {}
  RewardConfig(double rho, const AltitudeLayerSet& layers, double lambda = 0.1, double d_los_m = 150.0,
               NpdModel model = NpdModel::rvlt_quadrotor());

  double rho() const { return rho_; }
  double lambda() const { return lambda_; }
  double d_los_m() const { return d_los_m_; }
  double z_min_ft() const { return z_min_ft_; }
  double z_max_ft() const { return z_max_ft_; }
  const NpdModel& model() const { return model_; }
  // Single-event levels at the lowest and highest layer.
  double noise_max_db() const { return noise_max_db_; }
  double noise_min_db() const { return noise_min_db_; }

 private:
  double rho_;
  double lambda_;
  double d_los_m_;
  double z_min_ft_;
  double z_max_ft_;
  NpdModel model_;
  double noise_max_db_;
  double noise_min_db_;
};

// Normalized noise penalty: 0 at the highest layer, -1 at the lowest.
double reward_noise(double z_ft, const RewardConfig& config);

// -min(lambda * #intruders with vertical gap under d_los, 1).
double reward_separation(const Observation& obs, const RewardConfig& config);

double reward_total(double r_noise, double r_sep, double rho);

// Layer an aircraft is counted at for occupancy statistics: its current
// layer when level, the layer it departed from while changing.
double occupied_layer(double z_ft, double z_target_ft, const AltitudeLayerSet& layers);

// (hold, descend, climb); hold is always allowed.
ActionMask action_mask(const AircraftState& state, const AltitudeLayerSet& layers);

}  // namespace uam
