#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uam/action.hpp"
#include "uam/geometry.hpp"
#include "uam/network.hpp"

namespace uam {

struct SimConfig {
  double dt = 1.0;                   // s
  double decision_interval = 10.0;   // s, integer multiple of dt
  double cruise_speed = 67.0;        // m/s
  double climb_rate = 500.0;         // ft/min
  double d_comm = 2500.0;            // m
  double d_los = 150.0;              // m
  double max_episode_time = 7200.0;  // s

  // Throws ValidationError.
  void validate() const;
  long steps_per_decision() const;
};

enum class Phase { Pending, Enroute, Arrived };

struct AircraftState {
  std::string id;
  std::size_t route = 0;       // index into Scenario::routes
  std::size_t leg = 0;         // position within the route's link list
  double along_m = 0.0;        // distance flown on the current leg
  Vec2 position;
  double z_ft = 0.0;
  double z_target_ft = 0.0;
  double ground_speed = 0.0;   // m/s
  double vertical_rate = 0.0;  // ft/s, signed
  bool changing = false;
  Action last_action = Action::Hold;
  Phase phase = Phase::Pending;
  double departure_s = 0.0;

  double along_fraction(const Scenario& s) const;
};

// 3-D separation in meters; altitudes are converted from feet.
double separation_m(const AircraftState& a, const AircraftState& b);

struct LosPair {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
  double distance_m = 0.0;
  friend bool operator==(const LosPair&, const LosPair&) = default;
};

// One contiguous loss-of-separation interval for a pair.
struct LosEvent {
  std::size_t a = 0;
  std::size_t b = 0;
  double onset_s = 0.0;
  double duration_s = 0.0;
  double min_distance_m = 0.0;
  friend bool operator==(const LosEvent&, const LosEvent&) = default;
};

// Scenario plus its precomputed route relation; immutable and shareable
// across worlds.
struct ScenarioContext {
  Scenario scenario;
  RouteRelation relation;

  static std::shared_ptr<const ScenarioContext> make(Scenario scenario);
};

class World {
 public:
  World(std::shared_ptr<const ScenarioContext> context, SimConfig config);

  const Scenario& scenario() const { return context_->scenario; }
  const Network& network() const { return context_->scenario.network; }
  const RouteRelation& relation() const { return context_->relation; }
  const SimConfig& config() const { return config_; }

  double time() const { return static_cast<double>(tick_) * config_.dt; }
  long tick() const { return tick_; }
  bool decision_tick() const { return tick_ % steps_per_decision_ == 0; }
  // All flights arrived, or the time limit reached.
  bool terminal() const;

  std::vector<AircraftState>& aircraft() { return aircraft_; }
  const std::vector<AircraftState>& aircraft() const { return aircraft_; }
  std::size_t enroute_count() const;

  // Every LOS interval closed so far, in closing order.
  const std::vector<LosEvent>& los_events() const { return events_; }
  // Ends every ongoing LOS interval at the current time and returns them.
  std::vector<LosEvent> close_open_intervals();

 private:
  friend struct StepAccess;

  std::shared_ptr<const ScenarioContext> context_;
  SimConfig config_;
  long steps_per_decision_ = 1;
  long tick_ = 0;
  std::vector<AircraftState> aircraft_;
  std::map<std::pair<std::size_t, std::size_t>, LosEvent> open_;
  std::vector<LosEvent> events_;
};

// Pending flights whose departure time has come enter the airspace at their
// origin, level at the lowest layer. Returns the number spawned.
std::size_t spawn_due_aircraft(World& world);

// Returns the action actually executed: commands issued while a change is
// in progress, or past the top/bottom layer, degrade to hold.
Action apply_altitude_command(AircraftState& state, Action action, const AltitudeLayerSet& layers);

void advance_kinematics(World& world, double dt);

// Other enroute aircraft within d_comm (planar) on related routes, nearest
// first by 3-D distance.
std::vector<std::size_t> neighbors(const World& world, std::size_t id, double d_comm,
                                   const RouteRelation& relation);

// All enroute pairs closer than d_los in 3-D, sorted by (a, b). Small
// worlds use the serial scan, larger ones the OpenMP kernel.
std::vector<LosPair> detect_los(const World& world, double d_los);
std::vector<LosPair> detect_los_serial(const World& world, double d_los);
std::vector<LosPair> detect_los_parallel(const World& world, double d_los);

// Indexed by aircraft; entries for non-enroute aircraft are ignored.
using JointAction = std::vector<std::optional<Action>>;

struct StepResult {
  std::vector<LosEvent> closed;  // intervals that ended during this step
  bool terminal = false;
};

// One physics step: spawn, commands (decision ticks only), kinematics, LOS.
// Throws ContractError when an aircraft that was enroute before the step
// lacks an action on a decision tick; aircraft spawned by the step hold.
StepResult step(World& world, const JointAction& actions);

}  // namespace uam
