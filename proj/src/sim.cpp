#include "uam/sim.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "uam/errors.hpp"

namespace uam {

void SimConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string("sim config: ") + name + " must be positive");
    }
  };
  positive(dt, "dt");
  positive(decision_interval, "decision_interval");
  positive(cruise_speed, "cruise_speed");
  positive(climb_rate, "climb_rate");
  positive(d_comm, "d_comm");
  positive(d_los, "d_los");
  positive(max_episode_time, "max_episode_time");
  const double ratio = decision_interval / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
    throw ValidationError("sim config: decision_interval must be an integer multiple of dt");
  }
}

long SimConfig::steps_per_decision() const { return std::lround(decision_interval / dt); }

double AircraftState::along_fraction(const Scenario& s) const {
  const auto& r = s.routes[route];
  if (leg >= r.links.size()) return 1.0;
  return along_m / s.network.link_length(r.links[leg]);
}

double separation_m(const AircraftState& a, const AircraftState& b) {
  const double dx = a.position.x - b.position.x;
  const double dy = a.position.y - b.position.y;
  const double dz = (a.z_ft - b.z_ft) * kFeetToMeters;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::shared_ptr<const ScenarioContext> ScenarioContext::make(Scenario scenario) {
  auto ctx = std::make_shared<ScenarioContext>();
  ctx->relation = route_intersections(scenario.network, scenario.routes);
  ctx->scenario = std::move(scenario);
  return ctx;
}

World::World(std::shared_ptr<const ScenarioContext> context, SimConfig config)
    : context_(std::move(context)), config_(config) {
  config_.validate();
  steps_per_decision_ = config_.steps_per_decision();
  const Scenario& s = context_->scenario;
  aircraft_.reserve(s.flights.size());
  for (std::size_t i = 0; i < s.flights.size(); ++i) {
    AircraftState a;
    a.id = s.flights[i].id;
    a.route = s.flight_route[i];
    a.departure_s = s.flights[i].departure_s;
    a.position = s.network.vertiports()[s.routes[a.route].origin].position;
    a.z_ft = a.z_target_ft = s.network.layers().lowest();
    aircraft_.push_back(std::move(a));
  }
}

bool World::terminal() const {
  if (time() >= config_.max_episode_time) return true;
  return std::all_of(aircraft_.begin(), aircraft_.end(),
                     [](const AircraftState& a) { return a.phase == Phase::Arrived; });
}

std::size_t World::enroute_count() const {
  return static_cast<std::size_t>(std::count_if(aircraft_.begin(), aircraft_.end(),
                                                [](const AircraftState& a) { return a.phase == Phase::Enroute; }));
}

std::vector<LosEvent> World::close_open_intervals() {
  std::vector<LosEvent> closed;
  for (auto& [key, ev] : open_) {
    ev.duration_s = time() - ev.onset_s;
    closed.push_back(ev);
    events_.push_back(ev);
  }
  open_.clear();
  return closed;
}

std::size_t spawn_due_aircraft(World& world) {
  std::size_t spawned = 0;
  const double t = world.time();
  const auto& net = world.network();
  for (auto& a : world.aircraft()) {
    if (a.phase != Phase::Pending || a.departure_s > t) continue;
    a.phase = Phase::Enroute;
    a.leg = 0;
    a.along_m = 0.0;
    a.position = net.vertiports()[world.scenario().routes[a.route].origin].position;
    a.z_ft = a.z_target_ft = net.layers().lowest();
    a.changing = false;
    a.vertical_rate = 0.0;
    a.ground_speed = world.config().cruise_speed;
    a.last_action = Action::Hold;
    ++spawned;
  }
  return spawned;
}

Action apply_altitude_command(AircraftState& state, Action action, const AltitudeLayerSet& layers) {
  Action executed = Action::Hold;
  if (!state.changing && action != Action::Hold) {
    const std::size_t at = layers.index_of(state.z_ft);
    if (at != AltitudeLayerSet::npos) {
      if (action == Action::Climb && at + 1 < layers.size()) {
        state.z_target_ft = layers.levels()[at + 1];
        executed = Action::Climb;
      } else if (action == Action::Descend && at > 0) {
        state.z_target_ft = layers.levels()[at - 1];
        executed = Action::Descend;
      }
    }
    state.changing = executed != Action::Hold;
  }
  state.last_action = executed;
  return executed;
}

void advance_kinematics(World& world, double dt) {
  const Scenario& s = world.scenario();
  const Network& net = s.network;
  const SimConfig& cfg = world.config();
  const double climb_fps = cfg.climb_rate / 60.0;
  for (auto& a : world.aircraft()) {
    if (a.phase != Phase::Enroute) continue;

    const auto& links = s.routes[a.route].links;
    double remaining = cfg.cruise_speed * dt;
    a.ground_speed = cfg.cruise_speed;
    while (remaining > 0.0) {
      const double len = net.link_length(links[a.leg]);
      if (a.along_m + remaining < len) {
        a.along_m += remaining;
        break;
      }
      remaining -= len - a.along_m;
      a.along_m = 0.0;
      if (++a.leg == links.size()) {
        a.phase = Phase::Arrived;
        a.ground_speed = 0.0;
        break;
      }
    }
    if (a.phase == Phase::Arrived) {
      a.position = net.vertiports()[s.routes[a.route].destination].position;
      a.leg = links.size() - 1;
      a.along_m = net.link_length(links[a.leg]);
    } else {
      const double f = a.along_m / net.link_length(links[a.leg]);
      const Vec2 p0 = net.link_start(links[a.leg]);
      const Vec2 p1 = net.link_end(links[a.leg]);
      a.position = p0 + f * (p1 - p0);
    }

    if (a.changing) {
      const double dz = a.z_target_ft - a.z_ft;
      const double max_step = climb_fps * dt;
      if (std::abs(dz) <= max_step) {
        a.z_ft = a.z_target_ft;
        a.changing = false;
        a.vertical_rate = 0.0;
      } else {
        a.vertical_rate = dz > 0.0 ? climb_fps : -climb_fps;
        a.z_ft += a.vertical_rate * dt;
      }
    }
  }
}

std::vector<std::size_t> neighbors(const World& world, std::size_t id, double d_comm,
                                   const RouteRelation& relation) {
  const auto& all = world.aircraft();
  const AircraftState& self = all[id];
  std::vector<std::pair<double, std::size_t>> found;
  for (std::size_t j = 0; j < all.size(); ++j) {
    const AircraftState& other = all[j];
    if (j == id || other.phase != Phase::Enroute) continue;
    if (!relation.related(self.route, other.route)) continue;
    if (distance(self.position, other.position) > d_comm) continue;
    found.emplace_back(separation_m(self, other), j);
  }
  std::sort(found.begin(), found.end());
  std::vector<std::size_t> out;
  out.reserve(found.size());
  for (const auto& f : found) out.push_back(f.second);
  return out;
}

std::vector<LosPair> detect_los_serial(const World& world, double d_los) {
  const auto& all = world.aircraft();
  std::vector<LosPair> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].phase != Phase::Enroute) continue;
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      if (all[j].phase != Phase::Enroute) continue;
      const double d = separation_m(all[i], all[j]);
      if (d < d_los) out.push_back({i, j, d});
    }
  }
  return out;
}

std::vector<LosPair> detect_los(const World& world, double d_los) {
  if (world.aircraft().size() < 64) return detect_los_serial(world, d_los);
  return detect_los_parallel(world, d_los);
}

std::vector<LosPair> detect_los_parallel(const World& world, double d_los) {
  const auto& all = world.aircraft();
  const long n = static_cast<long>(all.size());

  // Row-wise partition; rows are concatenated in order so the result
  // matches the serial scan exactly.
  std::vector<std::vector<LosPair>> rows(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i) {
    const auto& a = all[static_cast<std::size_t>(i)];
    if (a.phase != Phase::Enroute) continue;
    auto& row = rows[static_cast<std::size_t>(i)];
    for (long j = i + 1; j < n; ++j) {
      const auto& b = all[static_cast<std::size_t>(j)];
      if (b.phase != Phase::Enroute) continue;
      const double d = separation_m(a, b);
      if (d < d_los) row.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), d});
    }
  }
  std::vector<LosPair> out;
  for (auto& row : rows) out.insert(out.end(), row.begin(), row.end());
  return out;
}

struct StepAccess {
  static void track_los(World& w, const std::vector<LosPair>& now, StepResult& result) {
    const double t = w.time();
    std::map<std::pair<std::size_t, std::size_t>, double> current;
    for (const auto& p : now) current.emplace(std::pair{p.a, p.b}, p.distance_m);

    for (auto it = w.open_.begin(); it != w.open_.end();) {
      auto cur = current.find(it->first);
      if (cur == current.end()) {
        it->second.duration_s = t - it->second.onset_s;
        result.closed.push_back(it->second);
        w.events_.push_back(it->second);
        it = w.open_.erase(it);
      } else {
        it->second.min_distance_m = std::min(it->second.min_distance_m, cur->second);
        ++it;
      }
    }
    for (const auto& [key, d] : current) {
      if (!w.open_.contains(key)) w.open_.emplace(key, LosEvent{key.first, key.second, t, 0.0, d});
    }
  }

  static void advance_clock(World& w) { ++w.tick_; }

  static void flush(World& w, StepResult& result) {
    auto closed = w.close_open_intervals();
    result.closed.insert(result.closed.end(), closed.begin(), closed.end());
  }
};

StepResult step(World& world, const JointAction& actions) {
  StepResult result;
  if (world.terminal()) {
    StepAccess::flush(world, result);
    result.terminal = true;
    return result;
  }

  auto& all = world.aircraft();
  std::vector<bool> was_enroute(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) was_enroute[i] = all[i].phase == Phase::Enroute;
  spawn_due_aircraft(world);

  if (world.decision_tick()) {
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all[i].phase != Phase::Enroute) continue;
      const bool given = i < actions.size() && actions[i];
      if (!given && !was_enroute[i]) continue;  // spawned this step: holds
      if (!given) {
        throw ContractError("step: missing action for enroute aircraft '" + all[i].id + "' at t=" +
                            std::to_string(world.time()));
      }
      apply_altitude_command(all[i], *actions[i], world.network().layers());
    }
  }

  advance_kinematics(world, world.config().dt);
  StepAccess::advance_clock(world);

  StepAccess::track_los(world, detect_los(world, world.config().d_los), result);
  result.terminal = world.terminal();
  if (result.terminal) StepAccess::flush(world, result);
  return result;
}

}  // namespace uam
