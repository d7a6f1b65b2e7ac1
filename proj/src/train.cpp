#include "uam/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "uam/errors.hpp"
#include "uam/rollout.hpp"

namespace uam {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("train config: gamma must be in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ValidationError("train config: gae_lambda must be in [0, 1]");
  if (!(clip_eps > 0.0)) throw ValidationError("train config: clip_eps must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("train config: learning_rate must be positive");
  if (epochs == 0) throw ValidationError("train config: epochs must be >= 1");
  if (minibatch_size == 0) throw ValidationError("train config: minibatch_size must be >= 1");
  if (hidden == 0) throw ValidationError("train config: hidden must be >= 1");
  if (!(entropy_coef >= 0.0) || !(value_coef >= 0.0)) {
    throw ValidationError("train config: loss coefficients must be >= 0");
  }
}

PpoSettings TrainConfig::ppo() const {
  PpoSettings s;
  s.loss = {clip_eps, value_coef, entropy_coef};
  s.epochs = epochs;
  s.minibatch_size = minibatch_size;
  s.max_grad_norm = max_grad_norm;
  return s;
}

double top_layer_fraction(const TrajectoryBatch& batch, const AltitudeLayerSet& layers) {
  std::size_t total = 0;
  std::size_t top = 0;
  for (const auto& traj : batch) {
    for (const auto& tr : traj) {
      ++total;
      if (occupied_layer(tr.obs.own.z_ft, tr.obs.own.z_target_ft, layers) == layers.highest()) ++top;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(top) / static_cast<double>(total);
}

TrainResult train(const std::shared_ptr<const ScenarioContext>& context, const TrainConfig& cfg,
                  const SimConfig& sim, const RewardConfig& reward, const CheckpointCallback& on_checkpoint) {
  cfg.validate();
  sim.validate();
  // Independent streams for initialization and for experience/updates.
  Rng seeder(cfg.seed);
  const std::uint64_t init_seed = seeder();
  Rng rng(seeder());

  TrainResult result{PolicyParams::initialize(cfg.hidden, init_seed), {}};
  AdamOptimizer adam(result.params.size(), cfg.learning_rate);
  const PpoSettings ppo = cfg.ppo();
  const auto& layers = context->scenario.network.layers();

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    EpisodeRecord rec = collect_rollout(context, result.params, sim, reward, cfg.horizon, rng);
    compute_advantages(rec.trajectories, cfg.gamma, cfg.gae_lambda);

    IterationMetrics m;
    m.iteration = it;
    m.mean_return = rec.mean_return();
    m.los_events = static_cast<double>(rec.los_events.size());
    m.top_layer_fraction = top_layer_fraction(rec.trajectories, layers);
    result.log.push_back(m);

    std::size_t samples = 0;
    for (const auto& t : rec.trajectories) samples += t.size();
    if (samples > 0) ppo_update(result.params, adam, rec.trajectories, ppo, rng);

    if (on_checkpoint && cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0) {
      on_checkpoint(it, result.params);
    }
  }
  return result;
}

std::string metrics_log_csv(const std::vector<IterationMetrics>& log) {
  std::ostringstream out;
  out << "iteration,mean_return,mean_los,top_layer_fraction\n";
  char buf[128];
  for (const auto& m : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.6g,%.6g,%.6g\n", m.iteration, m.mean_return, m.los_events,
                  m.top_layer_fraction);
    out << buf;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json train_to_json(const TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"gae_lambda", c.gae_lambda},
          {"clip_eps", c.clip_eps},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"minibatch_size", c.minibatch_size},
          {"horizon", c.horizon},
          {"iterations", c.iterations},
          {"entropy_coef", c.entropy_coef},
          {"value_coef", c.value_coef},
          {"max_grad_norm", c.max_grad_norm},
          {"hidden", c.hidden},
          {"checkpoint_every", c.checkpoint_every},
          {"seed", c.seed}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.gamma = j.at("gamma").get<double>();
  c.gae_lambda = j.at("gae_lambda").get<double>();
  c.clip_eps = j.at("clip_eps").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.minibatch_size = j.at("minibatch_size").get<std::size_t>();
  c.horizon = j.at("horizon").get<std::size_t>();
  c.iterations = j.at("iterations").get<std::size_t>();
  c.entropy_coef = j.at("entropy_coef").get<double>();
  c.value_coef = j.at("value_coef").get<double>();
  c.max_grad_norm = j.at("max_grad_norm").get<double>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json sim_to_json(const SimConfig& s) {
  return {{"dt", s.dt},
          {"decision_interval", s.decision_interval},
          {"cruise_speed", s.cruise_speed},
          {"climb_rate", s.climb_rate},
          {"d_comm", s.d_comm},
          {"d_los", s.d_los},
          {"max_episode_time", s.max_episode_time}};
}

SimConfig sim_from_json(const json& j) {
  SimConfig s;
  s.dt = j.at("dt").get<double>();
  s.decision_interval = j.at("decision_interval").get<double>();
  s.cruise_speed = j.at("cruise_speed").get<double>();
  s.climb_rate = j.at("climb_rate").get<double>();
  s.d_comm = j.at("d_comm").get<double>();
  s.d_los = j.at("d_los").get<double>();
  s.max_episode_time = j.at("max_episode_time").get<double>();
  return s;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json doc;
  doc["schema"] = 1;
  doc["kind"] = "uam-policy";
  doc["hidden"] = ckpt.params.hidden();
  doc["iterations_done"] = ckpt.iterations_done;
  doc["train_config"] = train_to_json(ckpt.train);
  doc["sim_config"] = sim_to_json(ckpt.sim);
  doc["reward_config"] = {{"rho", ckpt.rho}, {"lambda", ckpt.lambda}, {"d_los", ckpt.sim.d_los}};
  doc["layers_ft"] = ckpt.layers.levels();
  doc["weights"] = std::vector<double>(ckpt.params.values().begin(), ckpt.params.values().end());
  return doc.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("checkpoint: parse error: ") + e.what());
  }
  try {
    if (doc.at("schema").get<int>() != 1 || doc.at("kind").get<std::string>() != "uam-policy") {
      throw ValidationError("checkpoint: unsupported schema or kind");
    }
    Checkpoint c;
    c.train = train_from_json(doc.at("train_config"));
    c.sim = sim_from_json(doc.at("sim_config"));
    c.rho = doc.at("reward_config").at("rho").get<double>();
    c.lambda = doc.at("reward_config").at("lambda").get<double>();
    c.layers = AltitudeLayerSet(doc.at("layers_ft").get<std::vector<double>>());
    c.iterations_done = doc.at("iterations_done").get<std::size_t>();
    const auto hidden = doc.at("hidden").get<std::size_t>();
    const auto weights = doc.at("weights").get<std::vector<double>>();
    c.params = PolicyParams(hidden);
    if (weights.size() != c.params.size()) {
      throw ValidationError("checkpoint: expected " + std::to_string(c.params.size()) + " weights for hidden=" +
                            std::to_string(hidden) + ", found " + std::to_string(weights.size()));
    }
    std::copy(weights.begin(), weights.end(), c.params.values().begin());
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
    out << checkpoint_to_json(ckpt);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace uam
