// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "helpers.hpp"
#include "uam/errors.hpp"
#include "uam/mdp.hpp"
#include "uam/metrics.hpp"
#include "uam/noise.hpp"
#include "uam/policy.hpp"
#include "uam/ppo.hpp"
#include "uam/random.hpp"
#include "uam/rollout.hpp"
#include "uam/sweep.hpp"
#include "uam/train.hpp"

using namespace uam;
using Clock = std::chrono::steady_clock;

namespace {

// Criterion 9 setup.
constexpr const char* kLineScenario = "line3.json";
constexpr std::size_t kLineHidden = 16;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %d %s (%.2f s) %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), s, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "uam");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome golden_levels() {
  const NpdModel m = NpdModel::rvlt_quadrotor();
  const std::pair<double, double> cases[] = {{1000, 74.14}, {3000, 67.57}, {200, 81.60}, {20000, 53.43}};
  Outcome o;
  for (auto [z, want] : cases) {
    const double got = single_event_level(m, kLevelCenterline, z);
    o.detail += fmt("%.0fft=%.3f ", z, got);
    if (std::abs(got - want) > 0.01) o.pass = false;
  }
  return o;
}

Outcome fit_recovery() {
  const NpdModel m = NpdModel::rvlt_quadrotor();
  double worst = 0;
  for (std::size_t c = 0; c < 6; ++c) {
    const NpdCoefficients k = m.coefficients(Condition::from_index(c));
    std::vector<NoiseSample> s;
    for (double z : {200.0, 500.0, 1000.0, 2000.0, 5000.0, 10000.0, 20000.0}) s.push_back({z, k.evaluate(z)});
    const NpdCoefficients f = fit_npd(s).coefficients;
    worst = std::max({worst, std::abs(f.c0 - k.c0), std::abs(f.c1 - k.c1), std::abs(f.c2 - k.c2)});
  }
  return {worst <= 1e-6, fmt("max coefficient error %.3g", worst)};
}

Outcome cumulative_laws() {
  Outcome o;
  for (double level : {50.0, 74.14, 90.0}) {
    const double one = *energy_sum_db(std::vector<double>{level});
    for (int k : {2, 4, 10}) {
      const double many = *energy_sum_db(std::vector<double>(static_cast<std::size_t>(k), level));
      if (std::abs(many - one - 10 * std::log10(k)) > 1e-9) o.pass = false;
    }
  }
  const double inc = *cumulative_increase(std::vector<double>{74.14}, 40.0);
  if (std::abs(inc - (-1.42)) > 0.01) o.pass = false;
  o.detail = fmt("example increase %.4f dB", inc);
  return o;
}

std::vector<LosPair> brute_force_los(const World& w, double d_los) {
  std::vector<LosPair> out;
  const auto& a = w.aircraft();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if (a[i].phase != Phase::Enroute || a[j].phase != Phase::Enroute) continue;
      const double dx = a[i].position.x - a[j].position.x, dy = a[i].position.y - a[j].position.y;
      const double dz = (a[i].z_ft - a[j].z_ft) * 0.3048;
      const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (d < d_los) out.push_back({i, j, d});
    }
  return out;
}

Outcome los_oracle() {
  // Two opposing flows of ten on one corridor with random altitude commands.
  test::Doc d;
  d.vertiport("A", 0, 0).vertiport("B", 40000, 0).both("A", "B");
  for (int k = 0; k < 10; ++k) {
    d.flight("ab" + std::to_string(k), "A", "B", 20.0 * k);
    d.flight("ba" + std::to_string(k), "B", "A", 20.0 * k + 5);
  }
  d.single_zone();
  World w(ScenarioContext::make(d.scenario()), {});
  Rng rng(20);
  const auto t0 = Clock::now();
  std::size_t steps = 0, mismatches = 0, pairs = 0;
  while (!w.terminal() && steps < 600) {
    JointAction j(w.aircraft().size());
    for (auto& a : j) a = kAllActions[uniform_index(rng, 3)];
    step(w, j);
    ++steps;
    const auto want = brute_force_los(w, w.config().d_los);
    pairs += want.size();
    if (detect_los(w, w.config().d_los) != want) ++mismatches;
    if (detect_los_serial(w, w.config().d_los) != want) ++mismatches;
    if (detect_los_parallel(w, w.config().d_los) != want) ++mismatches;
  }
  const double s = seconds_since(t0);
  return {steps == 600 && mismatches == 0 && pairs > 0 && s < 10,
          fmt("%.0f steps, %.0f LOS pair-steps, %.0f mismatches", double(steps), double(pairs), double(mismatches))};
}

Outcome reward_contracts() {
  const AltitudeLayerSet layers;
  Outcome o;
  for (double rho : {0.0, 0.5, 1.0}) {
    const RewardConfig cfg(rho, layers);
    if (reward_noise(layers.highest(), cfg) != 0.0 || reward_noise(layers.lowest(), cfg) != -1.0) o.pass = false;
    auto with = [](std::size_t n, double z_rel) {
      Observation obs;
      for (std::size_t i = 0; i < n; ++i) {
        IntruderObservation in;
        in.z_rel_ft = z_rel;
        obs.intruders.push_back(in);
      }
      return obs;
    };
    if (reward_separation(with(0, 0), cfg) != 0.0) o.pass = false;
    if (reward_separation(with(4, 0), cfg) != -0.4) o.pass = false;
    if (reward_separation(with(12, 0), cfg) != -1.0) o.pass = false;
    // Adjacent layer: 500 ft = 152.4 m.
    if (reward_separation(with(3, 500), cfg) != 0.0 || reward_separation(with(3, -500), cfg) != 0.0) o.pass = false;
  }
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double n = -uniform01(rng), s = -uniform01(rng), rho = uniform01(rng);
    const double direct = reward_total(n, s, rho);
    if (direct != rho * n + (1 - rho) * s) o.pass = false;
    if (std::abs(direct - (rho * reward_total(n, s, 1.0) + (1 - rho) * reward_total(n, s, 0.0))) > 1e-15)
      o.pass = false;
  }
  return o;
}

Observation random_obs(Rng& rng, std::size_t max_intruders) {
  Observation o;
  o.own.z_norm = uniform01(rng);
  o.own.z_target_norm = uniform01(rng);
  o.own.changing = uniform01(rng) < 0.3;
  o.own.last_action = kAllActions[uniform_index(rng, 3)];
  const std::size_t n = uniform_index(rng, max_intruders + 1);
  for (std::size_t i = 0; i < n; ++i) {
    IntruderObservation in;
    in.z_rel_norm = 2 * uniform01(rng) - 1;
    in.distance_norm = uniform01(rng);
    in.last_action = kAllActions[uniform_index(rng, 3)];
    o.intruders.push_back(in);
  }
  return o;
}

Outcome gradient_check() {
  Rng rng(123);
  PolicyParams params = PolicyParams::initialize(4, 7);
  for (double& w : params.values()) w += 0.3 * (uniform01(rng) - 0.5);
  if (params.size() > 200) return {false, "network too large"};
  std::vector<Observation> obs;
  for (int i = 0; i < 20; ++i) obs.push_back(random_obs(rng, 4));
  std::vector<TrainingSample> samples;
  for (const auto& o : obs) {
    const ActionMask mask{true, uniform01(rng) < 0.7, uniform01(rng) < 0.7};
    const auto out = policy_forward(params, o, mask);
    Action a;
    do a = kAllActions[uniform_index(rng, 3)];
    while (!mask[action_code(a)]);
    const double old = out.log_probs[action_code(a)] + 0.1 * (uniform01(rng) - 0.5);
    samples.push_back({&o, mask, a, old, 2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1});
  }
  const LossCoefficients coefs{0.2, 0.5, 0.01};
  std::vector<double> grad(params.size());
  minibatch_gradient_serial(params, samples, coefs, grad);
  std::vector<double> par(params.size());
  minibatch_gradient(params, samples, coefs, par);
  std::size_t bad = 0;
  const double h = 1e-5;
  for (std::size_t k = 0; k < params.size(); ++k) {
    PolicyParams p = params;
    p.values()[k] += h;
    const double up = minibatch_loss(p, samples, coefs).total;
    p.values()[k] -= 2 * h;
    const double dn = minibatch_loss(p, samples, coefs).total;
    const double fd = (up - dn) / (2 * h);
    for (double g : {grad[k], par[k]}) {
      const double abs_err = std::abs(fd - g);
      if (!(abs_err / std::max(std::abs(fd), std::abs(g)) <= 1e-4 || abs_err <= 1e-7)) ++bad;
    }
  }
  return {bad == 0, fmt("%.0f params, %.0f mismatches", double(params.size()), double(bad))};
}

Outcome permutation_invariance() {
  Rng rng(9);
  const PolicyParams params = PolicyParams::initialize(64, 11);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    Observation o = random_obs(rng, 10);
    const auto a = policy_forward(params, o, {true, true, true});
    shuffle(std::span<IntruderObservation>(o.intruders), rng);
    const auto b = policy_forward(params, o, {true, true, true});
    for (std::size_t k = 0; k < 3; ++k) worst = std::max(worst, std::abs(a.logits[k] - b.logits[k]));
    worst = std::max(worst, std::abs(a.value - b.value));
  }
  return {worst <= 1e-6, fmt("max difference %.3g", worst)};
}

Outcome forced_optimum() {
  auto ctx = ScenarioContext::make(load_scenario(test::data_dir() / "toy_corridor.json"));
  const AltitudeLayerSet& layers = ctx->scenario.network.layers();
  const RewardConfig reward(1.0, layers);
  // The optimum is forced: the top layer is the unique maximizer of the reward.
  for (double z : layers.levels())
    if (z != layers.highest() && !(reward_noise(z, reward) < reward_noise(layers.highest(), reward)))
      return {false, "reward not uniquely maximal at the top layer"};

  TrainConfig cfg;
  cfg.iterations = 500;
  cfg.hidden = 16;
  cfg.learning_rate = 1e-3;
  cfg.seed = 1;
  const auto t0 = Clock::now();
  const TrainResult tr = train(ctx, cfg, {}, reward);
  const double train_s = seconds_since(t0);

  NetworkPolicy greedy(tr.params, true);
  std::vector<TraceRow> trace;
  run_episode(greedy, ctx, {}, reward, 1, &trace);
  // Post-climb: from the first decision tick at the top layer onward.
  std::size_t first = trace.size(), top = 0;
  for (std::size_t i = 0; i < trace.size(); ++i)
    if (trace[i].z_ft == layers.highest() && trace[i].z_target_ft == layers.highest()) {
      first = i;
      break;
    }
  for (std::size_t i = first; i < trace.size(); ++i) top += trace[i].z_ft == layers.highest() ? 1 : 0;
  const std::size_t post = trace.size() - first;
  const double occupancy = post ? static_cast<double>(top) / static_cast<double>(post) : 0.0;
  return {first < trace.size() && occupancy > 0.9 && train_s < 300,
          fmt("reached top at tick %.0f of %.0f, post-climb occupancy %.3f, train %.1f s", double(first),
              double(trace.size()), occupancy, train_s)};
}

Outcome trend_sweep() {
  auto ctx = ScenarioContext::make(load_scenario(test::data_dir() / kLineScenario));
  SweepOptions opt;
  opt.train.iterations = 2000;
  opt.train.hidden = kLineHidden;
  opt.train.seed = 0;
  opt.rhos = {0.0, 0.9};
  opt.seeds = {1, 2, 3, 4, 5};
  const auto t0 = Clock::now();
  const SweepResult r = sweep_rho(ctx, opt);
  const double s = seconds_since(t0);
  const SweepEntry& lo = r.entries[0];
  const SweepEntry& hi = r.entries[1];
  if (ctx->scenario.flights.size() != 12 || ctx->scenario.network.layers().levels().size() != 5)
    return {false, "scenario is not 12 aircraft on 5 layers"};
  if (!lo.median_noise_increase_db || !hi.median_noise_increase_db) return {false, "missing noise metric"};
  const bool a = hi.top_layer_fraction - lo.top_layer_fraction >= 0.2;
  const bool b = *hi.median_noise_increase_db < *lo.median_noise_increase_db;
  const bool c = hi.mean_los >= lo.mean_los;
  const bool d = lo.histogram_entropy > hi.histogram_entropy;
  std::string detail = std::string("a=") + (a ? "ok" : "no") + " b=" + (b ? "ok" : "no") + " c=" + (c ? "ok" : "no") +
                       " d=" + (d ? "ok" : "no");
  detail += fmt(" | top %.3f vs %.3f", lo.top_layer_fraction, hi.top_layer_fraction);
  detail += fmt(", noise %.3f vs %.3f dB", *lo.median_noise_increase_db, *hi.median_noise_increase_db);
  detail += fmt(", LOS %.1f vs %.1f", lo.mean_los, hi.mean_los);
  detail += fmt(", entropy %.3f vs %.3f", lo.histogram_entropy, hi.histogram_entropy);
  return {a && b && c && d && s < 1800, detail};
}

Outcome determinism() {
  const auto dir = test::temp_dir("acceptance_determinism");
  const std::string scenario = (test::data_dir() / kLineScenario).string();
  for (int run = 0; run < 2; ++run) {
    const std::string tag = std::to_string(run);
    const std::string ckpt = (dir / ("policy" + tag + ".json")).string();
    if (cli({"train", "--scenario", scenario, "--rho", "0.5", "--iterations", "20", "--seed", "11", "--hidden", "16",
             "--out", ckpt, "--metrics", (dir / ("train" + tag + ".csv")).string()}) != 0)
      return {false, "train failed"};
    if (cli({"simulate", "--scenario", scenario, "--policy", (dir / "policy0.json").string(), "--seed", "4",
             "--stochastic", "--out", (dir / ("sim" + tag + ".csv")).string(), "--trace",
             (dir / ("trace" + tag + ".csv")).string()}) != 0)
      return {false, "simulate failed"};
  }
  const bool same_train = slurp(dir / "train0.csv") == slurp(dir / "train1.csv");
  const bool same_ckpt = slurp(dir / "policy0.json") == slurp(dir / "policy1.json");
  const bool same_sim = slurp(dir / "sim0.csv") == slurp(dir / "sim1.csv");
  const bool same_trace = slurp(dir / "trace0.csv") == slurp(dir / "trace1.csv");
  const bool nonempty = !slurp(dir / "train0.csv").empty() && !slurp(dir / "sim0.csv").empty();
  return {same_train && same_ckpt && same_sim && same_trace && nonempty,
          std::string("train log ") + (same_train ? "same" : "differs") + ", checkpoint " +
              (same_ckpt ? "same" : "differs") + ", simulate metrics " + (same_sim ? "same" : "differs") +
              ", trace " + (same_trace ? "same" : "differs")};
}

}  // namespace

int main() {
  report(1, "NPD golden levels", golden_levels);
  report(2, "NPD fit recovery", fit_recovery);
  report(3, "cumulative noise laws", cumulative_laws);
  report(4, "LOS oracle", los_oracle);
  report(5, "reward contracts", reward_contracts);
  report(6, "gradient check", gradient_check);
  report(7, "permutation invariance", permutation_invariance);
  report(8, "forced optimum on toy corridor", forced_optimum);
  report(9, "rho trend on line network", trend_sweep);
  report(10, "determinism of train and simulate", determinism);
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
