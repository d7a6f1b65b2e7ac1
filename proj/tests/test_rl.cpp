#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "uam/errors.hpp"
#include "uam/policy.hpp"
#include "uam/ppo.hpp"
#include "uam/random.hpp"
#include "uam/rollout.hpp"
#include "uam/train.hpp"

using namespace uam;
using uam::test::Doc;

namespace {

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

ActionMask random_mask(Rng& rng) {
  ActionMask m{true, uniform01(rng) < 0.7, uniform01(rng) < 0.7};
  return m;
}

struct Batch {
  std::vector<Observation> obs;
  std::vector<TrainingSample> samples;
};

// Samples whose old log-probs sit within the clip range of the current
// policy, so the loss is smooth around params.
Batch random_batch(const PolicyParams& params, Rng& rng, std::size_t n) {
  Batch b;
  b.obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) b.obs.push_back(random_obs(rng, 4));
  for (std::size_t i = 0; i < n; ++i) {
    const ActionMask mask = random_mask(rng);
    const auto out = policy_forward(params, b.obs[i], mask);
    Action a;
    do a = kAllActions[uniform_index(rng, 3)];
    while (!mask[action_code(a)]);
    const double old = out.log_probs[action_code(a)] + 0.1 * (uniform01(rng) - 0.5);
    b.samples.push_back({&b.obs[i], mask, a, old, 2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1});
  }
  return b;
}

Doc toy() {
  Doc d;
  d.vertiport("A", 0, 0).vertiport("B", 3000, 0).link("A", "B").flight("f", "A", "B", 0).single_zone();
  return d;
}

}  // namespace

TEST_CASE("parameter layout") {
  CHECK(PolicyParams(4).size() <= 200);
  const PolicyLayout l(4);
  CHECK(l.total == PolicyParams(4).size());
  CHECK(PolicyParams::initialize(8, 1) == PolicyParams::initialize(8, 1));
  CHECK_FALSE(PolicyParams::initialize(8, 1) == PolicyParams::initialize(8, 2));
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(123);
  PolicyParams params = PolicyParams::initialize(4, 7);
  // Larger weights than the init so every path carries signal.
  for (double& w : params.values()) w += 0.3 * (uniform01(rng) - 0.5);
  const Batch b = random_batch(params, rng, 20);
  const LossCoefficients coefs{0.2, 0.5, 0.01};

  std::vector<double> grad(params.size());
  minibatch_gradient_serial(params, b.samples, coefs, grad);

  const double h = 1e-5;
  std::size_t bad = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    PolicyParams p = params;
    p.values()[k] += h;
    const double up = minibatch_loss(p, b.samples, coefs).total;
    p.values()[k] -= 2 * h;
    const double dn = minibatch_loss(p, b.samples, coefs).total;
    const double fd = (up - dn) / (2 * h);
    const double abs_err = std::abs(fd - grad[k]);
    const double rel_err = abs_err / std::max(std::abs(fd), std::abs(grad[k]));
    if (!(rel_err <= 1e-4 || abs_err <= 1e-7)) {
      ++bad;
      MESSAGE("param " << k << ": analytic " << grad[k] << " fd " << fd);
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("parallel gradient equals serial gradient") {
  Rng rng(5);
  const PolicyParams params = PolicyParams::initialize(16, 3);
  const Batch b = random_batch(params, rng, 100);
  const LossCoefficients coefs;
  std::vector<double> gs(params.size()), gp(params.size());
  const auto ls = minibatch_gradient_serial(params, b.samples, coefs, gs);
  const auto lp = minibatch_gradient(params, b.samples, coefs, gp);
  CHECK(ls.total == doctest::Approx(lp.total).epsilon(1e-12));
  for (std::size_t k = 0; k < gs.size(); ++k) CHECK(gs[k] == doctest::Approx(gp[k]).epsilon(1e-9).scale(1e-12));
  // Chunked reduction is independent of thread scheduling.
  std::vector<double> again(params.size());
  minibatch_gradient(params, b.samples, coefs, again);
  CHECK(again == gp);
}

TEST_CASE("policy is invariant to intruder order") {
  Rng rng(9);
  const PolicyParams params = PolicyParams::initialize(16, 11);
  for (int t = 0; t < 100; ++t) {
    Observation o = random_obs(rng, 10);
    const ActionMask mask{true, true, true};
    const auto a = policy_forward(params, o, mask);
    shuffle(std::span<IntruderObservation>(o.intruders), rng);
    const auto b = policy_forward(params, o, mask);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(a.logits[k] - b.logits[k]) <= 1e-6);
    CHECK(std::abs(a.value - b.value) <= 1e-6);
  }
}

TEST_CASE("empty intruder set and masking") {
  const PolicyParams params = PolicyParams::initialize(8, 1);
  Observation o;
  o.own.z_norm = 0.5;
  const auto a = policy_forward(params, o, {true, true, true});
  double s = 0;
  for (double p : a.probs) s += p;
  CHECK(s == doctest::Approx(1.0));

  const auto locked = policy_forward(params, o, {true, false, false});
  CHECK(locked.probs[0] == 1.0);
  CHECK(locked.probs[1] == 0.0);
  CHECK(locked.probs[2] == 0.0);
  CHECK(std::isinf(locked.logits[1]));
  CHECK(locked.log_probs[0] == 0.0);

  CHECK_THROWS_AS(policy_forward(params, o, {false, false, false}), ContractError);
}

TEST_CASE("sample and greedy actions") {
  PolicyOutput d;
  d.probs = {1, 0, 0};
  d.log_probs = {0, -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  Rng rng(1);
  const auto s = sample_action(d, rng);
  CHECK(s.action == Action::Hold);
  CHECK(s.log_prob == 0.0);

  PolicyOutput tie;
  tie.probs = {0.4, 0.4, 0.2};
  tie.log_probs = {std::log(0.4), std::log(0.4), std::log(0.2)};
  CHECK(greedy_action(tie).action == Action::Hold);

  Rng r1(42), r2(42);
  int counts[3] = {};
  for (int i = 0; i < 3000; ++i) {
    const auto x = sample_action(tie, r1);
    CHECK(x.action == sample_action(tie, r2).action);
    ++counts[action_code(x.action)];
  }
  CHECK(counts[0] > 1000);
  CHECK(counts[2] > 450);
  CHECK(counts[2] < 750);
}

TEST_CASE("compute_advantages") {
  SUBCASE("one step, done") {
    TrajectoryBatch b(1);
    Transition t;
    t.reward = 0.7;
    t.value = 0.2;
    t.done = true;
    b[0].push_back(t);
    compute_advantages(b, 0.99, 0.95);
    CHECK(b[0][0].advantage == doctest::Approx(0.5));
    CHECK(b[0][0].ret == doctest::Approx(0.7));
  }
  SUBCASE("zeros") {
    TrajectoryBatch b(2, std::vector<Transition>(4));
    compute_advantages(b, 0.99, 0.95);
    for (const auto& tr : b)
      for (const auto& t : tr) CHECK(t.advantage == 0.0);
  }
  SUBCASE("telescoping with gamma = lambda = 1") {
    TrajectoryBatch b(1);
    const double r[3] = {1.0, -2.0, 0.5}, v[3] = {0.3, -0.1, 0.8};
    for (int i = 0; i < 3; ++i) {
      Transition t;
      t.reward = r[i];
      t.value = v[i];
      b[0].push_back(t);
    }
    b[0].back().done = true;
    compute_advantages(b, 1.0, 1.0);
    CHECK(b[0][0].advantage == doctest::Approx(r[0] + r[1] + r[2] - v[0]));
    CHECK(b[0][1].advantage == doctest::Approx(r[1] + r[2] - v[1]));
    CHECK(b[0][2].advantage == doctest::Approx(r[2] - v[2]));
  }
  SUBCASE("truncated trajectory bootstraps") {
    TrajectoryBatch b(1);
    Transition t;
    t.reward = 1.0;
    t.bootstrap_value = 2.0;
    b[0].push_back(t);
    compute_advantages(b, 0.5, 0.95);
    CHECK(b[0][0].advantage == doctest::Approx(2.0));
  }
}

TEST_CASE("normalize_advantages") {
  std::vector<double> a{1, 2, 3, 4};
  normalize_advantages(a);
  double m = 0, v = 0;
  for (double x : a) m += x;
  for (double x : a) v += x * x;
  CHECK(m == doctest::Approx(0.0));
  CHECK(v / 4 == doctest::Approx(1.0));
  std::vector<double> c{3, 3, 3};
  normalize_advantages(c);
  CHECK(c == std::vector<double>{0, 0, 0});
}

TEST_CASE("zero advantages leave only value and entropy gradients") {
  Rng rng(3);
  const PolicyParams params = PolicyParams::initialize(8, 2);
  Batch b = random_batch(params, rng, 30);
  for (auto& s : b.samples) s.advantage = 0.0;
  const LossCoefficients only_policy{0.2, 0.0, 0.0};
  std::vector<double> g(params.size());
  const auto st = minibatch_gradient_serial(params, b.samples, only_policy, g);
  CHECK(st.policy == 0.0);
  for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("at ratio 1 the surrogate is the advantage-weighted objective") {
  Rng rng(4);
  const PolicyParams params = PolicyParams::initialize(8, 2);
  Batch b = random_batch(params, rng, 30);
  double want = 0;
  for (auto& s : b.samples) {
    s.old_log_prob = policy_forward(params, *s.obs, s.mask).log_probs[action_code(s.action)];
    want -= s.advantage;
  }
  const auto st = minibatch_loss(params, b.samples, {0.2, 0.0, 0.0});
  CHECK(st.policy == doctest::Approx(want / 30));
  CHECK(st.clip_fraction == 0.0);
}

TEST_CASE("non-finite loss aborts the update and restores params") {
  const auto ctx = ScenarioContext::make(toy().scenario());
  PolicyParams params = PolicyParams::initialize(4, 1);
  Rng rng(1);
  EpisodeRecord rec = collect_rollout(ctx, params, {}, RewardConfig(1.0, AltitudeLayerSet{}), 5, rng);
  compute_advantages(rec.trajectories, 0.99, 0.95);
  rec.trajectories[0][0].ret = std::numeric_limits<double>::quiet_NaN();
  AdamOptimizer adam(params.size(), 1e-3);
  const PolicyParams before = params;
  CHECK_THROWS_AS(ppo_update(params, adam, rec.trajectories, {}, rng), TrainingError);
  CHECK(params == before);
  CHECK(adam.steps() == 0);
}

TEST_CASE("collect_rollout") {
  const auto ctx = ScenarioContext::make(toy().scenario());
  const PolicyParams params = PolicyParams::initialize(8, 1);
  const RewardConfig reward(0.5, AltitudeLayerSet{});
  Rng rng(7);
  const EpisodeRecord rec = collect_rollout(ctx, params, {}, reward, 3, rng);
  REQUIRE(rec.trajectories.size() == 1);
  CHECK(rec.trajectories[0].size() <= 3);
  CHECK_FALSE(rec.trajectories[0].back().done);

  // Full episode: the final transition is terminal with no bootstrap.
  Rng r1(7), r2(7);
  const EpisodeRecord a = collect_rollout(ctx, params, {}, reward, 0, r1);
  const EpisodeRecord b = collect_rollout(ctx, params, {}, reward, 0, r2);
  CHECK(a.trajectories[0].back().done);
  REQUIRE(a.trajectories[0].size() == b.trajectories[0].size());
  for (std::size_t i = 0; i < a.trajectories[0].size(); ++i) {
    CHECK(a.trajectories[0][i].action == b.trajectories[0][i].action);
    CHECK(a.trajectories[0][i].reward == b.trajectories[0][i].reward);
    CHECK(a.trajectories[0][i].log_prob == b.trajectories[0][i].log_prob);
  }
  for (const auto& t : a.trajectories[0]) {
    const auto out = policy_forward(params, t.obs, t.mask);
    CHECK(t.log_prob == out.log_probs[action_code(t.action)]);
    CHECK(t.mask[action_code(t.action)]);
  }
}

TEST_CASE("non-interacting aircraft see no intruders") {
  Doc d;
  d.vertiport("A", 0, 0).vertiport("B", 3000, 0).vertiport("C", 0, 5000).vertiport("D", 3000, 5000);
  d.link("A", "B").link("C", "D").flight("f", "A", "B", 0).flight("g", "C", "D", 0).single_zone();
  const auto ctx = ScenarioContext::make(d.scenario());
  Rng rng(1);
  const auto rec = collect_rollout(ctx, PolicyParams::initialize(4, 1), {}, RewardConfig(0.5, AltitudeLayerSet{}), 0, rng);
  for (const auto& traj : rec.trajectories) {
    CHECK_FALSE(traj.empty());
    for (const auto& t : traj) CHECK(t.obs.intruders.empty());
  }
}

TEST_CASE("masked actions are never executed during training rollouts") {
  const auto ctx = ScenarioContext::make(load_scenario(test::data_dir() / "line3.json"));
  const auto& layers = ctx->scenario.network.layers();
  PolicyParams params = PolicyParams::initialize(8, 3);
  // Bias the policy hard towards climbing and descending.
  const PolicyLayout l(8);
  params.values()[l.pi_b + 1] = 3.0;
  params.values()[l.pi_b + 2] = 3.0;
  NetworkPolicy policy(params, false);
  Rng rng(2);
  EpisodeOptions opts;
  opts.record_trace = true;
  opts.record_transitions = true;
  const auto rec = run_policy_episode(ctx, {}, RewardConfig(0.5, layers), policy, rng, opts);
  std::size_t moves = 0;
  for (const auto& row : rec.trace) {
    if (row.action != Action::Hold) ++moves;
    if (row.action == Action::Climb) CHECK(row.z_ft < layers.highest());
    if (row.action == Action::Descend) CHECK(row.z_ft > layers.lowest());
  }
  CHECK(moves > 0);
  for (const auto& traj : rec.trajectories)
    for (const auto& t : traj) {
      CHECK(t.mask[action_code(t.action)]);
      if (t.obs.own.changing) CHECK(t.action == Action::Hold);
    }
}

TEST_CASE("train: zero iterations and determinism") {
  const auto ctx = ScenarioContext::make(toy().scenario());
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.seed = 5;
  const RewardConfig reward(1.0, AltitudeLayerSet{});
  const auto none = train(ctx, cfg, {}, reward);
  Rng seeder(5);
  CHECK(none.params == PolicyParams::initialize(8, seeder()));
  CHECK(none.log.empty());

  cfg.iterations = 5;
  std::size_t callbacks = 0;
  cfg.checkpoint_every = 2;
  const auto a = train(ctx, cfg, {}, reward, [&](std::size_t, const PolicyParams&) { ++callbacks; });
  const auto b = train(ctx, cfg, {}, reward);
  CHECK(callbacks == 2);
  CHECK(a.params == b.params);
  CHECK(metrics_log_csv(a.log) == metrics_log_csv(b.log));
  CHECK(a.log.size() == 5);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Checkpoint c;
  c.params = PolicyParams::initialize(8, 9);
  c.params.values()[0] = 1.0 / 3.0;
  c.params.values()[1] = -1e-300;
  c.rho = 0.9;
  c.train.hidden = 8;
  c.train.learning_rate = 1e-4;
  const std::string text = checkpoint_to_json(c);
  const Checkpoint back = parse_checkpoint(text);
  CHECK(back.params == c.params);
  CHECK(back.rho == 0.9);
  CHECK(back.train.learning_rate == 1e-4);
  CHECK(checkpoint_to_json(back) == text);

  Rng rng(1);
  const Observation o = random_obs(rng, 5);
  const auto x = policy_forward(c.params, o, {true, true, true});
  const auto y = policy_forward(back.params, o, {true, true, true});
  CHECK(x.logits == y.logits);
  CHECK(x.value == y.value);

  CHECK_THROWS_AS(parse_checkpoint("{}"), ValidationError);
  CHECK_THROWS_AS(parse_checkpoint("garbage"), ValidationError);
}
