#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uam/errors.hpp"
#include "uam/metrics.hpp"
#include "uam/network.hpp"
#include "uam/noise.hpp"
#include "uam/rollout.hpp"
#include "uam/sweep.hpp"
#include "uam/trace.hpp"
#include "uam/train.hpp"

namespace uam {

namespace {

namespace fs = std::filesystem;

constexpr int kValidation = 1;
constexpr int kRuntime = 2;

// Optional per-field overrides; flag name = field name.
struct Overrides {
  std::optional<double> gamma, gae_lambda, clip_eps, learning_rate, entropy_coef, value_coef, max_grad_norm;
  std::optional<std::size_t> epochs, minibatch_size, horizon, hidden, checkpoint_every;
  std::optional<double> dt, decision_interval, cruise_speed, climb_rate, d_comm, d_los, max_episode_time;
  std::optional<double> lambda;

  void add_train(CLI::App& app) {
    app.add_option("--gamma", gamma);
    app.add_option("--gae_lambda", gae_lambda);
    app.add_option("--clip_eps", clip_eps);
    app.add_option("--learning_rate", learning_rate);
    app.add_option("--epochs", epochs);
    app.add_option("--minibatch_size", minibatch_size);
    app.add_option("--horizon", horizon, "decision ticks per rollout, 0 = full episode");
    app.add_option("--entropy_coef", entropy_coef);
    app.add_option("--value_coef", value_coef);
    app.add_option("--max_grad_norm", max_grad_norm);
    app.add_option("--hidden", hidden);
    app.add_option("--checkpoint_every", checkpoint_every);
  }
  void add_sim(CLI::App& app) {
    app.add_option("--dt", dt);
    app.add_option("--decision_interval", decision_interval);
    app.add_option("--cruise_speed", cruise_speed, "m/s");
    app.add_option("--climb_rate", climb_rate, "ft/min");
    app.add_option("--d_comm", d_comm, "m");
    app.add_option("--d_los", d_los, "m");
    app.add_option("--max_episode_time", max_episode_time, "s");
  }
  void add_reward(CLI::App& app) { app.add_option("--lambda", lambda); }

  void apply(TrainConfig& t) const {
    if (gamma) t.gamma = *gamma;
    if (gae_lambda) t.gae_lambda = *gae_lambda;
    if (clip_eps) t.clip_eps = *clip_eps;
    if (learning_rate) t.learning_rate = *learning_rate;
    if (epochs) t.epochs = *epochs;
    if (minibatch_size) t.minibatch_size = *minibatch_size;
    if (horizon) t.horizon = *horizon;
    if (entropy_coef) t.entropy_coef = *entropy_coef;
    if (value_coef) t.value_coef = *value_coef;
    if (max_grad_norm) t.max_grad_norm = *max_grad_norm;
    if (hidden) t.hidden = *hidden;
    if (checkpoint_every) t.checkpoint_every = *checkpoint_every;
  }
  void apply(SimConfig& s) const {
    if (dt) s.dt = *dt;
    if (decision_interval) s.decision_interval = *decision_interval;
    if (cruise_speed) s.cruise_speed = *cruise_speed;
    if (climb_rate) s.climb_rate = *climb_rate;
    if (d_comm) s.d_comm = *d_comm;
    if (d_los) s.d_los = *d_los;
    if (max_episode_time) s.max_episode_time = *max_episode_time;
  }
};

ExportFormat format_for(const fs::path& path) {
  return path.extension() == ".json" ? ExportFormat::Json : ExportFormat::Csv;
}

std::shared_ptr<const ScenarioContext> load_context(const fs::path& path) {
  return ScenarioContext::make(load_scenario(path));
}

void print_summary(std::ostream& out, const EpisodeMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "seed %llu: los=%zu mean_return=%.6g top_layer=%.6g median_noise_db=%s\n",
                static_cast<unsigned long long>(m.seed), m.los_count, m.mean_return, m.top_layer_fraction(),
                m.trace.median_noise_increase_db
                    ? std::to_string(*m.trace.median_noise_increase_db).c_str()
                    : "none");
  out << buf;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  fs::path scenario, trace, out;
  std::string policy;
  std::uint64_t seed = 0;
  bool stochastic = false;
  std::optional<double> rho;
  Overrides ov;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  auto ctx = load_context(a.scenario);
  SimConfig sim;
  std::optional<Checkpoint> ckpt;
  double rho = 0.5;
  double lambda = 0.1;
  if (a.policy != "baseline:hold") {
    if (a.policy.starts_with("baseline:")) throw ValidationError("unknown baseline policy '" + a.policy + "'");
    ckpt = load_checkpoint(a.policy);
    check_compatible(*ckpt, ctx->scenario);
    sim = ckpt->sim;
    rho = ckpt->rho;
    lambda = ckpt->lambda;
  }
  a.ov.apply(sim);
  if (a.rho) rho = *a.rho;
  if (a.ov.lambda) lambda = *a.ov.lambda;
  sim.validate();
  const RewardConfig reward(rho, ctx->scenario.network.layers(), lambda, sim.d_los);

  HoldPolicy hold;
  std::optional<NetworkPolicy> net;
  Policy* policy = &hold;
  if (ckpt) policy = &net.emplace(ckpt->params, !a.stochastic);

  std::vector<TraceRow> trace;
  EpisodeMetrics m = run_episode(*policy, ctx, sim, reward, a.seed, &trace);
  if (!a.trace.empty()) write_trace_csv(a.trace, trace);
  if (!a.out.empty()) export_metrics({m}, a.out, format_for(a.out));
  print_summary(out, m);
  return 0;
}

struct TrainArgs {
  fs::path scenario, out, metrics;
  double rho = 0.5;
  std::uint64_t iterations = 0;
  std::uint64_t seed = 0;
  Overrides ov;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  auto ctx = load_context(a.scenario);
  TrainConfig cfg;
  cfg.iterations = a.iterations;
  cfg.seed = a.seed;
  a.ov.apply(cfg);
  SimConfig sim;
  a.ov.apply(sim);
  cfg.validate();
  sim.validate();
  const double lambda = a.ov.lambda.value_or(0.1);
  const auto& layers = ctx->scenario.network.layers();
  const RewardConfig reward(a.rho, layers, lambda, sim.d_los);

  auto make_ckpt = [&](const PolicyParams& p, std::size_t done) {
    return Checkpoint{p, cfg, sim, a.rho, lambda, layers, done};
  };
  auto on_ckpt = [&](std::size_t it, const PolicyParams& p) {
    fs::path path = a.out;
    path.replace_extension(".iter" + std::to_string(it) + a.out.extension().string());
    save_checkpoint(make_ckpt(p, it), path);
  };
  TrainResult result = train(ctx, cfg, sim, reward, on_ckpt);
  save_checkpoint(make_ckpt(result.params, cfg.iterations), a.out);
  const fs::path metrics = a.metrics.empty() ? fs::path(a.out.string() + ".metrics.csv") : a.metrics;
  write_file_atomic(metrics, metrics_log_csv(result.log));
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    char buf[160];
    std::snprintf(buf, sizeof buf, "trained %zu iterations: mean_return=%.6g top_layer=%.6g\n", last.iteration,
                  last.mean_return, last.top_layer_fraction);
    out << buf;
  }
  return 0;
}

struct EvalArgs {
  fs::path scenario, checkpoint, out;
  std::vector<std::uint64_t> seeds;
  bool stochastic = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  auto ctx = load_context(a.scenario);
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  check_compatible(ckpt, ctx->scenario);
  const SweepEntry e = evaluate_policy(ckpt.params, ctx, ckpt.sim, ckpt.reward_config(), a.seeds, !a.stochastic);
  export_metrics(e.per_seed, a.out, format_for(a.out));
  for (const auto& m : e.per_seed) print_summary(out, m);
  return 0;
}

struct SweepArgs {
  fs::path scenario, out_dir;
  std::vector<double> rhos;
  std::vector<std::uint64_t> seeds;
  std::uint64_t iterations = 0;
  std::uint64_t train_seed = 0;
  bool stochastic = false;
  Overrides ov;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  auto ctx = load_context(a.scenario);
  SweepOptions opt;
  opt.train.iterations = a.iterations;
  opt.train.seed = a.train_seed;
  a.ov.apply(opt.train);
  a.ov.apply(opt.sim);
  opt.lambda = a.ov.lambda.value_or(0.1);
  opt.rhos = a.rhos;
  opt.seeds = a.seeds;
  opt.greedy = !a.stochastic;
  opt.out_dir = a.out_dir;
  fs::create_directories(a.out_dir);
  const SweepResult r = sweep_rho(ctx, opt);
  write_file_atomic(a.out_dir / "sweep.csv", sweep_rows_csv(r));
  const std::string summary = sweep_summary_csv(r);
  write_file_atomic(a.out_dir / "summary.csv", summary);
  out << summary;
  return 0;
}

struct FitArgs {
  fs::path samples, out, base;
  std::string condition = "L-Centerline";
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const auto samples = read_noise_samples_csv(a.samples);
  const NpdFit fit = fit_npd(samples);
  NpdModel model = a.base.empty() ? NpdModel::rvlt_quadrotor() : load_npd_model(a.base);
  model.set_coefficients(Condition::parse(a.condition), fit.coefficients);
  save_npd_model(model, a.out);
  char buf[200];
  std::snprintf(buf, sizeof buf, "%s: c0=%.10g c1=%.10g c2=%.10g rms=%.3g\n", a.condition.c_str(),
                fit.coefficients.c0, fit.coefficients.c1, fit.coefficients.c2, fit.rms_residual);
  out << buf;
  return 0;
}

struct NoiseReportArgs {
  fs::path trace, scenario, out, model;
};

int cmd_noise_report(const NoiseReportArgs& a, std::ostream& out) {
  const Scenario scenario = load_scenario(a.scenario);
  const auto trace = read_trace_csv(a.trace);
  const NpdModel model = a.model.empty() ? NpdModel::rvlt_quadrotor() : load_npd_model(a.model);
  const TraceMetrics m = metrics_from_trace(trace, scenario.network, model);
  write_file_atomic(a.out, noise_series_csv(m.series));
  for (const auto& z : m.zones) {
    char buf[200];
    if (z.mean_increase_db) {
      std::snprintf(buf, sizeof buf, "%s: mean=%.6g max=%.6g\n", z.zone_id.c_str(), *z.mean_increase_db,
                    *z.max_increase_db);
    } else {
      std::snprintf(buf, sizeof buf, "%s: no overflights\n", z.zone_id.c_str());
    }
    out << buf;
  }
  return 0;
}

struct GenerateArgs {
  fs::path network, out;
  std::size_t aircraft = 0;
  std::vector<std::string> od;
  double spacing = 60.0;
  std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const Network net = load_network(a.network);
  std::vector<OdPair> pairs;
  for (const auto& s : a.od) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ValidationError("O-D pair '" + s + "' must be ORIGIN:DEST");
    pairs.emplace_back(s.substr(0, colon), s.substr(colon + 1));
  }
  const Scenario sc = generate_scenario(net, a.aircraft, pairs, a.spacing, a.seed);
  save_scenario(sc, a.out);
  out << "wrote " << sc.flights.size() << " flights over " << sc.routes.size() << " routes\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Altitude-layer deconfliction with noise-aware multi-agent RL"};
  app.require_subcommand(1);

  SimulateArgs sim_a;
  auto* sim = app.add_subcommand("simulate", "Run one episode and report metrics");
  sim->add_option("--scenario", sim_a.scenario)->required()->check(CLI::ExistingFile);
  sim->add_option("--policy", sim_a.policy, "checkpoint path or baseline:hold")->required();
  sim->add_option("--seed", sim_a.seed)->required();
  sim->add_option("--trace", sim_a.trace);
  sim->add_option("--out", sim_a.out, "metrics file, .csv or .json");
  sim->add_flag("--stochastic", sim_a.stochastic, "sample actions instead of argmax");
  sim->add_option("--rho", sim_a.rho);
  sim_a.ov.add_sim(*sim);
  sim_a.ov.add_reward(*sim);

  TrainArgs tr_a;
  auto* tr = app.add_subcommand("train", "Train a shared policy with PPO");
  tr->add_option("--scenario", tr_a.scenario)->required()->check(CLI::ExistingFile);
  tr->add_option("--rho", tr_a.rho)->required()->check(CLI::Range(0.0, 1.0));
  tr->add_option("--iterations", tr_a.iterations)->required();
  tr->add_option("--seed", tr_a.seed)->required();
  tr->add_option("--out", tr_a.out, "checkpoint path")->required();
  tr->add_option("--metrics", tr_a.metrics, "metrics log, default <out>.metrics.csv");
  tr_a.ov.add_train(*tr);
  tr_a.ov.add_sim(*tr);
  tr_a.ov.add_reward(*tr);

  EvalArgs ev_a;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint over seeds");
  ev->add_option("--scenario", ev_a.scenario)->required()->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", ev_a.checkpoint)->required()->check(CLI::ExistingFile);
  ev->add_option("--seeds", ev_a.seeds)->required()->delimiter(',');
  ev->add_option("--out", ev_a.out)->required();
  ev->add_flag("--stochastic", ev_a.stochastic, "sample actions instead of argmax");

  SweepArgs sw_a;
  auto* sw = app.add_subcommand("sweep", "Train and evaluate one policy per rho");
  sw->add_option("--scenario", sw_a.scenario)->required()->check(CLI::ExistingFile);
  sw->add_option("--rhos", sw_a.rhos)->required()->delimiter(',');
  sw->add_option("--iterations", sw_a.iterations)->required();
  sw->add_option("--seeds", sw_a.seeds)->required()->delimiter(',');
  sw->add_option("--out-dir", sw_a.out_dir)->required();
  sw->add_option("--train-seed", sw_a.train_seed);
  sw->add_flag("--stochastic", sw_a.stochastic, "sample actions during evaluation");
  sw_a.ov.add_train(*sw);
  sw_a.ov.add_sim(*sw);
  sw_a.ov.add_reward(*sw);

  FitArgs fit_a;
  auto* fit = app.add_subcommand("fit-npd", "Fit NPD coefficients to level samples");
  fit->add_option("--samples", fit_a.samples, "CSV distance_ft,level_db")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", fit_a.out)->required();
  fit->add_option("--condition", fit_a.condition);
  fit->add_option("--base", fit_a.base, "model supplying the other conditions")->check(CLI::ExistingFile);

  NoiseReportArgs nr_a;
  auto* nr = app.add_subcommand("noise-report", "Per-zone noise increase over a saved trace");
  nr->add_option("--trace", nr_a.trace)->required()->check(CLI::ExistingFile);
  nr->add_option("--scenario", nr_a.scenario)->required()->check(CLI::ExistingFile);
  nr->add_option("--out", nr_a.out)->required();
  nr->add_option("--model", nr_a.model)->check(CLI::ExistingFile);

  GenerateArgs gen_a;
  auto* gen = app.add_subcommand("generate", "Generate a scenario from a network file");
  gen->add_option("--network", gen_a.network)->required()->check(CLI::ExistingFile);
  gen->add_option("--aircraft", gen_a.aircraft)->required();
  gen->add_option("--od", gen_a.od, "ORIGIN:DEST list")->required()->delimiter(',');
  gen->add_option("--spacing", gen_a.spacing, "departure spacing per origin, s");
  gen->add_option("--seed", gen_a.seed);
  gen->add_option("--out", gen_a.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }

  try {
    if (*sim) return cmd_simulate(sim_a, out);
    if (*tr) return cmd_train(tr_a, out);
    if (*ev) return cmd_eval(ev_a, out);
    if (*sw) return cmd_sweep(sw_a, out);
    if (*fit) return cmd_fit(fit_a, out);
    if (*nr) return cmd_noise_report(nr_a, out);
    if (*gen) return cmd_generate(gen_a, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const FitError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}

}  // namespace uam
