#include "uam/sweep.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <sstream>

#include "uam/errors.hpp"

namespace uam {

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

bool same_training(const Checkpoint& c, const TrainConfig& t, const SimConfig& s, double rho, double lambda,
                   const AltitudeLayerSet& layers) {
  return c.rho == rho && c.lambda == lambda && c.layers == layers && c.iterations_done == t.iterations &&
         checkpoint_to_json({c.params, t, s, rho, lambda, layers, t.iterations}) ==
             checkpoint_to_json({c.params, c.train, c.sim, c.rho, c.lambda, c.layers, c.iterations_done});
}

}  // namespace

std::string checkpoint_filename(double rho) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "policy_rho_%.4f.json", rho);
  return buf;
}

SweepEntry evaluate_policy(const PolicyParams& params, const std::shared_ptr<const ScenarioContext>& context,
                           const SimConfig& sim, const RewardConfig& reward,
                           const std::vector<std::uint64_t>& seeds, bool greedy) {
  SweepEntry e;
  e.rho = reward.rho();
  const std::size_t n_layers = context->scenario.network.layers().size();
  e.histogram.assign(n_layers, 0.0);
  std::vector<double> medians;
  for (std::uint64_t seed : seeds) {
    NetworkPolicy policy(params, greedy);
    EpisodeMetrics m = run_episode(policy, context, sim, reward, seed);
    e.mean_los += static_cast<double>(m.los_count);
    e.top_layer_fraction += m.top_layer_fraction();
    for (std::size_t l = 0; l < n_layers; ++l) e.histogram[l] += m.trace.histogram[l];
    if (m.trace.median_noise_increase_db) medians.push_back(*m.trace.median_noise_increase_db);
    e.per_seed.push_back(std::move(m));
  }
  if (!seeds.empty()) {
    const double n = static_cast<double>(seeds.size());
    e.mean_los /= n;
    e.top_layer_fraction /= n;
    for (double& h : e.histogram) h /= n;
  }
  e.histogram_entropy = histogram_entropy(e.histogram);
  if (!medians.empty()) {
    std::sort(medians.begin(), medians.end());
    const std::size_t k = medians.size();
    e.median_noise_increase_db = k % 2 == 1 ? medians[k / 2] : 0.5 * (medians[k / 2 - 1] + medians[k / 2]);
  }
  return e;
}

SweepResult sweep_rho(const std::shared_ptr<const ScenarioContext>& context, const SweepOptions& options) {
  for (double rho : options.rhos) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("sweep: rho " + fmt6(rho) + " is outside [0, 1]");
  }
  if (options.rhos.empty()) throw ValidationError("sweep: no rho values given");
  if (options.seeds.empty()) throw ValidationError("sweep: no evaluation seeds given");
  options.train.validate();
  options.sim.validate();
  const auto& layers = context->scenario.network.layers();

  SweepResult result;
  result.entries.resize(options.rhos.size());
  std::vector<std::exception_ptr> errors(options.rhos.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t k = 0; k < options.rhos.size(); ++k) {
    try {
      const double rho = options.rhos[k];
      const RewardConfig reward(rho, layers, options.lambda, options.sim.d_los);
      std::filesystem::path ckpt_path;
      std::optional<Checkpoint> ckpt;
      if (!options.out_dir.empty()) {
        ckpt_path = options.out_dir / checkpoint_filename(rho);
        if (std::filesystem::exists(ckpt_path)) {
          Checkpoint c = load_checkpoint(ckpt_path);
          if (same_training(c, options.train, options.sim, rho, options.lambda, layers)) ckpt = std::move(c);
        }
      }
      bool loaded = ckpt.has_value();
      if (!ckpt) {
        TrainResult tr = train(context, options.train, options.sim, reward);
        ckpt = Checkpoint{std::move(tr.params), options.train, options.sim, rho, options.lambda, layers,
                          options.train.iterations};
        if (!ckpt_path.empty()) save_checkpoint(*ckpt, ckpt_path);
      }
      SweepEntry e = evaluate_policy(ckpt->params, context, options.sim, reward, options.seeds, options.greedy);
      e.loaded_checkpoint = loaded;
      result.entries[k] = std::move(e);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return result;
}

std::string sweep_rows_csv(const SweepResult& result) {
  std::vector<EpisodeMetrics> rows;
  for (const auto& e : result.entries) rows.insert(rows.end(), e.per_seed.begin(), e.per_seed.end());
  return metrics_to_csv(rows);
}

std::string sweep_summary_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "rho,median_noise_increase_db,mean_los,top_layer_fraction,histogram_entropy";
  if (!result.entries.empty() && !result.entries.front().per_seed.empty()) {
    for (double l : result.entries.front().per_seed.front().layers_ft) {
      char buf[64];
      std::snprintf(buf, sizeof buf, ",layer_%g", l);
      out << buf;
    }
  }
  out << '\n';
  for (const auto& e : result.entries) {
    out << fmt6(e.rho) << ',' << (e.median_noise_increase_db ? fmt6(*e.median_noise_increase_db) : "") << ','
        << fmt6(e.mean_los) << ',' << fmt6(e.top_layer_fraction) << ',' << fmt6(e.histogram_entropy);
    for (double h : e.histogram) out << ',' << fmt6(h);
    out << '\n';
  }
  return out.str();
}

}  // namespace uam
