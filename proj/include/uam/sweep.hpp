#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "uam/metrics.hpp"
#include "uam/sim.hpp"
#include "uam/train.hpp"

namespace uam {

struct SweepOptions {
  TrainConfig train;  // iterations and seed apply to every rho
  SimConfig sim;
  double lambda = 0.1;
  std::vector<double> rhos;
  std::vector<std::uint64_t> seeds;  // evaluation seeds
  bool greedy = true;
  // When set, checkpoints are written here and reused on later runs when
  // their configuration matches.
  std::filesystem::path out_dir;
};

struct SweepEntry {
  double rho = 0.0;
  std::vector<EpisodeMetrics> per_seed;
  std::optional<double> median_noise_increase_db;  // median over seeds
  double mean_los = 0.0;
  double top_layer_fraction = 0.0;    // mean over seeds
  std::vector<double> histogram;      // mean over seeds
  double histogram_entropy = 0.0;     // of the mean histogram
  bool loaded_checkpoint = false;
};

struct SweepResult {
  std::vector<SweepEntry> entries;  // one per requested rho, in order
};

std::string checkpoint_filename(double rho);

// Evaluates one policy over the seeds and fills the aggregates.
SweepEntry evaluate_policy(const PolicyParams& params, const std::shared_ptr<const ScenarioContext>& context,
                           const SimConfig& sim, const RewardConfig& reward,
                           const std::vector<std::uint64_t>& seeds, bool greedy);

SweepResult sweep_rho(const std::shared_ptr<const ScenarioContext>& context, const SweepOptions& options);

// Per-seed rows (|rhos| x |seeds|) and the per-rho tradeoff table.
std::string sweep_rows_csv(const SweepResult& result);
std::string sweep_summary_csv(const SweepResult& result);

}  // namespace uam
