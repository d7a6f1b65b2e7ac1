#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uam/mdp.hpp"
#include "uam/noise.hpp"
#include "uam/rollout.hpp"
#include "uam/sim.hpp"
#include "uam/trace.hpp"
#include "uam/train.hpp"

namespace uam {

struct ZoneNoiseSummary {
  std::string zone_id;
  std::optional<double> mean_increase_db;  // over ticks with a contribution
  std::optional<double> max_increase_db;
  friend bool operator==(const ZoneNoiseSummary&, const ZoneNoiseSummary&) = default;
};

// Zone increases per decision tick; nullopt where nothing flew over a zone.
struct NoiseSeries {
  std::vector<double> times;
  std::vector<std::string> zone_ids;
  std::vector<std::vector<std::optional<double>>> values;  // [tick][zone]
};

// Everything derivable from a trace alone.
struct TraceMetrics {
  std::vector<double> histogram;  // per layer, sums to 1 (all zero for an empty trace)
  NoiseSeries series;
  std::vector<ZoneNoiseSummary> zones;
  std::optional<double> median_noise_increase_db;  // median over zones of the time-mean
  std::optional<double> max_noise_increase_db;
};

struct EpisodeMetrics {
  std::optional<double> rho;
  std::uint64_t seed = 0;
  std::size_t los_count = 0;
  double mean_return = 0.0;
  std::vector<double> layers_ft;
  TraceMetrics trace;
  double wall_time_s = 0.0;  // informational, never exported

  double top_layer_fraction() const { return trace.histogram.empty() ? 0.0 : trace.histogram.back(); }
};

// Fraction of enroute (aircraft, decision tick) samples at each layer, with
// transitions counted at the departed layer. Throws ContractError when the
// trace is empty.
std::vector<double> altitude_histogram(const std::vector<TraceRow>& trace, const AltitudeLayerSet& layers);

// Shannon entropy in nats.
double histogram_entropy(const std::vector<double>& histogram);

TraceMetrics metrics_from_trace(const std::vector<TraceRow>& trace, const Network& network,
                                const NpdModel& model = NpdModel::rvlt_quadrotor(),
                                const NoiseConstants& constants = {});

// Runs one full episode; the rng (seeded from seed) drives any sampling the
// policy does.
EpisodeMetrics run_episode(Policy& policy, const std::shared_ptr<const ScenarioContext>& context,
                           const SimConfig& sim, const RewardConfig& reward, std::uint64_t seed,
                           std::vector<TraceRow>* trace_out = nullptr);

// Throws ValidationError when the checkpoint was trained on other layers.
void check_compatible(const Checkpoint& ckpt, const Scenario& scenario);

enum class ExportFormat { Csv, Json };

// CSV: stable columns, 6 significant digits, missing noise as an empty
// cell. JSON: an array of objects, missing noise as null.
std::string metrics_to_csv(const std::vector<EpisodeMetrics>& rows);
std::string metrics_to_json(const std::vector<EpisodeMetrics>& rows);
std::vector<EpisodeMetrics> metrics_from_json(const std::string& text);
void export_metrics(const std::vector<EpisodeMetrics>& rows, const std::filesystem::path& path, ExportFormat format);

// Per-tick zone increases as CSV: t,<zone>,<zone>,...
std::string noise_series_csv(const NoiseSeries& series);

// Writes through a temporary file and renames into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace uam
