#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uam/network.hpp"

namespace uam {

enum class FlightMode { LevelFlyover, Departure, Approach };
enum class MicPosition { Centerline, Side };

struct Condition {
  FlightMode mode = FlightMode::LevelFlyover;
  MicPosition position = MicPosition::Centerline;

  std::size_t index() const {
    return static_cast<std::size_t>(mode) * 2 + static_cast<std::size_t>(position);
  }
  static Condition from_index(std::size_t i);
  // "L-Centerline", "D-Side", ...
  std::string name() const;
  static Condition parse(const std::string& name);

  friend bool operator==(Condition, Condition) = default;
};

inline constexpr Condition kLevelCenterline{FlightMode::LevelFlyover, MicPosition::Centerline};

struct NpdCoefficients {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  // c0 + c1 log10(z) + c2 log10(z)^2, no clamping.
  double evaluate(double distance_ft) const;
  friend bool operator==(const NpdCoefficients&, const NpdCoefficients&) = default;
};

// Regression of A-weighted SEL against slant distance for each of the six
// operating conditions. Distances are clamped to [z_lo, z_hi] before use.
class NpdModel {
 public:
  // NASA RVLT quadrotor regression coefficients.
  static NpdModel rvlt_quadrotor();

  NpdModel(std::array<NpdCoefficients, 6> rows, double z_lo_ft, double z_hi_ft);

  const NpdCoefficients& coefficients(Condition c) const { return rows_[c.index()]; }
  void set_coefficients(Condition c, NpdCoefficients k) { rows_[c.index()] = k; }
  double z_lo() const { return z_lo_; }
  double z_hi() const { return z_hi_; }

  friend bool operator==(const NpdModel&, const NpdModel&) = default;

 private:
  std::array<NpdCoefficients, 6> rows_;
  double z_lo_;
  double z_hi_;
};

struct NoiseSample {
  double distance_ft = 0.0;
  double level_db = 0.0;
};

struct NoiseConstants {
  double cumulative_offset_db = 35.56;
};

// Throws std::domain_error for a nonpositive distance.
double single_event_level(const NpdModel& model, Condition condition, double slant_distance_ft);

struct NpdFit {
  NpdCoefficients coefficients;
  double rms_residual = 0.0;
};

// Least squares on {1, log10 z, (log10 z)^2}. Needs at least three distinct
// distances, otherwise FitError.
NpdFit fit_npd(std::span<const NoiseSample> samples);

// 10 log10(sum 10^(N/10)) with inputs accumulated in descending order, so
// the result does not depend on input order. Empty input gives nullopt.
std::optional<double> energy_sum_db(std::span<const double> levels_db);

// Cumulative increase over ambient; nullopt means no contribution.
std::optional<double> cumulative_increase(std::span<const double> levels_db, double ambient_db,
                                          const NoiseConstants& constants = {});

struct ZoneExposure {
  std::string zone_id;
  double slant_distance_ft = 0.0;
};

struct ZoneIncrease {
  std::string zone_id;
  std::optional<double> increase_db;
};

// One entry per zone, in zone order. Levels use the level-flyover
// centerline row. Unknown zone ids raise LookupError.
std::vector<ZoneIncrease> zone_noise_report(const std::vector<NoiseZone>& zones,
                                            std::span<const ZoneExposure> aircraft,
                                            const NpdModel& model,
                                            const NoiseConstants& constants = {});

// NPD model file (JSON): {"schema":1, "z_lo_ft", "z_hi_ft",
// "conditions":[{"condition":"L-Centerline","c0","c1","c2"}, ...]}.
NpdModel parse_npd_model(const std::string& text);
std::string npd_model_to_json(const NpdModel& model);
NpdModel load_npd_model(const std::filesystem::path& path);
void save_npd_model(const NpdModel& model, const std::filesystem::path& path);

std::vector<NoiseSample> read_noise_samples_csv(const std::filesystem::path& path);

}  // namespace uam
