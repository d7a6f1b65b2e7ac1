#include "uam/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "uam/errors.hpp"

namespace uam {

using nlohmann::json;

Condition Condition::from_index(std::size_t i) {
  if (i >= 6) throw std::out_of_range("condition index");
  return {static_cast<FlightMode>(i / 2), static_cast<MicPosition>(i % 2)};
}

std::string Condition::name() const {
  static constexpr const char* modes[] = {"L", "D", "A"};
  return std::string(modes[static_cast<int>(mode)]) +
         (position == MicPosition::Centerline ? "-Centerline" : "-Side");
}

Condition Condition::parse(const std::string& name) {
  for (std::size_t i = 0; i < 6; ++i) {
    if (from_index(i).name() == name) return from_index(i);
  }
  throw ValidationError("unknown NPD condition '" + name + "'");
}

double NpdCoefficients::evaluate(double distance_ft) const {
  const double lz = std::log10(distance_ft);
  return c0 + c1 * lz + c2 * lz * lz;
}

NpdModel NpdModel::rvlt_quadrotor() {
  return NpdModel({NpdCoefficients{88.09, 3.21, -2.62},    // L centerline
                   NpdCoefficients{78.01, 7.26, -3.39},    // L side
                   NpdCoefficients{84.05, 8.76, -4.18},    // D centerline
                   NpdCoefficients{77.34, 11.34, -4.72},   // D side
                   NpdCoefficients{93.35, 5.17, -2.86},    // A centerline
                   NpdCoefficients{85.55, 6.83, -3.14}},   // A side
                  200.0, 20000.0);
}

NpdModel::NpdModel(std::array<NpdCoefficients, 6> rows, double z_lo_ft, double z_hi_ft)
    : rows_(rows), z_lo_(z_lo_ft), z_hi_(z_hi_ft) {
  if (!(z_lo_ > 0.0) || !(z_lo_ < z_hi_) || !std::isfinite(z_hi_)) {
    throw ValidationError("NPD model: need 0 < z_lo < z_hi");
  }
  for (const auto& r : rows_) {
    if (!std::isfinite(r.c0) || !std::isfinite(r.c1) || !std::isfinite(r.c2)) {
      throw ValidationError("NPD model: coefficients must be finite");
    }
  }
}

double single_event_level(const NpdModel& model, Condition condition, double slant_distance_ft) {
  if (!(slant_distance_ft > 0.0)) {
    throw std::domain_error("single_event_level: slant distance must be positive");
  }
  const double z = std::clamp(slant_distance_ft, model.z_lo(), model.z_hi());
  return model.coefficients(condition).evaluate(z);
}

NpdFit fit_npd(std::span<const NoiseSample> samples) {
  std::set<double> distinct;
  for (const auto& s : samples) {
    if (!(s.distance_ft > 0.0) || !std::isfinite(s.distance_ft) || !std::isfinite(s.level_db)) {
      throw FitError("fit_npd: samples need finite level and positive distance");
    }
    distinct.insert(s.distance_ft);
  }
  if (distinct.size() < 3) {
    throw FitError("fit_npd: need at least 3 distinct distances, got " + std::to_string(distinct.size()));
  }

  // Householder QR of the m x 3 design matrix, column-major.
  const std::size_t m = samples.size();
  std::vector<double> a(m * 3);
  std::vector<double> b(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double lz = std::log10(samples[i].distance_ft);
    a[i] = 1.0;
    a[m + i] = lz;
    a[2 * m + i] = lz * lz;
    b[i] = samples[i].level_db;
  }
  std::array<double, 3> diag{};
  for (std::size_t k = 0; k < 3; ++k) {
    double* col = &a[k * m];
    double nrm = 0.0;
    for (std::size_t i = k; i < m; ++i) nrm = std::hypot(nrm, col[i]);
    if (nrm == 0.0) throw FitError("fit_npd: rank-deficient design");
    const double alpha = col[k] > 0.0 ? -nrm : nrm;
    col[k] -= alpha;  // v = x - alpha e_k stored in place
    double vtv = 0.0;
    for (std::size_t i = k; i < m; ++i) vtv += col[i] * col[i];
    auto reflect = [&](double* y) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += col[i] * y[i];
      s = 2.0 * s / vtv;
      for (std::size_t i = k; i < m; ++i) y[i] -= s * col[i];
    };
    for (std::size_t j = k + 1; j < 3; ++j) reflect(&a[j * m]);
    reflect(b.data());
    diag[k] = alpha;
  }
  const double scale = std::abs(diag[0]);
  for (double d : diag) {
    if (std::abs(d) <= 1e-12 * scale) throw FitError("fit_npd: rank-deficient design");
  }
  // Back-substitute R x = Q^T b; R's strict upper triangle is a[j*m + k], k<j.
  std::array<double, 3> x{};
  for (std::size_t kk = 3; kk-- > 0;) {
    double s = b[kk];
    for (std::size_t j = kk + 1; j < 3; ++j) s -= a[j * m + kk] * x[j];
    x[kk] = s / diag[kk];
  }

  NpdFit fit{{x[0], x[1], x[2]}, 0.0};
  double sse = 0.0;
  for (const auto& s : samples) {
    const double r = fit.coefficients.evaluate(s.distance_ft) - s.level_db;
    sse += r * r;
  }
  fit.rms_residual = std::sqrt(sse / static_cast<double>(m));
  return fit;
}

std::optional<double> energy_sum_db(std::span<const double> levels_db) {
  if (levels_db.empty()) return std::nullopt;
  std::vector<double> sorted(levels_db.begin(), levels_db.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // Factor out the loudest source to keep the powers near 1.
  const double ref = sorted.front();
  double sum = 0.0;
  for (double n : sorted) sum += std::pow(10.0, (n - ref) / 10.0);
  return ref + 10.0 * std::log10(sum);
}

std::optional<double> cumulative_increase(std::span<const double> levels_db, double ambient_db,
                                          const NoiseConstants& constants) {
  auto total = energy_sum_db(levels_db);
  if (!total) return std::nullopt;
  return *total - constants.cumulative_offset_db - ambient_db;
}

std::vector<ZoneIncrease> zone_noise_report(const std::vector<NoiseZone>& zones,
                                            std::span<const ZoneExposure> aircraft,
                                            const NpdModel& model,
                                            const NoiseConstants& constants) {
  std::vector<std::vector<double>> levels(zones.size());
  for (const auto& a : aircraft) {
    auto it = std::find_if(zones.begin(), zones.end(),
                           [&](const NoiseZone& z) { return z.id == a.zone_id; });
    if (it == zones.end()) throw LookupError("zone_noise_report: unknown zone '" + a.zone_id + "'");
    levels[it - zones.begin()].push_back(single_event_level(model, kLevelCenterline, a.slant_distance_ft));
  }
  std::vector<ZoneIncrease> out;
  out.reserve(zones.size());
  for (std::size_t z = 0; z < zones.size(); ++z) {
    out.push_back({zones[z].id, cumulative_increase(levels[z], zones[z].ambient_db, constants)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

NpdModel parse_npd_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("NPD model: parse error: ") + e.what());
  }
  try {
    if (doc.at("schema").get<int>() != 1) throw ValidationError("NPD model: 'schema: 1' is required");
    std::array<NpdCoefficients, 6> rows{};
    std::array<bool, 6> seen{};
    for (const auto& row : doc.at("conditions")) {
      const Condition c = Condition::parse(row.at("condition").get<std::string>());
      if (seen[c.index()]) throw ValidationError("NPD model: duplicate condition " + c.name());
      seen[c.index()] = true;
      rows[c.index()] = {row.at("c0").get<double>(), row.at("c1").get<double>(), row.at("c2").get<double>()};
    }
    for (std::size_t i = 0; i < 6; ++i) {
      if (!seen[i]) throw ValidationError("NPD model: missing condition " + Condition::from_index(i).name());
    }
    return NpdModel(rows, doc.at("z_lo_ft").get<double>(), doc.at("z_hi_ft").get<double>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("NPD model: ") + e.what());
  }
}

std::string npd_model_to_json(const NpdModel& model) {
  json doc;
  doc["schema"] = 1;
  doc["z_lo_ft"] = model.z_lo();
  doc["z_hi_ft"] = model.z_hi();
  doc["conditions"] = json::array();
  for (std::size_t i = 0; i < 6; ++i) {
    const Condition c = Condition::from_index(i);
    const auto& k = model.coefficients(c);
    doc["conditions"].push_back({{"condition", c.name()}, {"c0", k.c0}, {"c1", k.c1}, {"c2", k.c2}});
  }
  return doc.dump(2) + "\n";
}

NpdModel load_npd_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_npd_model(ss.str());
}

void save_npd_model(const NpdModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << npd_model_to_json(model);
}

std::vector<NoiseSample> read_noise_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<NoiseSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected distance_ft,level_db");
    }
    try {
      std::size_t used = 0;
      const double d = std::stod(line.substr(0, comma), &used);
      const double l = std::stod(line.substr(comma + 1));
      out.push_back({d, l});
    } catch (const std::invalid_argument&) {
      if (lineno == 1) continue;  // header row
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": not a number");
    }
  }
  return out;
}

}  // namespace uam
