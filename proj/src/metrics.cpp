#include "uam/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "uam/errors.hpp"

namespace uam {

using nlohmann::json;

std::vector<double> altitude_histogram(const std::vector<TraceRow>& trace, const AltitudeLayerSet& layers) {
  if (trace.empty()) throw ContractError("altitude_histogram: empty trace");
  std::vector<double> hist(layers.size(), 0.0);
  for (const auto& r : trace) {
    const double layer = occupied_layer(r.z_ft, r.z_target_ft, layers);
    hist[layers.index_of(layer)] += 1.0;
  }
  for (double& h : hist) h /= static_cast<double>(trace.size());
  return hist;
}

double histogram_entropy(const std::vector<double>& histogram) {
  double h = 0.0;
  for (double p : histogram) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

namespace {

std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TraceMetrics metrics_from_trace(const std::vector<TraceRow>& trace, const Network& network,
                                const NpdModel& model, const NoiseConstants& constants) {
  TraceMetrics m;
  const auto& zones = network.zones();
  m.histogram = trace.empty() ? std::vector<double>(network.layers().size(), 0.0)
                              : altitude_histogram(trace, network.layers());
  for (const auto& z : zones) m.series.zone_ids.push_back(z.id);

  std::vector<double> sum(zones.size(), 0.0);
  std::vector<std::size_t> count(zones.size(), 0);
  std::vector<std::optional<double>> peak(zones.size());

  std::size_t i = 0;
  std::vector<ZoneExposure> exposures;
  while (i < trace.size()) {
    const double t = trace[i].t;
    exposures.clear();
    for (; i < trace.size() && trace[i].t == t; ++i) {
      const std::size_t link = network.link_index(trace[i].link);
      exposures.push_back({zones[network.zone_of_link(link)].id, trace[i].z_ft});
    }
    const auto report = zone_noise_report(zones, exposures, model, constants);
    std::vector<std::optional<double>> row;
    row.reserve(zones.size());
    for (std::size_t z = 0; z < zones.size(); ++z) {
      const auto& v = report[z].increase_db;
      row.push_back(v);
      if (!v) continue;
      sum[z] += *v;
      ++count[z];
      peak[z] = peak[z] ? std::max(*peak[z], *v) : *v;
    }
    m.series.times.push_back(t);
    m.series.values.push_back(std::move(row));
  }

  std::vector<double> means;
  for (std::size_t z = 0; z < zones.size(); ++z) {
    ZoneNoiseSummary s{zones[z].id, std::nullopt, peak[z]};
    if (count[z] > 0) {
      s.mean_increase_db = sum[z] / static_cast<double>(count[z]);
      means.push_back(*s.mean_increase_db);
      m.max_noise_increase_db =
          m.max_noise_increase_db ? std::max(*m.max_noise_increase_db, *peak[z]) : *peak[z];
    }
    m.zones.push_back(std::move(s));
  }
  m.median_noise_increase_db = median(std::move(means));
  return m;
}

EpisodeMetrics run_episode(Policy& policy, const std::shared_ptr<const ScenarioContext>& context,
                           const SimConfig& sim, const RewardConfig& reward, std::uint64_t seed,
                           std::vector<TraceRow>* trace_out) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  EpisodeOptions opts;
  opts.record_trace = true;
  EpisodeRecord rec = run_policy_episode(context, sim, reward, policy, rng, opts);

  EpisodeMetrics m;
  m.rho = reward.rho();
  m.seed = seed;
  m.los_count = rec.los_events.size();
  m.mean_return = rec.mean_return();
  m.layers_ft = context->scenario.network.layers().levels();
  m.trace = metrics_from_trace(rec.trace, context->scenario.network, reward.model());
  m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (trace_out) *trace_out = std::move(rec.trace);
  return m;
}

void check_compatible(const Checkpoint& ckpt, const Scenario& scenario) {
  if (!(ckpt.layers == scenario.network.layers())) {
    throw ValidationError("checkpoint was trained on a different altitude layer set than the scenario uses");
  }
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt6(const std::optional<double>& v) { return v ? fmt6(*v) : std::string(); }

json num6(double v) { return std::stod(fmt6(v)); }
json num6(const std::optional<double>& v) { return v ? num6(*v) : json(nullptr); }

std::string layer_label(double ft) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", ft);
  return buf;
}

std::optional<double> opt_num(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string metrics_to_csv(const std::vector<EpisodeMetrics>& rows) {
  std::ostringstream out;
  out << "rho,seed,los_count,mean_return,median_noise_increase_db,max_noise_increase_db,top_layer_fraction";
  if (!rows.empty()) {
    for (double l : rows.front().layers_ft) out << ",layer_" << layer_label(l);
    for (const auto& z : rows.front().trace.zones) out << ",zone_" << z.zone_id << "_mean_db";
  }
  out << '\n';
  for (const auto& m : rows) {
    out << fmt6(m.rho) << ',' << m.seed << ',' << m.los_count << ',' << fmt6(m.mean_return) << ','
        << fmt6(m.trace.median_noise_increase_db) << ',' << fmt6(m.trace.max_noise_increase_db) << ','
        << fmt6(m.top_layer_fraction());
    for (double h : m.trace.histogram) out << ',' << fmt6(h);
    for (const auto& z : m.trace.zones) out << ',' << fmt6(z.mean_increase_db);
    out << '\n';
  }
  return out.str();
}

std::string metrics_to_json(const std::vector<EpisodeMetrics>& rows) {
  json arr = json::array();
  for (const auto& m : rows) {
    json zones = json::array();
    for (const auto& z : m.trace.zones) {
      zones.push_back({{"id", z.zone_id}, {"mean_increase_db", num6(z.mean_increase_db)},
                       {"max_increase_db", num6(z.max_increase_db)}});
    }
    json hist = json::array();
    for (double h : m.trace.histogram) hist.push_back(num6(h));
    arr.push_back({{"rho", num6(m.rho)},
                   {"seed", m.seed},
                   {"los_count", m.los_count},
                   {"mean_return", num6(m.mean_return)},
                   {"median_noise_increase_db", num6(m.trace.median_noise_increase_db)},
                   {"max_noise_increase_db", num6(m.trace.max_noise_increase_db)},
                   {"layers_ft", m.layers_ft},
                   {"histogram", hist},
                   {"zones", zones}});
  }
  return arr.dump(2) + "\n";
}

std::vector<EpisodeMetrics> metrics_from_json(const std::string& text) {
  std::vector<EpisodeMetrics> rows;
  try {
    for (const auto& j : json::parse(text)) {
      EpisodeMetrics m;
      m.rho = opt_num(j.at("rho"));
      m.seed = j.at("seed").get<std::uint64_t>();
      m.los_count = j.at("los_count").get<std::size_t>();
      m.mean_return = j.at("mean_return").get<double>();
      m.trace.median_noise_increase_db = opt_num(j.at("median_noise_increase_db"));
      m.trace.max_noise_increase_db = opt_num(j.at("max_noise_increase_db"));
      m.layers_ft = j.at("layers_ft").get<std::vector<double>>();
      m.trace.histogram = j.at("histogram").get<std::vector<double>>();
      for (const auto& z : j.at("zones")) {
        m.trace.zones.push_back({z.at("id").get<std::string>(), opt_num(z.at("mean_increase_db")),
                                 opt_num(z.at("max_increase_db"))});
      }
      rows.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("metrics json: ") + e.what());
  }
  return rows;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << contents;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot write '" + path.string() + "': " + ec.message());
}

void export_metrics(const std::vector<EpisodeMetrics>& rows, const std::filesystem::path& path,
                    ExportFormat format) {
  write_file_atomic(path, format == ExportFormat::Csv ? metrics_to_csv(rows) : metrics_to_json(rows));
}

std::string noise_series_csv(const NoiseSeries& series) {
  std::ostringstream out;
  out << 't';
  for (const auto& z : series.zone_ids) out << ',' << z;
  out << '\n';
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    out << fmt6(series.times[i]);
    for (const auto& v : series.values[i]) out << ',' << fmt6(v);
    out << '\n';
  }
  return out.str();
}

}  // namespace uam
