#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "uam/network.hpp"
#include "uam/sim.hpp"

namespace uam::test {

// Scenario document builder; links are directed "XY" ids.
struct Doc {
  nlohmann::json j{{"schema", 1},
                   {"vertiports", nlohmann::json::array()},
                   {"links", nlohmann::json::array()},
                   {"layers_ft", {1000, 1500, 2000, 2500, 3000}},
                   {"zones", nlohmann::json::array()},
                   {"flights", nlohmann::json::array()}};

  Doc& vertiport(const std::string& id, double x, double y) {
    j["vertiports"].push_back({{"id", id}, {"x_m", x}, {"y_m", y}});
    return *this;
  }
  Doc& link(const std::string& from, const std::string& to) {
    j["links"].push_back({{"id", from + to}, {"from", from}, {"to", to}});
    return *this;
  }
  Doc& both(const std::string& a, const std::string& b) { return link(a, b).link(b, a); }
  Doc& flight(const std::string& id, const std::string& o, const std::string& d, double dep) {
    j["flights"].push_back({{"id", id}, {"origin", o}, {"destination", d}, {"departure_s", dep}});
    return *this;
  }
  // One zone holding everything not yet assigned.
  Doc& single_zone(double ambient = 40.0) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& v : j["vertiports"]) members.push_back(v["id"]);
    for (const auto& l : j["links"]) members.push_back(l["id"]);
    j["zones"] = nlohmann::json::array({{{"id", "Z"}, {"members", members}, {"ambient_db", ambient}}});
    return *this;
  }
  std::string text() const { return j.dump(); }
  Scenario scenario() const { return parse_scenario(text()); }
  Network network() const { return parse_network(text()); }
};

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("uam_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::filesystem::path data_dir() { return UAM_DATA_DIR; }

}  // namespace uam::test
