#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "uam/geometry.hpp"

namespace uam {

struct Vertiport {
  std::string id;
  Vec2 position;
};

// Directed corridor between two vertiports.
struct Link {
  std::string id;
  std::string from;
  std::string to;
};

struct NoiseZone {
  std::string id;
  std::vector<std::string> members;  // link and vertiport ids
  double ambient_db = 0.0;
};

// Strictly increasing flight levels in feet.
class AltitudeLayerSet {
 public:
  AltitudeLayerSet();
  explicit AltitudeLayerSet(std::vector<double> levels_ft);

  const std::vector<double>& levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }
  double lowest() const { return levels_.front(); }
  double highest() const { return levels_.back(); }
  double span() const { return highest() - lowest(); }

  // Index of the layer equal to z, or npos.
  std::size_t index_of(double z_ft) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  friend bool operator==(const AltitudeLayerSet&, const AltitudeLayerSet&) = default;

 private:
  std::vector<double> levels_;
};

class Network {
 public:
  Network() = default;
  // Validates referential integrity; throws ValidationError naming the
  // offending entity.
  Network(std::vector<Vertiport> vertiports, std::vector<Link> links,
          AltitudeLayerSet layers, std::vector<NoiseZone> zones);

  const std::vector<Vertiport>& vertiports() const { return vertiports_; }
  const std::vector<Link>& links() const { return links_; }
  const AltitudeLayerSet& layers() const { return layers_; }
  const std::vector<NoiseZone>& zones() const { return zones_; }

  std::size_t vertiport_index(const std::string& id) const;
  std::size_t link_index(const std::string& id) const;
  std::size_t zone_index(const std::string& id) const;
  bool has_vertiport(const std::string& id) const { return vertiport_by_id_.contains(id); }

  Vec2 link_start(std::size_t link) const;
  Vec2 link_end(std::size_t link) const;
  double link_length(std::size_t link) const { return link_length_[link]; }
  std::size_t link_from(std::size_t link) const { return link_from_[link]; }
  std::size_t link_to(std::size_t link) const { return link_to_[link]; }

  // Zone index that contains a given link / vertiport.
  std::size_t zone_of_link(std::size_t link) const { return zone_of_link_[link]; }
  std::size_t zone_of_vertiport(std::size_t v) const { return zone_of_vertiport_[v]; }

  // Outgoing link indices per vertiport, ordered by link id.
  const std::vector<std::size_t>& outgoing(std::size_t v) const { return outgoing_[v]; }

 private:
  std::vector<Vertiport> vertiports_;
  std::vector<Link> links_;
  AltitudeLayerSet layers_;
  std::vector<NoiseZone> zones_;

  std::unordered_map<std::string, std::size_t> vertiport_by_id_;
  std::unordered_map<std::string, std::size_t> link_by_id_;
  std::unordered_map<std::string, std::size_t> zone_by_id_;
  std::vector<std::size_t> link_from_;
  std::vector<std::size_t> link_to_;
  std::vector<double> link_length_;
  std::vector<std::size_t> zone_of_link_;
  std::vector<std::size_t> zone_of_vertiport_;
  std::vector<std::vector<std::size_t>> outgoing_;
};

struct Route {
  std::size_t origin = 0;
  std::size_t destination = 0;
  std::vector<std::size_t> links;  // link indices, chained end to start

  double length(const Network& network) const;
  friend bool operator==(const Route&, const Route&) = default;
};

struct Flight {
  std::string id;
  std::string origin;
  std::string destination;
  double departure_s = 0.0;
};

using OdPair = std::pair<std::string, std::string>;

// A network plus its frozen flight list. Routes are computed once, one per
// distinct O-D pair; flight_route[i] indexes into routes.
struct Scenario {
  Network network;
  std::vector<Flight> flights;
  std::vector<Route> routes;
  std::vector<std::size_t> flight_route;
};

// Shortest path by total link length over directed links. Equal-length
// candidates are ordered by their link-id sequence, lexicographically.
Route build_route(const Network& network, const std::string& origin,
                  const std::string& destination);

// True when consecutive links share endpoints and the chain runs
// origin -> destination.
bool is_valid_route(const Network& network, const Route& route);

// Builds the flight list and routes. Throws ValidationError on bad flights.
Scenario make_scenario(Network network, std::vector<Flight> flights);

// Flights are assigned to O-D pairs round-robin over a seeded shuffle of
// od_pairs; departures are staggered by departure_spacing_s per origin.
Scenario generate_scenario(const Network& network, std::size_t n_aircraft,
                           const std::vector<OdPair>& od_pairs,
                           double departure_spacing_s, std::uint64_t seed);

enum class ContactKind { SharedLink, SharedVertiport, Crossing };

struct RouteContact {
  ContactKind kind;
  Vec2 point;
};

// Symmetric relation over routes: two routes are related when they share a
// link, share a vertiport, or have crossing link segments. A route is always
// related to itself.
class RouteRelation {
 public:
  RouteRelation() = default;
  explicit RouteRelation(std::size_t n) : n_(n), related_(n * n, false) {}

  std::size_t size() const { return n_; }
  bool related(std::size_t a, std::size_t b) const { return related_[a * n_ + b]; }
  const std::vector<RouteContact>& contacts(std::size_t a, std::size_t b) const;

  void add(std::size_t a, std::size_t b, RouteContact contact);

 private:
  std::size_t n_ = 0;
  std::vector<bool> related_;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<RouteContact>> contacts_;
};

RouteRelation route_intersections(const Network& network, const std::vector<Route>& routes);

// Scenario file (JSON, schema 1).
Network load_network(const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);
Scenario parse_scenario(const std::string& text);
Network parse_network(const std::string& text);

}  // namespace uam
