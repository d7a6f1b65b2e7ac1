#include "uam/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "uam/errors.hpp"
#include "uam/random.hpp"

namespace uam {

using nlohmann::json;

AltitudeLayerSet::AltitudeLayerSet() : levels_{1000.0, 1500.0, 2000.0, 2500.0, 3000.0} {}

AltitudeLayerSet::AltitudeLayerSet(std::vector<double> levels_ft) : levels_(std::move(levels_ft)) {
  if (levels_.size() < 2) {
    throw ValidationError("layers_ft: at least two altitude layers are required");
  }
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!std::isfinite(levels_[i])) {
      throw ValidationError("layers_ft[" + std::to_string(i) + "]: not finite");
    }
    if (i > 0 && levels_[i] <= levels_[i - 1]) {
      throw ValidationError("layers_ft[" + std::to_string(i) + "]: layers must be strictly increasing");
    }
  }
}

std::size_t AltitudeLayerSet::index_of(double z_ft) const {
  auto it = std::find(levels_.begin(), levels_.end(), z_ft);
  return it == levels_.end() ? npos : static_cast<std::size_t>(it - levels_.begin());
}

Network::Network(std::vector<Vertiport> vertiports, std::vector<Link> links,
                 AltitudeLayerSet layers, std::vector<NoiseZone> zones)
    : vertiports_(std::move(vertiports)),
      links_(std::move(links)),
      layers_(std::move(layers)),
      zones_(std::move(zones)) {
  for (std::size_t i = 0; i < vertiports_.size(); ++i) {
    const auto& v = vertiports_[i];
    if (v.id.empty()) throw ValidationError("vertiport #" + std::to_string(i) + ": empty id");
    if (!std::isfinite(v.position.x) || !std::isfinite(v.position.y)) {
      throw ValidationError("vertiport '" + v.id + "': position not finite");
    }
    if (!vertiport_by_id_.emplace(v.id, i).second) {
      throw ValidationError("vertiport '" + v.id + "': duplicate id");
    }
  }

  std::set<std::pair<std::size_t, std::size_t>> directed;
  outgoing_.resize(vertiports_.size());
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const auto& l = links_[i];
    if (l.id.empty()) throw ValidationError("link #" + std::to_string(i) + ": empty id");
    if (vertiport_by_id_.contains(l.id)) {
      throw ValidationError("link '" + l.id + "': id collides with a vertiport id");
    }
    if (!link_by_id_.emplace(l.id, i).second) {
      throw ValidationError("link '" + l.id + "': duplicate id");
    }
    auto from = vertiport_by_id_.find(l.from);
    if (from == vertiport_by_id_.end()) {
      throw ValidationError("link '" + l.id + "': unknown 'from' vertiport '" + l.from + "'");
    }
    auto to = vertiport_by_id_.find(l.to);
    if (to == vertiport_by_id_.end()) {
      throw ValidationError("link '" + l.id + "': unknown 'to' vertiport '" + l.to + "'");
    }
    if (from->second == to->second) {
      throw ValidationError("link '" + l.id + "': from and to are the same vertiport");
    }
    if (!directed.emplace(from->second, to->second).second) {
      throw ValidationError("link '" + l.id + "': duplicate corridor " + l.from + " -> " + l.to);
    }
    link_from_.push_back(from->second);
    link_to_.push_back(to->second);
    link_length_.push_back(distance(vertiports_[from->second].position, vertiports_[to->second].position));
    outgoing_[from->second].push_back(i);
  }
  for (auto& out : outgoing_) {
    std::sort(out.begin(), out.end(),
              [this](std::size_t a, std::size_t b) { return links_[a].id < links_[b].id; });
  }

  constexpr std::size_t unassigned = static_cast<std::size_t>(-1);
  zone_of_link_.assign(links_.size(), unassigned);
  zone_of_vertiport_.assign(vertiports_.size(), unassigned);
  for (std::size_t z = 0; z < zones_.size(); ++z) {
    const auto& zone = zones_[z];
    if (zone.id.empty()) throw ValidationError("zone #" + std::to_string(z) + ": empty id");
    if (!zone_by_id_.emplace(zone.id, z).second) {
      throw ValidationError("zone '" + zone.id + "': duplicate id");
    }
    if (!std::isfinite(zone.ambient_db)) {
      throw ValidationError("zone '" + zone.id + "': ambient_db not finite");
    }
    for (const auto& m : zone.members) {
      std::size_t* slot = nullptr;
      if (auto it = link_by_id_.find(m); it != link_by_id_.end()) {
        slot = &zone_of_link_[it->second];
      } else if (auto jt = vertiport_by_id_.find(m); jt != vertiport_by_id_.end()) {
        slot = &zone_of_vertiport_[jt->second];
      } else {
        throw ValidationError("zone '" + zone.id + "': unknown member '" + m + "'");
      }
      if (*slot != unassigned) {
        throw ValidationError("zone '" + zone.id + "': member '" + m + "' already belongs to zone '" +
                              zones_[*slot].id + "'");
      }
      *slot = z;
    }
  }
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (zone_of_link_[i] == unassigned) {
      throw ValidationError("link '" + links_[i].id + "': not assigned to any zone");
    }
  }
  for (std::size_t i = 0; i < vertiports_.size(); ++i) {
    if (zone_of_vertiport_[i] == unassigned) {
      throw ValidationError("vertiport '" + vertiports_[i].id + "': not assigned to any zone");
    }
  }
}

std::size_t Network::vertiport_index(const std::string& id) const {
  auto it = vertiport_by_id_.find(id);
  if (it == vertiport_by_id_.end()) throw LookupError("unknown vertiport '" + id + "'");
  return it->second;
}

std::size_t Network::link_index(const std::string& id) const {
  auto it = link_by_id_.find(id);
  if (it == link_by_id_.end()) throw LookupError("unknown link '" + id + "'");
  return it->second;
}

std::size_t Network::zone_index(const std::string& id) const {
  auto it = zone_by_id_.find(id);
  if (it == zone_by_id_.end()) throw LookupError("unknown zone '" + id + "'");
  return it->second;
}

Vec2 Network::link_start(std::size_t link) const { return vertiports_[link_from_[link]].position; }
Vec2 Network::link_end(std::size_t link) const { return vertiports_[link_to_[link]].position; }

double Route::length(const Network& network) const {
  double total = 0.0;
  for (auto l : links) total += network.link_length(l);
  return total;
}

// ---------------------------------------------------------------------------
// Routing

namespace {

struct Label {
  double length = 0.0;
  std::vector<std::string> ids;
  std::vector<std::size_t> links;
};

// Lengths within this relative tolerance are considered equal so that the
// id-sequence tie-break is not decided by rounding.
bool shorter(const Label& a, const Label& b) {
  const double tol = 1e-9 * std::max({1.0, a.length, b.length});
  if (std::abs(a.length - b.length) > tol) return a.length < b.length;
  return a.ids < b.ids;
}

}  // namespace

Route build_route(const Network& network, const std::string& origin,
                  const std::string& destination) {
  if (origin == destination) {
    throw ContractError("build_route: origin and destination are both '" + origin + "'");
  }
  const std::size_t src = network.vertiport_index(origin);
  const std::size_t dst = network.vertiport_index(destination);

  const std::size_t n = network.vertiports().size();
  std::vector<std::optional<Label>> best(n);
  std::vector<bool> done(n, false);
  best[src] = Label{};

  // Small graphs: a linear scan for the next node keeps the tie-break exact.
  for (;;) {
    std::size_t next = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (done[v] || !best[v]) continue;
      if (next == n || shorter(*best[v], *best[next])) next = v;
    }
    if (next == n) break;
    done[next] = true;
    if (next == dst) break;
    for (std::size_t l : network.outgoing(next)) {
      const std::size_t to = network.link_to(l);
      if (done[to]) continue;
      Label cand = *best[next];
      cand.length += network.link_length(l);
      cand.ids.push_back(network.links()[l].id);
      cand.links.push_back(l);
      if (!best[to] || shorter(cand, *best[to])) best[to] = std::move(cand);
    }
  }
  if (!done[dst]) {
    throw NoPathError("no path from '" + origin + "' to '" + destination + "'");
  }
  return Route{src, dst, std::move(best[dst]->links)};
}

bool is_valid_route(const Network& network, const Route& route) {
  if (route.links.empty()) return false;
  std::size_t at = route.origin;
  for (auto l : route.links) {
    if (l >= network.links().size() || network.link_from(l) != at) return false;
    at = network.link_to(l);
  }
  return at == route.destination;
}

// ---------------------------------------------------------------------------
// Scenarios

Scenario make_scenario(Network network, std::vector<Flight> flights) {
  Scenario s;
  s.network = std::move(network);
  std::map<OdPair, std::size_t> route_of_pair;
  std::set<std::string> ids;
  for (const auto& f : flights) {
    if (f.id.empty()) throw ValidationError("flight with empty id");
    if (!ids.insert(f.id).second) throw ValidationError("flight '" + f.id + "': duplicate id");
    if (!std::isfinite(f.departure_s) || f.departure_s < 0.0) {
      throw ValidationError("flight '" + f.id + "': departure_s must be finite and >= 0");
    }
    if (!s.network.has_vertiport(f.origin)) {
      throw ValidationError("flight '" + f.id + "': unknown origin '" + f.origin + "'");
    }
    if (!s.network.has_vertiport(f.destination)) {
      throw ValidationError("flight '" + f.id + "': unknown destination '" + f.destination + "'");
    }
    if (f.origin == f.destination) {
      throw ValidationError("flight '" + f.id + "': origin equals destination");
    }
    OdPair od{f.origin, f.destination};
    auto it = route_of_pair.find(od);
    if (it == route_of_pair.end()) {
      try {
        s.routes.push_back(build_route(s.network, f.origin, f.destination));
      } catch (const NoPathError& e) {
        throw ValidationError("flight '" + f.id + "': " + e.what());
      }
      it = route_of_pair.emplace(od, s.routes.size() - 1).first;
    }
    s.flight_route.push_back(it->second);
  }
  s.flights = std::move(flights);
  return s;
}

Scenario generate_scenario(const Network& network, std::size_t n_aircraft,
                           const std::vector<OdPair>& od_pairs,
                           double departure_spacing_s, std::uint64_t seed) {
  if (n_aircraft == 0) throw ContractError("generate_scenario: n_aircraft must be >= 1");
  if (od_pairs.empty()) throw ContractError("generate_scenario: od_pairs must be nonempty");

  std::vector<OdPair> order = od_pairs;
  Rng rng(seed);
  shuffle(std::span<OdPair>(order), rng);

  std::map<std::string, std::size_t> per_origin;
  std::vector<Flight> flights;
  flights.reserve(n_aircraft);
  const int width = n_aircraft > 999 ? static_cast<int>(std::to_string(n_aircraft - 1).size()) : 3;
  for (std::size_t i = 0; i < n_aircraft; ++i) {
    const auto& od = order[i % order.size()];
    std::string num = std::to_string(i);
    if (num.size() < static_cast<std::size_t>(width)) num.insert(0, width - num.size(), '0');
    const std::size_t k = per_origin[od.first]++;
    flights.push_back({"F" + num, od.first, od.second, static_cast<double>(k) * departure_spacing_s});
  }
  return make_scenario(network, std::move(flights));
}

// ---------------------------------------------------------------------------
// Route relation

const std::vector<RouteContact>& RouteRelation::contacts(std::size_t a, std::size_t b) const {
  static const std::vector<RouteContact> empty;
  auto it = contacts_.find({std::min(a, b), std::max(a, b)});
  return it == contacts_.end() ? empty : it->second;
}

void RouteRelation::add(std::size_t a, std::size_t b, RouteContact contact) {
  related_[a * n_ + b] = true;
  related_[b * n_ + a] = true;
  contacts_[{std::min(a, b), std::max(a, b)}].push_back(contact);
}

RouteRelation route_intersections(const Network& network, const std::vector<Route>& routes) {
  RouteRelation rel(routes.size());
  for (std::size_t a = 0; a < routes.size(); ++a) {
    for (std::size_t b = a; b < routes.size(); ++b) {
      const Route& ra = routes[a];
      const Route& rb = routes[b];
      bool any = false;

      for (auto la : ra.links) {
        if (std::find(rb.links.begin(), rb.links.end(), la) != rb.links.end()) {
          rel.add(a, b, {ContactKind::SharedLink, network.link_start(la)});
          any = true;
        }
      }

      auto vertices = [&network](const Route& r) {
        std::set<std::size_t> vs{r.origin};
        for (auto l : r.links) vs.insert(network.link_to(l));
        return vs;
      };
      const auto va = vertices(ra);
      const auto vb = vertices(rb);
      for (auto v : va) {
        if (vb.contains(v)) {
          rel.add(a, b, {ContactKind::SharedVertiport, network.vertiports()[v].position});
          any = true;
        }
      }

      // Geometric crossings away from shared vertiports.
      for (auto la : ra.links) {
        for (auto lb : rb.links) {
          if (la == lb) continue;
          auto p = segment_intersection(network.link_start(la), network.link_end(la),
                                        network.link_start(lb), network.link_end(lb));
          if (!p) continue;
          bool at_vertex = false;
          for (auto v : {network.link_from(la), network.link_to(la), network.link_from(lb),
                         network.link_to(lb)}) {
            if (*p == network.vertiports()[v].position) at_vertex = true;
          }
          if (at_vertex && any) continue;
          rel.add(a, b, {ContactKind::Crossing, *p});
          any = true;
        }
      }
    }
  }
  return rel;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

const json& array_field(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw ValidationError(std::string("scenario: '") + key + "' must be an array");
  }
  return j.at(key);
}

json parse_document(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario: parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("scenario: top level must be an object");
  if (!doc.contains("schema") || !doc["schema"].is_number_integer() || doc["schema"].get<int>() != 1) {
    throw ValidationError("scenario: 'schema: 1' is required");
  }
  return doc;
}

Network network_from_json(const json& doc) {
  std::vector<Vertiport> vertiports;
  for (const auto& v : array_field(doc, "vertiports")) {
    const auto id = field<std::string>(v, "id", "vertiport");
    vertiports.push_back({id, {field<double>(v, "x_m", "vertiport '" + id + "'"),
                               field<double>(v, "y_m", "vertiport '" + id + "'")}});
  }
  std::vector<Link> links;
  for (const auto& l : array_field(doc, "links")) {
    const auto id = field<std::string>(l, "id", "link");
    links.push_back({id, field<std::string>(l, "from", "link '" + id + "'"),
                     field<std::string>(l, "to", "link '" + id + "'")});
  }
  std::vector<double> layers;
  for (const auto& z : array_field(doc, "layers_ft")) {
    if (!z.is_number()) throw ValidationError("layers_ft: entries must be numbers");
    layers.push_back(z.get<double>());
  }
  std::vector<NoiseZone> zones;
  for (const auto& z : array_field(doc, "zones")) {
    const auto id = field<std::string>(z, "id", "zone");
    zones.push_back({id, field<std::vector<std::string>>(z, "members", "zone '" + id + "'"),
                     field<double>(z, "ambient_db", "zone '" + id + "'")});
  }
  return Network(std::move(vertiports), std::move(links), AltitudeLayerSet(std::move(layers)),
                 std::move(zones));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Network parse_network(const std::string& text) { return network_from_json(parse_document(text)); }

Scenario parse_scenario(const std::string& text) {
  const json doc = parse_document(text);
  Network network = network_from_json(doc);
  std::vector<Flight> flights;
  for (const auto& f : array_field(doc, "flights")) {
    const auto id = field<std::string>(f, "id", "flight");
    const std::string where = "flight '" + id + "'";
    flights.push_back({id, field<std::string>(f, "origin", where),
                       field<std::string>(f, "destination", where),
                       field<double>(f, "departure_s", where)});
  }
  return make_scenario(std::move(network), std::move(flights));
}

Network load_network(const std::filesystem::path& path) { return parse_network(read_file(path)); }

Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_file(path)); }

std::string scenario_to_json(const Scenario& scenario) {
  const Network& net = scenario.network;
  json doc;
  doc["schema"] = 1;
  doc["vertiports"] = json::array();
  for (const auto& v : net.vertiports()) {
    doc["vertiports"].push_back({{"id", v.id}, {"x_m", v.position.x}, {"y_m", v.position.y}});
  }
  doc["links"] = json::array();
  for (const auto& l : net.links()) {
    doc["links"].push_back({{"id", l.id}, {"from", l.from}, {"to", l.to}});
  }
  doc["layers_ft"] = net.layers().levels();
  doc["zones"] = json::array();
  for (const auto& z : net.zones()) {
    doc["zones"].push_back({{"id", z.id}, {"members", z.members}, {"ambient_db", z.ambient_db}});
  }
  doc["flights"] = json::array();
  for (const auto& f : scenario.flights) {
    doc["flights"].push_back({{"id", f.id},
                              {"origin", f.origin},
                              {"destination", f.destination},
                              {"departure_s", f.departure_s}});
  }
  return doc.dump(2) + "\n";
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << scenario_to_json(scenario);
}

}  // namespace uam
