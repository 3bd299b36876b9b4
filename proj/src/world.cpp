#include "mind/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "mind/errors.hpp"

namespace mind::world {

using nlohmann::json;

LaneGraph::LaneGraph(std::vector<Lane> lanes) : lanes_(std::move(lanes)) {
  for (std::size_t i = 0; i < lanes_.size(); ++i) {
    const Lane& l = lanes_[i];
    if (!index_.emplace(l.id, i).second) {
      throw SchemaError("duplicate lane id '" + l.id + "'");
    }
    if (l.centerline.size() < 2) {
      throw SchemaError("lane '" + l.id + "' needs at least 2 centerline points");
    }
    const auto& pts = l.centerline.points();
    for (std::size_t k = 1; k < pts.size(); ++k) {
      if ((pts[k] - pts[k - 1]).norm() < 1e-9) {
        throw SchemaError("lane '" + l.id + "' has coincident consecutive points");
      }
    }
  }
  for (const Lane& l : lanes_) {
    for (const auto& s : l.successors) {
      if (!contains(s)) {
        throw ReferenceError("lane '" + l.id + "' references unknown successor '" + s + "'");
      }
    }
    for (const auto* n : {&l.left, &l.right}) {
      if (*n && !contains(**n)) {
        throw ReferenceError("lane '" + l.id + "' references unknown neighbor '" + **n + "'");
      }
    }
  }
}

const Lane& LaneGraph::lane(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ReferenceError("unknown lane id '" + id + "'");
  return lanes_[it->second];
}

ObservationHistory::ObservationHistory(double dt, std::vector<EntityTrack> tracks)
    : dt_(dt), tracks_(std::move(tracks)) {
  if (!(dt_ > 0.0)) throw SchemaError("history dt must be positive");
  if (tracks_.empty()) throw SchemaError("history has no entities");
  std::size_t egos = 0;
  std::set<std::string> ids;
  const std::size_t h = tracks_.front().states.size();
  if (h < 1) throw SchemaError("history needs at least one state per entity");
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    const auto& t = tracks_[i];
    if (!ids.insert(t.id).second) throw SchemaError("duplicate entity id '" + t.id + "'");
    if (t.role == Role::kEgo) {
      ++egos;
      ego_index_ = i;
    }
    if (t.states.size() != h) {
      throw SchemaError("entity '" + t.id + "' history length differs from the others");
    }
  }
  if (egos != 1) throw SchemaError("history must contain exactly one ego");
}

std::vector<std::size_t> ObservationHistory::entity_order() const {
  std::vector<std::size_t> agents;
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    if (i != ego_index_) agents.push_back(i);
  }
  std::sort(agents.begin(), agents.end(), [&](std::size_t a, std::size_t b) {
    return tracks_[a].id < tracks_[b].id;
  });
  std::vector<std::size_t> order{ego_index_};
  order.insert(order.end(), agents.begin(), agents.end());
  return order;
}

const EntityTrack* ObservationHistory::find(const std::string& id) const {
  for (const auto& t : tracks_) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(where + ": missing field '" + key + "'");
  }
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError(where + ": expected a number");
  return j.get<double>();
}

std::string string_id(const json& j, const std::string& where) {
  if (!j.is_string()) throw SchemaError(where + ": expected a string id");
  return j.get<std::string>();
}

std::vector<std::string> id_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array of ids");
  std::vector<std::string> out;
  for (const auto& e : j) out.push_back(string_id(e, where));
  return out;
}

Lane parse_lane(const json& j) {
  Lane lane;
  lane.id = string_id(require(j, "id", "lane"), "lane.id");
  const std::string where = "lane '" + lane.id + "'";
  const json& cl = require(j, "centerline", where);
  if (!cl.is_array()) throw SchemaError(where + ": centerline must be an array");
  std::vector<Vec2> pts;
  for (const auto& p : cl) {
    if (!p.is_array() || p.size() != 2) throw SchemaError(where + ": centerline points are [x, y]");
    pts.emplace_back(number(p[0], where), number(p[1], where));
  }
  lane.centerline = Polyline(std::move(pts));
  lane.speed_limit = number(require(j, "speed_limit", where), where);
  if (!(lane.speed_limit > 0.0)) throw SchemaError(where + ": speed_limit must be positive");
  lane.successors = id_list(require(j, "successors", where), where);
  for (const char* side : {"left", "right"}) {
    if (j.contains(side) && !j.at(side).is_null()) {
      auto& dst = std::string(side) == "left" ? lane.left : lane.right;
      dst = string_id(j.at(side), where);
    }
  }
  return lane;
}

EntityTrack parse_track(const json& j) {
  EntityTrack t;
  t.id = string_id(require(j, "id", "agent"), "agent.id");
  const std::string where = "agent '" + t.id + "'";
  const std::string role = require(j, "role", where).get<std::string>();
  if (role == "ego") {
    t.role = Role::kEgo;
  } else if (role == "agent") {
    t.role = Role::kAgent;
  } else {
    throw SchemaError(where + ": role must be 'ego' or 'agent'");
  }
  const json& states = require(j, "states", where);
  if (!states.is_array()) throw SchemaError(where + ": states must be an array");
  for (const auto& s : states) {
    if (!s.is_array() || s.size() != 4) throw SchemaError(where + ": states are [x, y, theta, v]");
    t.states.push_back({number(s[0], where), number(s[1], where), number(s[2], where),
                        number(s[3], where)});
  }
  return t;
}

json state_json(const EntityState& s) { return json::array({s.x, s.y, s.theta, s.v}); }

void dump_value(const json& j, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string pad_in(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad_in + json(it.key()).dump() + ": ";
        dump_value(it.value(), indent + 1, out);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) {
        return e.is_primitive();
      });
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump_value(j[i], indent + 1, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad_in;
        dump_value(j[i], indent + 1, out);
      }
      out += "\n" + pad + "]";
      return;
    }
    case json::value_t::number_float: {
      char buf[64];
      const double v = j.get<double>();
      std::snprintf(buf, sizeof(buf), "%.9g", v == 0.0 ? 0.0 : v);
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

ScenarioFile parse_scenario(const json& j) {
  if (!j.is_object()) throw SchemaError("scenario: top level must be an object");
  ScenarioFile sf;

  const json& map = require(j, "map", "scenario");
  const json& lanes = require(map, "lanes", "map");
  if (!lanes.is_array()) throw SchemaError("map.lanes must be an array");
  std::vector<Lane> parsed;
  for (const auto& l : lanes) parsed.push_back(parse_lane(l));
  sf.map = LaneGraph(std::move(parsed));

  const json& hist = require(j, "history", "scenario");
  const double dt = number(require(hist, "dt", "history"), "history.dt");
  const json& agents = require(hist, "agents", "history");
  if (!agents.is_array()) throw SchemaError("history.agents must be an array");
  std::vector<EntityTrack> tracks;
  for (const auto& a : agents) tracks.push_back(parse_track(a));
  sf.history = ObservationHistory(dt, std::move(tracks));

  sf.ego_route.lanes = id_list(require(j, "ego_route", "scenario"), "ego_route");
  for (const auto& id : sf.ego_route.lanes) {
    if (!sf.map.contains(id)) throw ReferenceError("ego_route references unknown lane '" + id + "'");
  }
  if (!sf.ego_route.lanes.empty() && !is_connected(sf.map, sf.ego_route)) {
    throw ReferenceError("ego_route lanes are not connected by successor links");
  }

  const json& pols = require(j, "policies", "scenario");
  if (!pols.is_array()) throw SchemaError("policies must be an array");
  for (const auto& p : pols) {
    PolicySpec spec;
    spec.agent_id = string_id(require(p, "agent_id", "policy"), "policy.agent_id");
    spec.kind = require(p, "kind", "policy").get<std::string>();
    spec.params = require(p, "params", "policy");
    if (!sf.history.find(spec.agent_id)) {
      throw ReferenceError("policy references unknown agent '" + spec.agent_id + "'");
    }
    if (spec.kind != "playback" && spec.kind != "lane-follow" &&
        spec.kind != "adversarial-trigger") {
      throw SchemaError("policy for '" + spec.agent_id + "' has unknown kind '" + spec.kind + "'");
    }
    sf.policies.push_back(std::move(spec));
  }

  const json& sim = require(j, "sim", "scenario");
  const json& hs = require(sim, "horizon_steps", "sim");
  if (!hs.is_number_integer() || hs.get<long>() < 1) {
    throw SchemaError("sim.horizon_steps must be a positive integer");
  }
  sf.sim.horizon_steps = hs.get<int>();
  sf.sim.dt = number(require(sim, "dt", "sim"), "sim.dt");
  if (!(sf.sim.dt > 0.0)) throw SchemaError("sim.dt must be positive");
  return sf;
}

ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON in '" + path + "': " + e.what());
  }
  return parse_scenario(j);
}

json to_json(const ScenarioFile& sf) {
  json lanes = json::array();
  for (const Lane& l : sf.map.lanes()) {
    json cl = json::array();
    for (const Vec2& p : l.centerline.points()) cl.push_back(json::array({p.x(), p.y()}));
    json lj = {{"id", l.id}, {"centerline", cl}, {"speed_limit", l.speed_limit},
               {"successors", l.successors}};
    if (l.left) lj["left"] = *l.left;
    if (l.right) lj["right"] = *l.right;
    lanes.push_back(std::move(lj));
  }
  json agents = json::array();
  for (const auto& t : sf.history.tracks()) {
    json states = json::array();
    for (const auto& s : t.states) states.push_back(state_json(s));
    agents.push_back({{"id", t.id},
                      {"role", t.role == Role::kEgo ? "ego" : "agent"},
                      {"states", states}});
  }
  json policies = json::array();
  for (const auto& p : sf.policies) {
    policies.push_back({{"agent_id", p.agent_id}, {"kind", p.kind}, {"params", p.params}});
  }
  return {{"map", {{"lanes", lanes}}},
          {"history", {{"dt", sf.history.dt()}, {"agents", agents}}},
          {"ego_route", sf.ego_route.lanes},
          {"policies", policies},
          {"sim", {{"horizon_steps", sf.sim.horizon_steps}, {"dt", sf.sim.dt}}}};
}

std::string canonical_dump(const json& j) {
  std::string out;
  dump_value(j, 0, out);
  out += "\n";
  return out;
}

std::string serialize_scenario(const ScenarioFile& sf) { return canonical_dump(to_json(sf)); }

bool is_connected(const LaneGraph& map, const RouteCommand& route) {
  for (std::size_t i = 0; i + 1 < route.lanes.size(); ++i) {
    if (!map.contains(route.lanes[i]) || !map.contains(route.lanes[i + 1])) return false;
    const auto& succ = map.lane(route.lanes[i]).successors;
    if (std::find(succ.begin(), succ.end(), route.lanes[i + 1]) == succ.end()) return false;
  }
  return route.lanes.empty() || map.contains(route.lanes.front());
}

Polyline route_polyline(const LaneGraph& map, const RouteCommand& route) {
  Polyline out;
  for (const auto& id : route.lanes) out.append(map.lane(id).centerline);
  return out;
}

std::optional<Attachment> attach(const LaneGraph& map, const Vec2& position, double heading,
                                 double max_lateral) {
  struct Candidate {
    double score;
    double remaining;
    const Lane* lane;
    Projection proj;
    bool aligned;
  };
  std::vector<Candidate> cands;
  for (const Lane& l : map.lanes()) {
    Projection pr = l.centerline.project(position);
    const double len = l.centerline.length();
    double dist = pr.distance;
    if (pr.s < 0.0) {
      dist = (position - l.centerline.points().front()).norm();
    } else if (pr.s > len) {
      dist = (position - l.centerline.points().back()).norm();
    }
    if (dist > max_lateral) continue;
    const double s = std::clamp(pr.s, 0.0, len);
    const double dh = std::abs(normalize_angle(heading - l.centerline.heading(s)));
    // Heading mismatch is traded against metres so that overlapping
    // connector lanes resolve toward the one matching the direction of travel.
    cands.push_back({dist + 2.0 * dh, len - s, &l, pr, dh < std::numbers::pi / 2});
  }
  if (cands.empty()) return std::nullopt;
  const bool any_aligned = std::any_of(cands.begin(), cands.end(),
                                       [](const Candidate& c) { return c.aligned; });
  const Candidate* best = nullptr;
  for (const auto& c : cands) {
    if (any_aligned && !c.aligned) continue;
    if (!best) {
      best = &c;
      continue;
    }
    const double ds = c.score - best->score;
    if (ds < -1e-9 ||
        (std::abs(ds) <= 1e-9 &&
         (c.remaining < best->remaining - 1e-9 ||
          (std::abs(c.remaining - best->remaining) <= 1e-9 && c.lane->id < best->lane->id)))) {
      best = &c;
    }
  }
  return Attachment{best->lane->id, best->proj};
}

std::vector<RouteCommand> candidate_routes(const LaneGraph& map, const Vec2& position,
                                           double heading, double max_len, double max_lateral) {
  const auto at = attach(map, position, heading, max_lateral);
  if (!at) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "no lane within %.1f m of (%.2f, %.2f)", max_lateral,
                  position.x(), position.y());
    throw NoLaneError(buf);
  }
  const Lane& start = map.lane(at->lane_id);
  const double s0 = std::clamp(at->projection.s, 0.0, start.centerline.length());

  std::set<RouteCommand> found;
  std::vector<std::string> path{start.id};
  auto walk = [&](auto&& self, const Lane& lane, double covered) -> void {
    if (covered >= max_len || lane.successors.empty() || path.size() > 64) {
      found.insert(RouteCommand{path});
      return;
    }
    bool extended = false;
    for (const auto& sid : lane.successors) {
      if (std::find(path.begin(), path.end(), sid) != path.end()) continue;
      const Lane& next = map.lane(sid);
      path.push_back(sid);
      self(self, next, covered + next.centerline.length());
      path.pop_back();
      extended = true;
    }
    if (!extended) found.insert(RouteCommand{path});
  };
  walk(walk, start, start.centerline.length() - s0);
  return {found.begin(), found.end()};
}

}  // namespace mind::world
