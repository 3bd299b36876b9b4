#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mind/geometry.hpp"

namespace mind::world {

inline constexpr double kLateralAttachMax = 5.0;
inline constexpr double kDefaultRouteLength = 80.0;

struct Lane {
  std::string id;
  Polyline centerline;
  double speed_limit = 0.0;
  std::vector<std::string> successors;
  std::optional<std::string> left;
  std::optional<std::string> right;
};

class LaneGraph {
 public:
  LaneGraph() = default;
  /// Validates ids, references and centerline geometry; throws on violation.
  explicit LaneGraph(std::vector<Lane> lanes);

  const std::vector<Lane>& lanes() const { return lanes_; }
  const Lane& lane(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

 private:
  std::vector<Lane> lanes_;
  std::map<std::string, std::size_t> index_;
};

enum class Role { kEgo, kAgent };

struct EntityState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;

  Vec2 position() const { return {x, y}; }
  bool operator==(const EntityState&) const = default;
};

struct EntityTrack {
  std::string id;
  Role role = Role::kAgent;
  std::vector<EntityState> states;  // oldest first, newest last
};

/// Past H steps of every entity, sampled at a shared period.
class ObservationHistory {
 public:
  ObservationHistory() = default;
  ObservationHistory(double dt, std::vector<EntityTrack> tracks);

  double dt() const { return dt_; }
  std::size_t length() const { return tracks_.front().states.size(); }
  const std::vector<EntityTrack>& tracks() const { return tracks_; }
  std::vector<EntityTrack>& mutable_tracks() { return tracks_; }

  const EntityTrack& ego() const { return tracks_[ego_index_]; }
  std::size_t ego_index() const { return ego_index_; }
  std::size_t agent_count() const { return tracks_.size() - 1; }

  /// Ego first, then agents sorted by id. Every prediction uses this order.
  std::vector<std::size_t> entity_order() const;
  const EntityTrack* find(const std::string& id) const;

 private:
  double dt_ = 0.1;
  std::vector<EntityTrack> tracks_;
  std::size_t ego_index_ = 0;
};

struct RouteCommand {
  std::vector<std::string> lanes;
  bool operator==(const RouteCommand&) const = default;
  auto operator<=>(const RouteCommand&) const = default;
};

struct PolicySpec {
  std::string agent_id;
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
};

struct SimSettings {
  int horizon_steps = 100;
  double dt = 0.1;
};

struct ScenarioFile {
  LaneGraph map;
  ObservationHistory history;
  RouteCommand ego_route;
  std::vector<PolicySpec> policies;
  SimSettings sim;
};

ScenarioFile parse_scenario(const nlohmann::json& j);
ScenarioFile load_scenario(const std::string& path);
nlohmann::json to_json(const ScenarioFile& scenario);
std::string serialize_scenario(const ScenarioFile& scenario);

/// Sorted keys, integers verbatim, floating values as %.9g, two-space indent.
std::string canonical_dump(const nlohmann::json& j);

/// True when consecutive lanes are linked by successor edges.
bool is_connected(const LaneGraph& map, const RouteCommand& route);
/// Concatenated centerlines of the route's lanes.
Polyline route_polyline(const LaneGraph& map, const RouteCommand& route);

struct Attachment {
  std::string lane_id;
  Projection projection;
};

/// Nearest lane whose direction agrees with the heading, within max_lateral.
std::optional<Attachment> attach(const LaneGraph& map, const Vec2& position,
                                 double heading,
                                 double max_lateral = kLateralAttachMax);

/// All successor walks from the attached lane covering max_len metres (or
/// ending at a terminal lane), sorted lexicographically by lane ids.
std::vector<RouteCommand> candidate_routes(const LaneGraph& map,
                                           const Vec2& position, double heading,
                                           double max_len = kDefaultRouteLength,
                                           double max_lateral = kLateralAttachMax);

}  // namespace mind::world
