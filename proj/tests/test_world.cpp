#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"

#include "helpers.hpp"
#include "mind/errors.hpp"
#include "oracles.hpp"

using namespace mind;
using nlohmann::json;

namespace {

json minimal_scenario() {
  return test::scenario_json(json::array({test::lane("road", {{0, 0}, {100, 0}})}),
                             json::array({test::entity("ego", "ego", 10, 0, 0, 5)}),
                             json::array({"road"}), json::array(), 10);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("minimal scenario has no agents") {
  const auto s = world::parse_scenario(minimal_scenario());
  CHECK(s.history.agent_count() == 0);
  CHECK(s.sim.horizon_steps == 10);
  CHECK(s.history.ego().id == "ego");
}

TEST_CASE("unknown successor is a reference error") {
  json j = minimal_scenario();
  j["map"]["lanes"][0]["successors"] = json::array({"nowhere"});
  CHECK_THROWS_AS(world::parse_scenario(j), ReferenceError);
}

TEST_CASE("missing field is a schema error") {
  json j = minimal_scenario();
  j.erase("history");
  CHECK_THROWS_AS(world::parse_scenario(j), SchemaError);
}

TEST_CASE("unknown route lane is a reference error") {
  json j = minimal_scenario();
  j["ego_route"] = json::array({"ghost"});
  CHECK_THROWS_AS(world::parse_scenario(j), ReferenceError);
}

TEST_CASE("malformed JSON file is a parse error") {
  const std::string path = "malformed_scenario.json";
  std::ofstream(path) << "{\"map\": [";
  CHECK_THROWS_AS(world::load_scenario(path), ParseError);
}

TEST_CASE("canonical round trip is byte identical on every fixture") {
  for (const std::string name : {"t_intersection.json", "intersection_4way.json", "merge.json",
                           "straight_road.json", "adversarial_intersection.json", "playback.json",
                           "collision.json", "empty_road.json"}) {
    CAPTURE(name);
    const std::string raw = read_file(test::fixture(name));
    const std::string canonical = world::canonical_dump(json::parse(raw));
    const auto loaded = world::load_scenario(test::fixture(name));
    CHECK(world::serialize_scenario(loaded) == canonical);
    CHECK(world::serialize_scenario(world::parse_scenario(json::parse(canonical))) == canonical);
  }
}

TEST_CASE("canonical dump formats floats with 9 significant digits and sorts keys") {
  const json j = {{"b", 0.1 + 0.2}, {"a", 3}, {"c", {1.0, 2.5}}};
  CHECK(world::canonical_dump(j) == "{\n  \"a\": 3,\n  \"b\": 0.3,\n  \"c\": [1, 2.5]\n}\n");
}

TEST_CASE("single straight lane yields one route") {
  const world::LaneGraph map({{"road", Polyline({{0, 0}, {200, 0}}), 10.0, {}, {}, {}}});
  const auto routes = world::candidate_routes(map, {10, 0.5}, 0.0);
  REQUIRE(routes.size() == 1);
  CHECK(routes[0].lanes == std::vector<std::string>{"road"});
}

TEST_CASE("lane with two successors yields two routes") {
  const world::LaneGraph map({{"a", Polyline({{0, 0}, {20, 0}}), 10.0, {"b", "c"}, {}, {}},
                              {"b", Polyline({{20, 0}, {120, 0}}), 10.0, {}, {}, {}},
                              {"c", Polyline({{20, 0}, {100, 60}}), 10.0, {}, {}, {}}});
  const auto routes = world::candidate_routes(map, {5, 0}, 0.0);
  REQUIRE(routes.size() == 2);
  CHECK(routes[0].lanes == std::vector<std::string>{"a", "b"});
  CHECK(routes[1].lanes == std::vector<std::string>{"a", "c"});
}

TEST_CASE("4-way intersection ego has left, straight and right routes") {
  const auto s = test::load_fixture("intersection_4way.json");
  const auto& ego = s.history.ego().states.back();
  const auto routes = world::candidate_routes(s.map, ego.position(), ego.theta, 60.0);
  const auto at = world::attach(s.map, ego.position(), ego.theta);
  REQUIRE(at);
  const double remaining = s.map.lane(at->lane_id).centerline.length() - at->projection.s;
  const auto oracle = oracle::route_walks(s.map, at->lane_id, remaining, 60.0);
  CHECK(routes.size() == 3);
  std::set<std::vector<std::string>> got;
  for (const auto& r : routes) {
    CHECK(world::is_connected(s.map, r));
    got.insert(r.lanes);
  }
  CHECK(got == oracle);
  CHECK(std::is_sorted(routes.begin(), routes.end()));
}

TEST_CASE("candidate routes match the brute-force walk on every fixture entity") {
  for (const std::string name : {"t_intersection.json", "intersection_4way.json", "merge.json",
                           "straight_road.json"}) {
    const auto s = test::load_fixture(name);
    for (const auto& track : s.history.tracks()) {
      CAPTURE(name);
      CAPTURE(track.id);
      const auto& st = track.states.back();
      for (double len : {20.0, 60.0, 80.0, 150.0}) {
        const auto routes = world::candidate_routes(s.map, st.position(), st.theta, len);
        const auto at = world::attach(s.map, st.position(), st.theta);
        REQUIRE(at);
        const double remaining = s.map.lane(at->lane_id).centerline.length() - at->projection.s;
        std::set<std::vector<std::string>> got;
        for (const auto& r : routes) got.insert(r.lanes);
        CHECK(got == oracle::route_walks(s.map, at->lane_id, remaining, len));
      }
    }
  }
}

TEST_CASE("candidate routes do not depend on lane order") {
  const auto s = test::load_fixture("intersection_4way.json");
  auto lanes = s.map.lanes();
  std::mt19937_64 rng(7);
  const auto& ego = s.history.ego().states.back();
  const auto base = world::candidate_routes(s.map, ego.position(), ego.theta);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(lanes.begin(), lanes.end(), rng);
    const world::LaneGraph shuffled(lanes);
    CHECK(world::candidate_routes(shuffled, ego.position(), ego.theta) == base);
  }
}

TEST_CASE("entity far from every lane has no route") {
  const world::LaneGraph map({{"road", Polyline({{0, 0}, {200, 0}}), 10.0, {}, {}, {}}});
  CHECK_THROWS_AS(world::candidate_routes(map, {10, 20}, 0.0), NoLaneError);
}
