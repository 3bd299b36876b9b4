#include <map>
#include <set>

#include "doctest.h"

#include "helpers.hpp"
#include "mind/aime.hpp"
#include "mind/predictor.hpp"

using namespace mind;
using nlohmann::json;

namespace {

// First step at which `path` has advanced past arc length `s_conflict` of
// `route`; -1 when it never does within the horizon.
int first_reach(const std::vector<Vec2>& path, const Polyline& route, double s_conflict) {
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (route.project(path[t]).s >= s_conflict) return static_cast<int>(t);
  }
  return -1;
}

void check_prediction_invariants(const gmm::ScenePrediction& pred) {
  CHECK(pred.total_weight() == doctest::Approx(1.0).epsilon(1e-9));
  for (const auto& sc : pred.scenarios) {
    for (std::size_t e = 0; e < sc.entity_count(); ++e) {
      double prev = 0.0;
      for (const auto& node : sc.nodes) {
        const double tr = node.entities[e].cov.trace();
        CHECK(tr >= prev - 1e-12);
        prev = tr;
      }
    }
  }
}

// Two agents whose two routes each cross both routes of the other.
world::ScenarioFile crossing_pair() {
  const json lanes = json::array({
      test::lane("a0", {{-40, 0}, {-10, 0}}, {"a1", "a2"}),
      test::lane("a1", {{-10, 0}, {60, 0}}),
      test::lane("a2", {{-10, 0}, {60, 8}}),
      test::lane("b0", {{0, -40}, {0, -10}}, {"b1", "b2"}),
      test::lane("b1", {{0, -10}, {0, 60}}),
      test::lane("b2", {{0, -10}, {8, 60}}),
      test::lane("e0", {{-100, -60}, {100, -60}}),
  });
  const json agents = json::array({test::entity("ego", "ego", -80, -60, 0, 5),
                                   test::entity("a", "agent", -30, 0, 0, 8),
                                   test::entity("b", "agent", 0, -30, 1.5707963267948966, 8)});
  return world::parse_scenario(test::scenario_json(lanes, agents, json::array({"e0"})));
}

}  // namespace

TEST_CASE("lone follower on a straight lane has one modality") {
  const auto s = test::load_fixture("straight_road.json");
  predict::PredictorConfig cfg;
  const auto pred = predict::predict_scene(s.history, s.map, s.ego_route, cfg);
  CHECK(pred.scenarios.size() == static_cast<std::size_t>(cfg.modes_k));
  check_prediction_invariants(pred);
  std::set<aime::InteractionModality> mods;
  for (const auto& sc : pred.scenarios) mods.insert(aime::modality(sc, std::numbers::pi));
  CHECK(mods.size() == 1);
}

TEST_CASE("T-intersection prediction has several interaction modalities") {
  const auto s = test::load_fixture("t_intersection.json");
  predict::PredictorConfig cfg;
  const auto pred = predict::predict_scene(s.history, s.map, s.ego_route, cfg);
  REQUIRE(pred.scenarios.size() == 6);
  check_prediction_invariants(pred);
  // Conflict point of the ego's left turn and the oncoming straight route.
  const Polyline ego_route = world::route_polyline(s.map, s.ego_route);
  const Polyline agent_route = world::route_polyline(s.map, {{"eb_in", "eb_straight", "eb_out"}});
  const auto conflict = first_crossing(ego_route, agent_route);
  REQUIRE(conflict);
  std::set<aime::InteractionModality> mods;
  std::set<std::string> orders;
  for (const auto& sc : pred.scenarios) {
    mods.insert(aime::modality(sc, std::numbers::pi));
    if (sc.label.find("eb_straight") == std::string::npos) continue;
    const int te = first_reach(sc.mean_path(0), ego_route, conflict->s_a);
    const int ta = first_reach(sc.mean_path(1), agent_route, conflict->s_b);
    if (te >= 0 && (ta < 0 || te < ta)) orders.insert("ego first");
    if (ta >= 0 && (te < 0 || ta < te)) orders.insert("agent first");
  }
  CHECK(orders.size() == 2);
  CHECK(mods.size() >= 2);
}

TEST_CASE("commanded ego stays near its route") {
  const auto s = test::load_fixture("t_intersection.json");
  predict::PredictorConfig cfg;
  const auto pred = predict::predict_scene(s.history, s.map, s.ego_route, cfg);
  const Polyline route = world::route_polyline(s.map, s.ego_route);
  for (const auto& sc : pred.scenarios) {
    for (const auto& p : sc.mean_path(0)) CHECK(std::abs(route.project(p).lateral) <= 3.0);
  }
}

TEST_CASE("prediction is deterministic") {
  const auto s = test::load_fixture("intersection_4way.json");
  predict::PredictorConfig cfg;
  const auto a = predict::predict_scene(s.history, s.map, s.ego_route, cfg);
  const auto b = predict::predict_scene(s.history, s.map, s.ego_route, cfg);
  REQUIRE(a.scenarios.size() == b.scenarios.size());
  for (std::size_t k = 0; k < a.scenarios.size(); ++k) {
    CHECK(a.scenarios[k].weight == b.scenarios[k].weight);
    CHECK(a.scenarios[k].label == b.scenarios[k].label);
    for (std::size_t t = 0; t < a.scenarios[k].length(); ++t) {
      for (std::size_t e = 0; e < a.scenarios[k].entity_count(); ++e) {
        CHECK(a.scenarios[k].nodes[t].entities[e].mean == b.scenarios[k].nodes[t].entities[e].mean);
        CHECK(a.scenarios[k].nodes[t].entities[e].cov == b.scenarios[k].nodes[t].entities[e].cov);
      }
    }
  }
}

TEST_CASE("one agent with one route and three modes gives three hypotheses") {
  const auto s = test::load_fixture("straight_road.json");
  predict::PredictorConfig cfg;
  const auto hyps = predict::enumerate_intentions(s.history, s.map, cfg);
  CHECK(hyps.size() == 3);
  double total = 0.0;
  for (const auto& h : hyps) total += h.prior;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("mutually exclusive asserts remove four of sixteen hypotheses") {
  const auto s = crossing_pair();
  predict::PredictorConfig cfg;
  cfg.modes = {predict::LongitudinalMode::kYield, predict::LongitudinalMode::kAssert};
  cfg.modes_k = 100;
  const auto hyps = predict::enumerate_intentions(s.history, s.map, cfg);
  // Brute force: every route pair crosses, so exactly the assert/assert
  // combinations are inconsistent.
  int expected = 0;
  for (int ra = 0; ra < 2; ++ra)
    for (int ma = 0; ma < 2; ++ma)
      for (int rb = 0; rb < 2; ++rb)
        for (int mb = 0; mb < 2; ++mb) expected += !(ma == 1 && mb == 1);
  CHECK(expected == 12);
  CHECK(hyps.size() == 12);
  for (const auto& h : hyps) {
    CHECK_FALSE((h.agents[0].mode == predict::LongitudinalMode::kAssert &&
                 h.agents[1].mode == predict::LongitudinalMode::kAssert));
  }
}

TEST_CASE("no agents gives a single hypothesis") {
  const auto s = test::load_fixture("empty_road.json");
  predict::PredictorConfig cfg;
  const auto hyps = predict::enumerate_intentions(s.history, s.map, cfg);
  REQUIRE(hyps.size() == 1);
  CHECK(hyps[0].agents.empty());
  const auto pred = predict::predict_scene(s.history, s.map, s.ego_route, cfg);
  check_prediction_invariants(pred);
}

TEST_CASE("hypotheses are truncated to K by prior") {
  const auto s = crossing_pair();
  predict::PredictorConfig cfg;
  cfg.modes_k = 5;
  const auto hyps = predict::enumerate_intentions(s.history, s.map, cfg);
  CHECK(hyps.size() == 5);
}

TEST_CASE("command changes only the ego when agents do not interact with it") {
  const auto base = test::load_fixture("intersection_4way.json");
  json j = world::to_json(base);
  // Agent leaving the junction eastbound, far from every ego route.
  j["history"]["agents"][1] = test::entity("north_car", "agent", 90, -2, 0, 8);
  j["policies"] = json::array();
  const auto s = world::parse_scenario(j);
  predict::PredictorConfig cfg;
  const world::RouteCommand left{{"S_in", "S_left", "W_out"}};
  const world::RouteCommand straight{{"S_in", "S_straight", "N_out"}};
  const auto a = predict::predict_scene(s.history, s.map, left, cfg);
  const auto b = predict::predict_scene(s.history, s.map, straight, cfg);
  REQUIRE(a.scenarios.size() == b.scenarios.size());
  bool ego_differs = false;
  for (std::size_t k = 0; k < a.scenarios.size(); ++k) {
    for (std::size_t t = 0; t < a.scenarios[k].length(); ++t) {
      const auto& na = a.scenarios[k].nodes[t];
      const auto& nb = b.scenarios[k].nodes[t];
      ego_differs = ego_differs || (na.entities[0].mean - nb.entities[0].mean).norm() > 1e-6;
      CHECK(na.entities[1].mean == nb.entities[1].mean);
      CHECK(na.entities[1].cov == nb.entities[1].cov);
    }
  }
  CHECK(ego_differs);
}

TEST_CASE("agent intentions kept do not depend on the ego route") {
  predict::PredictorConfig cfg;
  for (const std::string name : {"t_intersection.json", "intersection_4way.json", "merge.json",
                                 "adversarial_intersection.json"}) {
    CAPTURE(name);
    const auto s = test::load_fixture(name);
    const auto& ego = s.history.ego().states.back();
    const auto routes = world::candidate_routes(s.map, ego.position(), ego.theta);
    std::optional<std::set<std::string>> first;
    for (const auto& r : routes) {
      std::set<std::string> agents;
      for (const auto& sc : predict::predict_scene(s.history, s.map, r, cfg).scenarios) {
        agents.insert(sc.label.substr(sc.label.find('|') + 1));
      }
      if (!first) first = agents;
      CHECK(agents == *first);
    }
  }
}

TEST_CASE("config validation") {
  predict::PredictorConfig cfg;
  cfg.modes_k = 0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.sigma_a = -1;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("constant-velocity predictor emits one scenario") {
  const auto s = test::load_fixture("t_intersection.json");
  predict::PredictorConfig cfg;
  const auto pred = predict::ConstantVelocityPredictor(cfg).predict(s.history, s.map, s.ego_route, 60);
  REQUIRE(pred.scenarios.size() == 1);
  CHECK(pred.scenarios[0].weight == doctest::Approx(1.0));
  const auto agent = pred.scenarios[0].mean_path(1);
  CHECK(agent.back().y() == doctest::Approx(-2.0));
  CHECK(agent.back().x() == doctest::Approx(-40.0 + 8.0 * 6.0).epsilon(1e-6));
}
