#include <cmath>

#include "doctest.h"

#include "helpers.hpp"
#include "mind/errors.hpp"
#include "mind/sim.hpp"

using namespace mind;
using nlohmann::json;

namespace {

json long_road() { return json::array({test::lane("road", {{0, 0}, {1000, 0}}, json::array(), 20.0)}); }

sim::SimOptions none_options() {
  sim::SimOptions o;
  o.planner = sim::PlannerVariant::kNone;
  return o;
}

double entity_value(const json& record, const std::string& id, const char* key) {
  for (const auto& e : record["entities"]) {
    if (e["id"] == id) return e[key].get<double>();
  }
  FAIL("missing entity " << id);
  return 0.0;
}

}  // namespace

TEST_CASE("scripted ego with +1 then -1 acceleration") {
  const auto s = test::load_fixture("playback.json");
  const auto ep = sim::run_episode(s, none_options(), 0);
  CHECK(ep.metrics.rms_acc == doctest::Approx(1.0));
  CHECK(ep.metrics.max_abs_acc == doctest::Approx(1.0));
  CHECK(ep.metrics.steps == 40);
  CHECK_FALSE(ep.metrics.collision);
  // Mean speed of the scripted profile, computed directly.
  double v = 5.0, sum = 0.0;
  for (int k = 0; k < 40; ++k) {
    v += 0.1 * (k < 20 ? 1.0 : -1.0);
    sum += v;
  }
  CHECK(ep.metrics.avg_speed == doctest::Approx(sum / 40));
}

TEST_CASE("playback entities follow their scripts exactly") {
  json traj = json::array();
  for (int k = 0; k <= 30; ++k) traj.push_back({100.0 + 0.7 * k, 0.01 * k * k, 0.02 * k, 7.0});
  const auto s = world::parse_scenario(test::scenario_json(
      long_road(),
      json::array({test::entity("ego", "ego", 10, 0, 0, 0), test::entity("p", "agent", 100, 0, 0, 7)}),
      json::array({"road"}),
      json::array({{{"agent_id", "p"}, {"kind", "playback"}, {"params", {{"trajectory", traj}}}}}), 30));
  const auto ep = sim::run_episode(s, none_options(), 0);
  REQUIRE(ep.log.records.size() == 30);
  for (int k = 0; k < 30; ++k) {
    const auto& r = ep.log.records[k];
    CHECK(entity_value(r, "p", "x") == traj[k + 1][0].get<double>());
    CHECK(entity_value(r, "p", "y") == traj[k + 1][1].get<double>());
    CHECK(entity_value(r, "p", "theta") == traj[k + 1][2].get<double>());
  }
}

TEST_CASE("constant-speed scripted ego") {
  const auto s = world::parse_scenario(test::scenario_json(
      long_road(), json::array({test::entity("ego", "ego", 10, 0, 0, 5)}), json::array({"road"}),
      json::array({{{"agent_id", "ego"}, {"kind", "lane-follow"}, {"params", {{"target_speed", 5.0}}}}}), 50));
  const auto ep = sim::run_episode(s, none_options(), 0);
  CHECK(ep.metrics.avg_speed == doctest::Approx(5.0));
  CHECK(ep.metrics.max_abs_acc == 0.0);
  CHECK(ep.metrics.rms_acc == 0.0);
  CHECK(ep.log.termination == "horizon");
}

TEST_CASE("collision fixture terminates early with the planner disabled") {
  const auto s = test::load_fixture("collision.json");
  const auto ep = sim::run_episode(s, none_options(), 0);
  CHECK(ep.metrics.collision);
  CHECK(ep.log.termination == "collision");
  CHECK(ep.metrics.steps < s.sim.horizon_steps);
}

TEST_CASE("adversarial trigger fires exactly at step 30") {
  const auto s = world::parse_scenario(test::scenario_json(
      long_road(),
      json::array({test::entity("ego", "ego", 10, 0, 0, 5), test::entity("car", "agent", 300, 0, 0, 6)}),
      json::array({"road"}),
      json::array({{{"agent_id", "car"},
                    {"kind", "adversarial-trigger"},
                    {"params",
                     {{"target_speed", 6.0}, {"trigger_time", 3.0}, {"action", "accelerate"},
                      {"accel", 2.0}, {"duration", 2.0}}}}}),
      40));
  const auto ep = sim::run_episode(s, none_options(), 0);
  REQUIRE(ep.log.records.size() == 40);
  double prev = 6.0;
  for (int k = 0; k < 40; ++k) {
    const double v = entity_value(ep.log.records[k], "car", "v");
    const double acc = (v - prev) / 0.1;
    CAPTURE(k);
    if (k < 30) CHECK(acc == doctest::Approx(0.0));
    else CHECK(acc == doctest::Approx(2.0));
    prev = v;
  }
}

TEST_CASE("episodes are deterministic and the log reproduces the metrics") {
  auto s = test::load_fixture("adversarial_intersection.json");
  sim::SimOptions o;
  o.horizon_steps = 25;
  const auto a = sim::run_episode(s, o, 3);
  const auto b = sim::run_episode(s, o, 3);
  CHECK(a.log.to_jsonl() == b.log.to_jsonl());
  const auto m = sim::metrics_from_log(a.log);
  CHECK(m.avg_speed == a.metrics.avg_speed);
  CHECK(m.max_abs_acc == a.metrics.max_abs_acc);
  CHECK(m.rms_acc == a.metrics.rms_acc);
  CHECK(m.collision == a.metrics.collision);
  CHECK(m.goal_reached == a.metrics.goal_reached);
  CHECK(m.steps == a.metrics.steps);
  CHECK(a.metrics.rms_acc <= a.metrics.max_abs_acc);
  CHECK(a.metrics.avg_speed >= 0.0);
  for (const auto& r : a.log.records) {
    CHECK(r.contains("policy_id"));
    CHECK(r.contains("tree_hash"));
    CHECK(r["wall_ms"] == 0.0);
  }
}

TEST_CASE("seeds jitter the adversarial agent") {
  const auto s = test::load_fixture("adversarial_intersection.json");
  const auto a = sim::run_episode(s, none_options(), 1);
  const auto b = sim::run_episode(s, none_options(), 2);
  CHECK(a.log.to_jsonl() != b.log.to_jsonl());
}

TEST_CASE("log ends with the termination record") {
  const auto s = test::load_fixture("collision.json");
  const auto ep = sim::run_episode(s, none_options(), 0);
  const auto text = ep.log.to_jsonl();
  const auto last = text.substr(text.rfind('\n', text.size() - 2) + 1);
  const auto j = json::parse(last);
  CHECK(j["event"] == "end");
  CHECK(j["termination"] == "collision");
}

TEST_CASE("comparison table shapes") {
  auto s = test::load_fixture("straight_road.json");
  sim::SimOptions o;
  o.horizon_steps = 10;
  const auto one = sim::compare_planners(s, {sim::PlannerVariant::kConstantVelocity}, {4}, o);
  CHECK(one.rows.size() == 1);
  CHECK(one.means.size() == 1);
  const auto fwd = sim::compare_planners(s, {sim::PlannerVariant::kNone, sim::PlannerVariant::kConstantVelocity},
                                         {1, 2, 3}, o, 2);
  const auto rev = sim::compare_planners(s, {sim::PlannerVariant::kNone, sim::PlannerVariant::kConstantVelocity},
                                         {3, 2, 1}, o);
  REQUIRE(fwd.rows.size() == 6);
  for (const auto& r : fwd.rows) {
    bool found = false;
    for (const auto& q : rev.rows) {
      if (q.variant == r.variant && q.seed == r.seed) {
        found = true;
        CHECK(sim::to_json(q.metrics).dump() == sim::to_json(r.metrics).dump());
      }
    }
    CHECK(found);
  }
  const auto csv = fwd.to_csv();
  CHECK(csv.rfind("variant,seed,avgSpd,maxAbsAcc,rmsAcc,collision,goal\n", 0) == 0);
}

TEST_CASE("policy parameters are validated") {
  CHECK_THROWS_AS(sim::parse_policy({"a", "playback", json::object()}), SchemaError);
  CHECK_THROWS_AS(sim::parse_policy({"a", "teleport", json::object()}), SchemaError);
  CHECK_THROWS_AS(sim::parse_policy({"a", "adversarial-trigger", {{"action", "accelerate"}}}), SchemaError);
  CHECK_NOTHROW(sim::parse_policy({"a", "lane-follow", json::object()}));
  CHECK(sim::parse_variant("nn+cp") == sim::PlannerVariant::kSingleShot);
  CHECK(sim::to_string(sim::PlannerVariant::kConstantVelocity) == "MB+CP");
  CHECK_THROWS(sim::parse_variant("oracle"));
}
