#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "helpers.hpp"
#include "mind/policy.hpp"
#include "mind/predictor.hpp"

using namespace mind;
using namespace mind::policy;
using contingency::Control;
using contingency::VehicleState;

namespace {

policy::Candidate cand(int id, double q, double mass, bool feasible = true, double violation = 0.0) {
  policy::Candidate c;
  c.policy_id = id;
  c.q = q;
  c.mass = mass;
  c.feasible = feasible;
  c.violation = violation;
  return c;
}

contingency::TrajectoryTree two_segment_tree() {
  contingency::TrajectoryTree tree;
  tree.root = {0, 0, 0, 6};
  for (int j = 0; j < 2; ++j) {
    contingency::Segment seg;
    seg.parent = j - 1;
    seg.mass = j ? 0.4 : 1.0;
    seg.weight = seg.mass;
    for (int k = 0; k < 5; ++k) {
      seg.states.push_back({1.0 * k, 0.1 * j, 0.0, 6.0 + 0.3 * k});
      seg.controls.push_back({0.5 - 0.2 * k, 0.01 * j});
      contingency::StepContext ctx;
      gmm::Gaussian2 agent;
      agent.mean = Vec2(10.0, 2.0 + j);
      agent.cov = Mat2::Identity();
      ctx.agents.push_back(agent);
      seg.context.push_back(ctx);
    }
    tree.segments.push_back(seg);
  }
  return tree;
}

}  // namespace

TEST_CASE("reward saturates at the ideal state") {
  RewardWeights w;
  w.lambda_safety = 2.0;
  w.lambda_efficiency = 0.5;
  w.lambda_comfort = 1.5;
  const VehicleState x{0, 0, 0, w.target_speed};
  gmm::Gaussian2 far;
  far.mean = Vec2(1e6, 0);
  far.cov = Mat2::Identity();
  const double p = 0.7;
  CHECK(reward(x, {}, {far}, p, w) == doctest::Approx(p * (2.0 * 1.0 + 0.5 + 1.5)));
  CHECK(reward(x, {}, {}, p, w) == doctest::Approx(p * (2.0 + 0.5 + 1.5)));
}

TEST_CASE("stopped vehicle has no efficiency") {
  CHECK(efficiency_factor(0.0, 8.0) == 0.0);
  CHECK(efficiency_factor(8.0, 8.0) == 1.0);
  CHECK(efficiency_factor(20.0, 8.0) == 0.0);
  CHECK(efficiency_factor(6.0, 8.0) == doctest::Approx(0.75));
}

TEST_CASE("reward is linear in the scenario probability") {
  RewardWeights w;
  const VehicleState x{1, 2, 0.3, 5.0};
  const Control u{0.7, 0.02};
  gmm::Gaussian2 agent;
  agent.mean = Vec2(4, 3);
  agent.cov = Mat2::Identity();
  CHECK(reward(x, u, {agent}, 0.6, w) == doctest::Approx(2.0 * reward(x, u, {agent}, 0.3, w)));
}

TEST_CASE("reward factor forms") {
  gmm::Gaussian2 agent;
  agent.cov = Mat2::Identity();
  CHECK(safety_factor(Vec2(3, 0), {agent}, 6.0) == doctest::Approx(0.5));
  CHECK(safety_factor(Vec2(30, 0), {agent}, 6.0) == 1.0);
  CHECK(comfort_factor(5.0, {1.5, 0.0}, 3.0, 3.0) == doctest::Approx(0.75));
  CHECK(comfort_factor(5.0, {0.0, 0.06}, 3.0, 3.0) == doctest::Approx(0.75));
  CHECK(comfort_factor(5.0, {3.0, 0.2}, 3.0, 3.0) == 0.0);
}

TEST_CASE("evaluation of a single-step tree is one reward") {
  contingency::TrajectoryTree tree;
  contingency::Segment seg;
  seg.mass = 0.8;
  seg.states.push_back({0, 0, 0, 7.0});
  seg.controls.push_back({0.4, 0.0});
  seg.context.emplace_back();
  tree.segments.push_back(seg);
  RewardWeights w;
  CHECK(evaluate(tree, w) == doctest::Approx(reward(seg.states[0], seg.controls[0], {}, 0.8, w)));
}

TEST_CASE("evaluation equals the hand-summed rewards and is additive") {
  const auto tree = two_segment_tree();
  RewardWeights w;
  double by_hand = 0.0;
  std::vector<double> per_segment;
  for (const auto& seg : tree.segments) {
    double s = 0.0;
    for (std::size_t k = 0; k < seg.states.size(); ++k) {
      s += reward(seg.states[k], seg.controls[k], seg.context[k].agents, seg.mass, w);
    }
    per_segment.push_back(s);
    by_hand += s;
  }
  CHECK(std::abs(evaluate(tree, w) - by_hand) < 1e-9);
  for (std::size_t j = 0; j < tree.segments.size(); ++j) {
    contingency::TrajectoryTree part;
    part.segments.push_back(tree.segments[j]);
    CHECK(std::abs(evaluate(part, w) - per_segment[j]) < 1e-9);
  }
  const auto terms = evaluate_terms(tree, w);
  CHECK(terms.total() == doctest::Approx(evaluate(tree, w)));
}

TEST_CASE("Q is monotone in each factor weight") {
  const auto tree = two_segment_tree();
  RewardWeights w;
  const double base = evaluate(tree, w);
  for (double RewardWeights::*field : {&RewardWeights::lambda_safety, &RewardWeights::lambda_efficiency,
                                       &RewardWeights::lambda_comfort}) {
    RewardWeights more = w;
    more.*field += 0.5;
    CHECK(evaluate(tree, more) >= base);
  }
}

TEST_CASE("selection examples") {
  CHECK(select({cand(3, 1.0, 1.0)}).index == 0);
  CHECK_FALSE(select({cand(3, 1.0, 1.0)}).degraded);
  // A collision penalty drags the first candidate's Q down.
  const auto colliding = cand(1, 40.0 - 35.0, 0.6);
  const auto clear = cand(2, 30.0, 0.4);
  CHECK(select({colliding, clear}).index == 1);
  std::vector<Candidate> c{cand(1, 3.0, 0.2), cand(2, 7.0, 0.3), cand(3, 5.0, 0.5)};
  const auto base = select(c).index;
  for (auto& x : c) x.q *= 12.5;
  CHECK(select(c).index == base);
}

TEST_CASE("feasible candidates beat infeasible ones") {
  CHECK(select({cand(1, 100.0, 0.9, false, 0.2), cand(2, 1.0, 0.1)}).index == 1);
}

TEST_CASE("ties go to higher mass, then lower index") {
  CHECK(select({cand(1, 5.0, 0.3), cand(2, 5.0, 0.7)}).index == 1);
  CHECK(select({cand(1, 5.0, 0.5), cand(2, 5.0, 0.5)}).index == 0);
}

TEST_CASE("no feasible candidate degrades to the lowest violation") {
  const auto s = select({cand(1, 9.0, 0.5, false, 0.3), cand(2, 1.0, 0.5, false, 0.1),
                         cand(3, 5.0, 0.5, false, 0.2)});
  CHECK(s.index == 1);
  CHECK(s.degraded);
  CHECK_THROWS(select({}));
}

TEST_CASE("selection is invariant to candidate order") {
  std::vector<Candidate> c{cand(1, 3.0, 0.2), cand(2, 7.0, 0.3, false, 0.1), cand(3, 5.0, 0.5),
                           cand(4, 5.0, 0.1)};
  const int best = c[select(c).index].policy_id;
  std::sort(c.begin(), c.end(), [](const auto& a, const auto& b) { return a.policy_id > b.policy_id; });
  CHECK(c[select(c).index].policy_id == best);
  CHECK(best == 3);
}

TEST_CASE("report fields") {
  const std::vector<Candidate> c{cand(1, 3.0, 0.4), cand(2, 7.0, 0.6)};
  const auto j = report_json(c, select(c));
  REQUIRE(j["candidates"].size() == 2);
  for (const auto& x : j["candidates"]) {
    for (const char* key : {"policy_id", "q", "terms", "feasible", "selected"}) CHECK(x.contains(key));
  }
  CHECK(j["candidates"][1]["selected"] == true);
  CHECK(j["selected_index"] == 1);
}

TEST_CASE("empty road plan reaches the target speed within 3 s") {
  const auto s = test::load_fixture("empty_road.json");
  const predict::IntentionPredictor predictor({});
  const PlanSettings settings;
  const auto result = plan(s.history, s.map, s.ego_route, predictor, {}, settings);
  const auto& best = result.selected();
  CHECK(best.cost.collision == 0.0);
  const double vt = settings.planner.target_speed;
  int reached = -1;
  const auto& states = best.segments[0].states;
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (std::abs(states[k].v - vt) <= 0.05 * vt) {
      reached = static_cast<int>(k) + 1;
      break;
    }
  }
  CHECK(reached > 0);
  CHECK(reached <= 30);
}

TEST_CASE("one candidate per root child and deterministic plans") {
  const auto s = test::load_fixture("intersection_4way.json");
  const predict::IntentionPredictor predictor({});
  PlanSettings settings;
  const auto a = plan(s.history, s.map, s.ego_route, predictor, {}, settings);
  CHECK(a.candidates.size() == a.tree.root().children.size());
  settings.jobs = 3;
  const auto b = plan(s.history, s.map, s.ego_route, predictor, {}, settings);
  CHECK(contingency::to_json(a.selected()).dump() == contingency::to_json(b.selected()).dump());
  CHECK(report_json(a.candidates, a.selection).dump() == report_json(b.candidates, b.selection).dump());
}
