#include "mind/policy.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <thread>

namespace mind::policy {

using contingency::Control;
using contingency::TrajectoryTree;
using contingency::VehicleState;
using json = nlohmann::json;

void RewardWeights::validate() const {
  if (!(lambda_safety >= 0.0 && lambda_efficiency >= 0.0 && lambda_comfort >= 0.0))
    throw std::invalid_argument("reward: lambda weights must be non-negative");
  if (!(eta >= 0.0)) throw std::invalid_argument("reward: eta must be non-negative");
  if (!(target_speed > 0.0)) throw std::invalid_argument("reward: target_speed must be positive");
  if (!(a_max > 0.0 && ay_max > 0.0)) throw std::invalid_argument("reward: a_max and ay_max must be positive");
  if (!(safety_saturation > 0.0)) throw std::invalid_argument("reward: safety_saturation must be positive");
}

RewardTerms& RewardTerms::operator+=(const RewardTerms& o) {
  safety += o.safety;
  efficiency += o.efficiency;
  comfort += o.comfort;
  return *this;
}

double safety_factor(const Vec2& ego, const std::vector<gmm::Gaussian2>& agents,
                     double saturation) {
  double d = saturation;
  for (const auto& a : agents) d = std::min(d, gmm::mahalanobis(ego, a));
  return d / saturation;
}

double efficiency_factor(double v, double target_speed) {
  return std::clamp(1.0 - std::abs(v - target_speed) / target_speed, 0.0, 1.0);
}

double comfort_factor(double v, const Control& u, double a_max, double ay_max) {
  const double lon = u.a / a_max;
  const double lat = u.kappa * v * v / ay_max;
  return std::clamp(1.0 - lon * lon - lat * lat, 0.0, 1.0);
}

RewardTerms reward_terms(const VehicleState& x, const Control& u,
                         const std::vector<gmm::Gaussian2>& agents, double probability,
                         const RewardWeights& w) {
  const double lp = std::pow(probability, w.eta);
  RewardTerms r;
  r.safety = lp * w.lambda_safety * safety_factor(x.position(), agents, w.safety_saturation);
  r.efficiency = lp * w.lambda_efficiency * efficiency_factor(x.v, w.target_speed);
  r.comfort = lp * w.lambda_comfort * comfort_factor(x.v, u, w.a_max, w.ay_max);
  return r;
}

double reward(const VehicleState& x, const Control& u, const std::vector<gmm::Gaussian2>& agents,
              double probability, const RewardWeights& w) {
  return reward_terms(x, u, agents, probability, w).total();
}

RewardTerms evaluate_terms(const TrajectoryTree& tree, const RewardWeights& w) {
  RewardTerms total;
  for (const auto& seg : tree.segments) {
    for (std::size_t k = 0; k < seg.states.size(); ++k) {
      static const std::vector<gmm::Gaussian2> kNone;
      const auto& agents = k < seg.context.size() ? seg.context[k].agents : kNone;
      total += reward_terms(seg.states[k], seg.controls[k], agents, seg.mass, w);
    }
  }
  return total;
}

double evaluate(const TrajectoryTree& tree, const RewardWeights& w) {
  return evaluate_terms(tree, w).total();
}

Selection select(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("select: no candidates");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (!c.feasible) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = candidates[*best];
    if (c.q > b.q || (c.q == b.q && c.mass > b.mass)) best = i;
  }
  if (best) return {*best, false};
  std::size_t lowest = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& b = candidates[lowest];
    if (c.violation < b.violation || (c.violation == b.violation && c.mass > b.mass)) lowest = i;
  }
  return {lowest, true};
}

json report_json(const std::vector<Candidate>& candidates, const Selection& selection) {
  json out = json::array();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    out.push_back({{"policy_id", c.policy_id},
                   {"mass", c.mass},
                   {"q", c.q},
                   {"terms",
                    {{"safety", c.terms.safety},
                     {"efficiency", c.terms.efficiency},
                     {"comfort", c.terms.comfort}}},
                   {"feasible", c.feasible},
                   {"chance_violation", c.violation},
                   {"selected", i == selection.index}});
  }
  return {{"candidates", out}, {"selected_index", selection.index}, {"degraded", selection.degraded}};
}

PlanResult plan(const world::ObservationHistory& obs, const world::LaneGraph& map,
                const std::optional<world::RouteCommand>& command,
                const predict::ScenePredictor& predictor, const Control& u_prev,
                const PlanSettings& settings) {
  const auto& ego = obs.ego().states.back();
  std::optional<world::RouteCommand> route_cmd = command;
  if (!route_cmd) {
    const auto routes = world::candidate_routes(map, ego.position(), ego.theta);
    if (!routes.empty()) route_cmd = routes.front();
  }
  std::optional<Polyline> route;
  if (route_cmd) route = world::route_polyline(map, *route_cmd);

  PlanResult r;
  r.tree = aime::build_tree(obs, map, command, predictor, settings.aime, settings.build);
  r.policies = aime::enumerate_policies(r.tree);
  const std::size_t n = r.policies.size();
  r.plans.resize(n);
  r.chance.resize(n);
  r.candidates.resize(n);

  const VehicleState x0{ego.x, ego.y, ego.theta, ego.v};
  auto solve = [&](std::size_t i) {
    const auto problem = contingency::make_problem(r.tree, r.policies[i], x0, u_prev, route);
    r.plans[i] = contingency::ilqr_solve_tree(problem, settings.planner);
    r.chance[i] = contingency::check_chance(r.plans[i], settings.planner.p,
                                            settings.planner.chance_samples, settings.seed + i,
                                            settings.planner.footprint_radius);
    Candidate& c = r.candidates[i];
    c.policy_id = r.policies[i].root_child;
    c.mass = r.policies[i].mass;
    c.terms = evaluate_terms(r.plans[i], settings.reward);
    c.q = c.terms.total();
    c.feasible = r.chance[i].pass && r.plans[i].status != contingency::SolveStatus::kDiverged;
    c.violation = r.chance[i].max_violation;
  };

  const std::size_t workers = std::min<std::size_t>(std::max(settings.jobs, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) solve(i);
  } else {
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) {
          try {
            solve(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  r.selection = select(r.candidates);
  return r;
}

}  // namespace mind::policy
