#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"

#include "mind/aime.hpp"
#include "mind/contingency.hpp"
#include "mind/predictor.hpp"
#include "mind/world.hpp"

namespace mind::policy {

struct RewardWeights {
  double eta = 1.0;  // lambda_p = probability^eta
  double lambda_safety = 1.0;
  double lambda_efficiency = 1.0;
  double lambda_comfort = 1.0;
  double target_speed = 8.0;  // m/s
  double a_max = 3.0;         // m/s^2
  double ay_max = 3.0;        // m/s^2
  double safety_saturation = 6.0;  // Mahalanobis distance of maximal safety

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

struct RewardTerms {
  double safety = 0.0;      // lambda_p * lambda_1 * F_s
  double efficiency = 0.0;  // lambda_p * lambda_2 * F_e
  double comfort = 0.0;     // lambda_p * lambda_3 * F_c

  double total() const { return safety + efficiency + comfort; }
  RewardTerms& operator+=(const RewardTerms& o);
};

/// F_s in [0, 1]: min Mahalanobis distance to the agents over the saturation.
double safety_factor(const Vec2& ego, const std::vector<gmm::Gaussian2>& agents,
                     double saturation);
double efficiency_factor(double v, double target_speed);
double comfort_factor(double v, const contingency::Control& u, double a_max, double ay_max);

RewardTerms reward_terms(const contingency::VehicleState& x, const contingency::Control& u,
                         const std::vector<gmm::Gaussian2>& agents, double probability,
                         const RewardWeights& w);
double reward(const contingency::VehicleState& x, const contingency::Control& u,
              const std::vector<gmm::Gaussian2>& agents, double probability,
              const RewardWeights& w);

/// Q summed over every (segment, step); the probability of a segment is its
/// mass in the whole scenario tree.
RewardTerms evaluate_terms(const contingency::TrajectoryTree& tree, const RewardWeights& w);
double evaluate(const contingency::TrajectoryTree& tree, const RewardWeights& w);

struct Candidate {
  int policy_id = 0;  // root child node id
  double mass = 0.0;
  double q = 0.0;
  RewardTerms terms;
  bool feasible = true;
  double violation = 0.0;  // estimated chance violation
};

struct Selection {
  std::size_t index = 0;
  bool degraded = false;  // no feasible candidate
};

/// Throws std::invalid_argument on an empty list.
Selection select(const std::vector<Candidate>& candidates);

nlohmann::json report_json(const std::vector<Candidate>& candidates, const Selection& selection);

struct PlanSettings {
  aime::AimeConfig aime;
  aime::BuildOptions build;
  contingency::PlannerConfig planner;
  RewardWeights reward;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct PlanResult {
  aime::ScenarioTree tree;
  std::vector<aime::Policy> policies;
  std::vector<contingency::TrajectoryTree> plans;
  std::vector<contingency::ChanceResult> chance;
  std::vector<Candidate> candidates;
  Selection selection;

  const contingency::TrajectoryTree& selected() const { return plans[selection.index]; }
};

/// Builds the scenario tree, solves one trajectory tree per policy, checks
/// chance constraints and selects. Without a command the ego's first
/// candidate route is tracked.
PlanResult plan(const world::ObservationHistory& obs, const world::LaneGraph& map,
                const std::optional<world::RouteCommand>& command,
                const predict::ScenePredictor& predictor, const contingency::Control& u_prev,
                const PlanSettings& settings);

}  // namespace mind::policy
