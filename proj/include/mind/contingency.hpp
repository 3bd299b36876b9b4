#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "mind/aime.hpp"
#include "mind/geometry.hpp"
#include "mind/gmm.hpp"

namespace mind::contingency {

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;

  Vec2 position() const { return {x, y}; }
};

struct Control {
  double a = 0.0;      // m/s^2
  double kappa = 0.0;  // 1/m
};

/// Explicit-Euler kinematic bicycle.
VehicleState bicycle_step(const VehicleState& s, const Control& u, double dt);

struct PlannerConfig {
  double dt = 0.1;
  double target_speed = 8.0;

  // Safety: squared hinge on lateral offset beyond the corridor margin.
  double w_safe = 50.0;
  double corridor_margin = 0.8;  // m

  // Target tracking.
  double w_speed = 1.0;
  double w_lateral = 1.0;

  // Kinematic limits (squared-hinge penalties, then clamped).
  double w_kin = 100.0;
  double v_min = 0.0;
  double v_max = 20.0;
  double a_min = -6.0;
  double a_max = 3.0;
  double kappa_max = 0.3;
  double lat_acc_max = 3.0;

  // Comfort.
  double w_acc = 0.2;
  double w_kappa = 5.0;
  double w_jerk = 10.0;   // (a - a_prev)^2
  double w_dkappa = 50.0;  // (kappa - kappa_prev)^2

  // Decision: gamma * squared Mahalanobis distance to the ego decision.
  double gamma = 0.1;
  double decision_cov_floor = 1.0;  // m^2 added to the decision covariance

  // Collision: quadratic hinge below the chance-constraint radius.
  double p = 0.05;
  double w_col = 1000.0;
  double footprint_radius = 2.0;  // sum of ego and agent disc radii, m

  // Solver.
  int max_iterations = 50;
  double tolerance = 1e-6;  // relative cost decrease
  double reg_init = 1e-3;
  double reg_min = 1e-6;
  double reg_max = 1e10;

  // Post-hoc chance check.
  std::size_t chance_samples = 10000;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// Everything a stage cost needs at one step of one segment.
struct StepContext {
  gmm::Gaussian2 decision;               // ego decision
  std::vector<gmm::Gaussian2> agents;    // agent predictions
  /// Multiplies w_col. make_problem sets 1 / segment weight so every branch
  /// carries the full collision penalty after probability weighting.
  double collision_scale = 1.0;
};

struct CostBreakdown {
  double safe = 0.0;
  double target = 0.0;
  double kin = 0.0;
  double comfort = 0.0;
  double decision = 0.0;
  double collision = 0.0;

  double total() const { return safe + target + kin + comfort + decision + collision; }
  CostBreakdown& operator+=(const CostBreakdown& o);
  CostBreakdown scaled(double w) const;
};

/// Stage-cost variables z = (x, y, theta, v, a, kappa, a_prev, kappa_prev).
using StageVector = Eigen::Matrix<double, 8, 1>;
using StageMatrix = Eigen::Matrix<double, 8, 8>;

struct StageCost {
  CostBreakdown terms;
  StageVector gradient = StageVector::Zero();
  StageMatrix hessian = StageMatrix::Zero();
  /// Positive semi-definite part of the Hessian (curvature of the distance
  /// maps dropped), used by the solver.
  StageMatrix hessian_gn = StageMatrix::Zero();

  double value() const { return terms.total(); }
};

/// Cost of being at `x` after applying `u` (previous control `u_prev`).
StageCost stage_cost(const VehicleState& x, const Control& u, const Control& u_prev,
                     const StepContext& ctx, const std::optional<Polyline>& route,
                     const PlannerConfig& cfg);

/// Footprint-inflated covariance used for the collision distance.
Mat2 collision_covariance(const Mat2& agent_cov, double radius, double d_bound);

/// Sum over agents of w_col * max(D_bnd - D, 0)^2.
double collision_cost(const Vec2& ego, const std::vector<gmm::Gaussian2>& agents,
                      const PlannerConfig& cfg);

/// One node of a policy sub-tree, ready for optimization.
struct SegmentSpec {
  int parent = -1;           // index into PlanProblem::segments, -1 for the first
  int scenario_node = -1;    // node id in the scenario tree
  double weight = 1.0;       // probability of this segment within the policy
  double mass = 1.0;         // probability of this segment in the whole tree
  int start_step = 0;        // absolute step before the first control
  std::vector<StepContext> steps;
};

struct PlanProblem {
  VehicleState x0;
  Control u_prev;
  std::optional<Polyline> route;
  std::vector<SegmentSpec> segments;  // parents precede children
};

PlanProblem make_problem(const aime::ScenarioTree& tree, const aime::Policy& policy,
                         const VehicleState& x0, const Control& u_prev,
                         const std::optional<Polyline>& route);

struct Segment {
  int parent = -1;
  int scenario_node = -1;
  double weight = 1.0;
  double mass = 1.0;
  int start_step = 0;
  std::vector<VehicleState> states;  // states[k] results from controls[k]
  std::vector<Control> controls;
  std::vector<StepContext> context;
};

enum class SolveStatus { kConverged, kIterationCap, kDiverged };

struct TrajectoryTree {
  VehicleState root;
  Control u_prev;
  std::vector<Segment> segments;
  CostBreakdown cost;  // probability-weighted
  SolveStatus status = SolveStatus::kConverged;
  int iterations = 0;
  std::vector<double> cost_history;  // accepted iterations, starting with the initial guess
  double continuity_residual = 0.0;

  /// State before segment j's first control.
  VehicleState start_state(std::size_t j) const;
  /// Max over segments of |first state - f(start state, first control)|.
  double max_continuity_residual(double dt) const;
};

/// Tree-structured iLQR over the problem's segments.
TrajectoryTree ilqr_solve_tree(const PlanProblem& problem, const PlannerConfig& cfg);

/// Total weighted cost of a given set of controls (rolled out from x0).
double evaluate_controls(const PlanProblem& problem, const std::vector<std::vector<Control>>& controls,
                         const PlannerConfig& cfg);

struct ChanceResult {
  bool pass = true;
  double max_violation = 0.0;  // largest per-step estimate
  double threshold = 0.0;      // p + 3 sigma
};

/// Monte Carlo disc-overlap check of every (segment, step).
ChanceResult check_chance(const TrajectoryTree& tree, double p, std::size_t n_samples,
                          std::uint64_t seed, double radius);

nlohmann::json to_json(const TrajectoryTree& tree);
nlohmann::json to_json(const CostBreakdown& c);
std::string to_string(SolveStatus s);

}  // namespace mind::contingency
