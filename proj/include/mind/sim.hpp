#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mind/contingency.hpp"
#include "mind/policy.hpp"
#include "mind/predictor.hpp"
#include "mind/world.hpp"

namespace mind::sim {

enum class PlannerVariant {
  kMind,              // AIME scenario tree over the intention predictor
  kSingleShot,        // NN+CP: one prediction, no tree
  kConstantVelocity,  // MB+CP: constant-velocity predictor, no tree
  kNone,              // ego follows its scripted policy
};

std::string to_string(PlannerVariant v);
/// Accepts mind, nn+cp|single-shot, mb+cp|constant-velocity, none.
PlannerVariant parse_variant(const std::string& s);

struct SimOptions {
  PlannerVariant planner = PlannerVariant::kMind;
  predict::PredictorConfig predictor;
  policy::PlanSettings plan;
  double disc_radius = 1.0;     // m, every entity
  double goal_tolerance = 5.0;  // m before the end of the ego route
  std::size_t chance_samples = 2000;  // per planner chance check, replaces the planner's
  std::optional<int> horizon_steps;  // overrides the scenario's sim horizon
  bool record_timing = false;        // wall_ms stays 0 unless set

  void validate() const;
};

enum class AgentKind { kPlayback, kLaneFollow, kAdversarialTrigger };

enum class TriggerAction { kAccelerate, kBrake, kSwitchRoute };

/// Scripted behavior of one entity; params parsed from the scenario.
struct AgentPolicy {
  AgentKind kind = AgentKind::kLaneFollow;
  std::vector<world::EntityState> trajectory;  // playback, one state per step from step 0
  std::optional<world::RouteCommand> route;
  std::optional<double> target_speed;  // defaults to the initial speed
  // Adversarial trigger.
  std::optional<double> trigger_time;      // s
  std::optional<double> trigger_distance;  // m to the ego
  TriggerAction action = TriggerAction::kAccelerate;
  double accel = 2.0;     // m/s^2 magnitude
  double duration = 2.0;  // s
  std::optional<world::RouteCommand> new_route;
  // Per-seed jitter ranges.
  double jitter_trigger_time = 0.0;  // +- s
  double jitter_speed = 0.0;         // +- fraction of the target speed
};

/// Throws world::SchemaError when params are incomplete for the kind.
AgentPolicy parse_policy(const world::PolicySpec& spec);

struct Metrics {
  double avg_speed = 0.0;
  double max_abs_acc = 0.0;
  double rms_acc = 0.0;
  bool collision = false;
  bool goal_reached = false;
  int steps = 0;
};

struct EpisodeLog {
  std::vector<nlohmann::json> records;  // one per step
  std::string termination;              // horizon | collision | goal

  /// One compact JSON object per line, then an end record.
  std::string to_jsonl() const;
};

struct Episode {
  EpisodeLog log;
  Metrics metrics;
};

Episode run_episode(const world::ScenarioFile& scenario, const SimOptions& options,
                    std::uint64_t seed);

/// Recomputes the metrics from the log's ego states and controls.
Metrics metrics_from_log(const EpisodeLog& log);

nlohmann::json to_json(const Metrics& m);

struct ComparisonRow {
  PlannerVariant variant = PlannerVariant::kMind;
  std::uint64_t seed = 0;
  Metrics metrics;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;  // variant-major, seeds in the given order
  struct Summary {
    PlannerVariant variant;
    double avg_speed = 0.0;
    double max_abs_acc = 0.0;
    double rms_acc = 0.0;
    int collisions = 0;
    int goals = 0;
  };
  std::vector<Summary> means;  // one per variant

  std::string to_csv() const;
};

/// Runs every variant on every seed; episodes run on up to `jobs` threads.
ComparisonTable compare_planners(const world::ScenarioFile& scenario,
                                 const std::vector<PlannerVariant>& variants,
                                 const std::vector<std::uint64_t>& seeds,
                                 const SimOptions& options, int jobs = 1);

}  // namespace mind::sim
