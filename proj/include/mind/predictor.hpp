#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mind/gmm.hpp"
#include "mind/world.hpp"

namespace mind::predict {

enum class LongitudinalMode { kYield, kMaintain, kAssert };

std::string to_string(LongitudinalMode m);

struct EntityIntention {
  world::RouteCommand route;
  LongitudinalMode mode = LongitudinalMode::kMaintain;
  bool operator==(const EntityIntention&) const = default;
};

/// Agent intentions in entity order (agents sorted by id, ego excluded).
struct IntentionHypothesis {
  std::vector<EntityIntention> agents;
  double prior = 1.0;
};

struct PredictorConfig {
  int modes_k = 6;
  int horizon = 60;
  double dt = 0.1;
  /// Per-axis acceleration noise; the action (velocity) std grows as sigma_a * elapsed.
  double sigma_a = 0.4;
  std::vector<LongitudinalMode> modes{LongitudinalMode::kYield, LongitudinalMode::kMaintain,
                                      LongitudinalMode::kAssert};
  double yield_decel = 2.0;
  double assert_accel = 1.5;
  double assert_penalty = 0.6;
  /// Ego responses kept per agent hypothesis; ceil(K / ego_responses) agent
  /// hypotheses are kept, ranked without the ego.
  int ego_responses = 2;
  double max_decel = 6.0;

  // Car following on a shared path.
  double idm_accel = 1.5;
  double idm_comfort_decel = 2.0;
  double idm_time_headway = 1.5;
  double idm_min_gap = 2.0;
  double vehicle_length = 4.5;

  /// Time scale (s) of the arrival-order likelihood on yield/assert modes.
  double arrival_time_scale = 1.5;

  double stop_buffer = 6.0;   // stop this far (centre) before a conflict point
  double clear_margin = 5.0;  // a conflict is cleared this far past the point
  double route_length = 80.0;

  /// Velocity std (m/s) added when another entity's mean is close; the
  /// proximity weight is exp(-(d / interaction_range)^2).
  double interaction_sigma = 8.0;
  double interaction_range = 24.0;

  /// Entities with no lane nearby: throw (false) or extrapolate straight (true).
  bool straight_fallback = false;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// Pluggable scene predictor; AIME and planning only see this interface.
class ScenePredictor {
 public:
  virtual ~ScenePredictor() = default;
  /// Returns weighted joint futures for steps 1..horizon, ego first.
  virtual gmm::ScenePrediction predict(const world::ObservationHistory& obs,
                                       const world::LaneGraph& map,
                                       const std::optional<world::RouteCommand>& command,
                                       int horizon) const = 0;
};

/// Analytic intention-mixture predictor: enumerates route x longitudinal-mode
/// hypotheses, rolls each out jointly and propagates positional Gaussians.
class IntentionPredictor final : public ScenePredictor {
 public:
  explicit IntentionPredictor(PredictorConfig cfg);

  gmm::ScenePrediction predict(const world::ObservationHistory& obs, const world::LaneGraph& map,
                               const std::optional<world::RouteCommand>& command,
                               int horizon) const override;

  const PredictorConfig& config() const { return cfg_; }

 private:
  PredictorConfig cfg_;
};

/// Single-mode baseline: agents keep velocity and heading, the ego follows its
/// route at its current speed.
class ConstantVelocityPredictor final : public ScenePredictor {
 public:
  explicit ConstantVelocityPredictor(PredictorConfig cfg);

  gmm::ScenePrediction predict(const world::ObservationHistory& obs, const world::LaneGraph& map,
                               const std::optional<world::RouteCommand>& command,
                               int horizon) const override;

 private:
  PredictorConfig cfg_;
};

gmm::ScenePrediction predict_scene(const world::ObservationHistory& obs,
                                   const world::LaneGraph& map,
                                   const std::optional<world::RouteCommand>& command,
                                   const PredictorConfig& cfg);

/// Agent route x mode products, consistency-filtered, ranked by prior and
/// truncated to cfg.modes_k. Priors are normalized over the returned list.
std::vector<IntentionHypothesis> enumerate_intentions(const world::ObservationHistory& obs,
                                                      const world::LaneGraph& map,
                                                      const PredictorConfig& cfg);

}  // namespace mind::predict
