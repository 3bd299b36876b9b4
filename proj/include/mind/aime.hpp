#pragma once

#include <cstddef>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "mind/gmm.hpp"
#include "mind/predictor.hpp"
#include "mind/world.hpp"

namespace mind::aime {

/// Homotopy class of the ego against each agent, agents in id order.
using InteractionModality = std::vector<int>;

struct AimeConfig {
  double beta = 0.15;           // uncertainty-rate tolerance, m/step
  double delta = std::numbers::pi;  // homotopy quantization, rad
  int d_max = 3;
  double alpha_min = 0.05;
  double route_dev_max = 3.0;   // m
  int t_min = 5;                // steps
  int horizon = 60;             // steps

  void validate() const;
};

enum class Strategy { kSingleShot, kAime, kBruteForce };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

struct BuildOptions {
  Strategy strategy = Strategy::kAime;
  int bf_levels = 5;
  std::size_t node_budget = 100000;
};

struct TreeNode {
  int id = 0;
  int parent = -1;
  std::vector<int> children;
  int depth = 0;
  int entry_step = 0;  // absolute step the segment starts after
  int end_step = 0;    // absolute step of the branch point, or the horizon
  bool is_end = false;
  double mass = 1.0;
  world::ObservationHistory pseudo_obs;  // empty for end nodes
  /// Steps entry_step+1 .. end_step; weight is the local (sibling) weight.
  gmm::PredictedScenario segment;
  InteractionModality modality;  // of the full prediction this node came from
};

struct ScenarioTree {
  std::vector<TreeNode> nodes;
  std::vector<int> leaves;
  int horizon = 0;
  std::vector<std::string> entity_ids;
  std::vector<Vec2> start_positions;  // entity positions at step 0
  std::size_t predictor_calls = 0;

  const TreeNode& root() const { return nodes.front(); }
  /// Node ids from the root (exclusive) down to `node` (inclusive).
  std::vector<int> path_to(int node) const;
  /// Mean positions of one entity for steps 0..end_step of `node`.
  std::vector<Vec2> mean_path(int node, std::size_t entity) const;
  InteractionModality path_modality(int node, double delta) const;
  int max_depth() const;
};

/// Per-step increase of sqrt(trace cov), maximized over entities. Step t is
/// 1-based; step 1 is measured against the certain observed state.
double uncertainty_rate(const gmm::PredictedScenario& scenario, std::size_t t);

/// Last step before the rate tolerance is exceeded, clamped below by t_min;
/// nullopt (end) when that step reaches the horizon.
std::optional<int> branch_time(const gmm::PredictedScenario& scenario, double beta, int t_min,
                               int horizon);

/// Quantized accumulated ego-to-agent bearing change.
int homotopy(const std::vector<Vec2>& ego, const std::vector<Vec2>& agent, double delta);

InteractionModality modality(const gmm::PredictedScenario& scenario, double delta);

/// Modality of `prefix[e]` followed by the scenario's means, per entity.
InteractionModality modality(const gmm::PredictedScenario& scenario, double delta,
                             const std::vector<std::vector<Vec2>>& prefix);

/// Prunes low-probability and route-deviating scenarios, merges scenarios of
/// equal modality into their most likely member, and renormalizes. Output is
/// sorted by weight (descending) then modality. Modalities are taken over
/// `prefix` (the mean path leading to the prediction) plus each scenario.
gmm::ScenePrediction prune_and_merge(const gmm::ScenePrediction& pred,
                                     const std::optional<Polyline>& route,
                                     const AimeConfig& cfg,
                                     const std::vector<std::vector<Vec2>>& prefix = {});

world::ObservationHistory update_pseudo_observation(const world::ObservationHistory& obs,
                                                    const gmm::PredictedScenario& scenario,
                                                    std::size_t upto);

ScenarioTree build_tree(const world::ObservationHistory& obs, const world::LaneGraph& map,
                        const std::optional<world::RouteCommand>& command,
                        const predict::ScenePredictor& predictor, const AimeConfig& cfg,
                        const BuildOptions& options = {});

struct Policy {
  int root_child = 0;
  std::vector<int> nodes;   // pre-order, starting with root_child
  std::vector<int> leaves;
  double mass = 0.0;
};

std::vector<Policy> enumerate_policies(const ScenarioTree& tree);

std::set<InteractionModality> leaf_modalities(const ScenarioTree& tree, double delta);

struct BenchRow {
  Strategy strategy = Strategy::kSingleShot;
  double coverage = 0.0;  // percent of BF-SRCH modalities reached
  std::size_t scenario_count = 0;
  std::size_t predictor_calls = 0;
  double cost_ratio = 0.0;  // predictor calls relative to single-shot
  std::size_t modality_count = 0;
};

/// Runs SS, AIME and BF-SRCH on the same inputs; rows in that order.
std::vector<BenchRow> bench_strategies(const world::ObservationHistory& obs,
                                       const world::LaneGraph& map,
                                       const std::optional<world::RouteCommand>& command,
                                       const predict::ScenePredictor& predictor,
                                       const AimeConfig& cfg, const BuildOptions& options = {});

nlohmann::json tree_to_json(const ScenarioTree& tree, double delta);

}  // namespace mind::aime
