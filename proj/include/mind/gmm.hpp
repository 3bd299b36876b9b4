#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mind/geometry.hpp"

namespace mind::gmm {

/// Positional Gaussian in the plane.
struct Gaussian2 {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Zero();
};

/// Throws std::invalid_argument unless cov is symmetric (1e-12) and PSD.
void validate(const Gaussian2& g);

/// Adds 1e-9 I when the smallest eigenvalue is below 1e-12.
Mat2 regularized(const Mat2& cov);

/// One step of the single-integrator linear-Gaussian update.
Gaussian2 propagate_linear(const Gaussian2& pos, const Gaussian2& action, double dt);

double mahalanobis_squared(const Vec2& point, const Gaussian2& g);
double mahalanobis(const Vec2& point, const Gaussian2& g);

/// Negative log density of a 2D Gaussian.
double nll(const Vec2& point, const Gaussian2& g);
double differential_entropy(const Gaussian2& g);

/// Mahalanobis radius enclosing 1 - p of a 2D Gaussian: sqrt(-2 ln p).
double chi2_threshold(double p);

std::vector<Vec2> sample(const Gaussian2& g, std::size_t n, std::uint64_t seed);

/// All entities of one scenario at a single time step (ego first).
struct ScenarioNode {
  std::vector<Gaussian2> entities;
};

/// One weighted joint future; nodes cover t = 1..length().
struct PredictedScenario {
  double weight = 0.0;
  std::vector<ScenarioNode> nodes;
  std::string label;  // free-form provenance, e.g. the intention it came from

  std::size_t length() const { return nodes.size(); }
  std::size_t entity_count() const { return nodes.empty() ? 0 : nodes.front().entities.size(); }
  /// Mean positions of one entity over t = 1..length().
  std::vector<Vec2> mean_path(std::size_t entity) const;
};

/// K weighted joint futures sharing one entity list (ego first).
struct ScenePrediction {
  std::vector<std::string> entity_ids;
  std::vector<PredictedScenario> scenarios;

  double total_weight() const;
  /// Throws std::invalid_argument when weights do not sum to 1 (1e-9) or the
  /// scenarios disagree on their entity set.
  void validate() const;
};

}  // namespace mind::gmm
