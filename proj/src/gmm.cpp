#include "mind/gmm.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace mind::gmm {

void validate(const Gaussian2& g) {
  if (!g.mean.allFinite() || !g.cov.allFinite()) {
    throw std::invalid_argument("Gaussian2 has non-finite entries");
  }
  if (std::abs(g.cov(0, 1) - g.cov(1, 0)) > 1e-12) {
    throw std::invalid_argument("Gaussian2 covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat2> es(g.cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12) {
    throw std::invalid_argument("Gaussian2 covariance is not positive semidefinite");
  }
}

Mat2 regularized(const Mat2& cov) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < 1e-12) return cov + 1e-9 * Mat2::Identity();
  return cov;
}

Gaussian2 propagate_linear(const Gaussian2& pos, const Gaussian2& action, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagate_linear: dt must be positive");
  Gaussian2 out;
  out.mean = pos.mean + dt * action.mean;
  out.cov = pos.cov + (dt * dt) * action.cov;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

double mahalanobis_squared(const Vec2& point, const Gaussian2& g) {
  const Vec2 d = point - g.mean;
  const Mat2 s = regularized(g.cov);
  return std::max(0.0, d.dot(s.inverse() * d));
}

double mahalanobis(const Vec2& point, const Gaussian2& g) {
  return std::sqrt(mahalanobis_squared(point, g));
}

double nll(const Vec2& point, const Gaussian2& g) {
  const Mat2 s = regularized(g.cov);
  return 0.5 * mahalanobis_squared(point, g) + std::log(2.0 * std::numbers::pi) +
         0.5 * std::log(s.determinant());
}

double differential_entropy(const Gaussian2& g) {
  const Mat2 s = regularized(g.cov);
  return 1.0 + std::log(2.0 * std::numbers::pi) + 0.5 * std::log(s.determinant());
}

double chi2_threshold(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("chi2_threshold: violation probability must lie in (0, 1)");
  }
  return std::sqrt(-2.0 * std::log(p));
}

std::vector<Vec2> sample(const Gaussian2& g, std::size_t n, std::uint64_t seed) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(g.cov);
  const Vec2 sd = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Mat2 root = es.eigenvectors() * sd.asDiagonal();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec2> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z0 = normal(rng);
    const double z1 = normal(rng);
    out.push_back(g.mean + root * Vec2(z0, z1));
  }
  return out;
}

std::vector<Vec2> PredictedScenario::mean_path(std::size_t entity) const {
  std::vector<Vec2> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(n.entities.at(entity).mean);
  return out;
}

double ScenePrediction::total_weight() const {
  double w = 0.0;
  for (const auto& s : scenarios) w += s.weight;
  return w;
}

void ScenePrediction::validate() const {
  if (scenarios.empty()) throw std::invalid_argument("ScenePrediction has no scenarios");
  if (std::abs(total_weight() - 1.0) > 1e-9) {
    throw std::invalid_argument("ScenePrediction weights do not sum to 1");
  }
  for (const auto& s : scenarios) {
    if (s.weight < 0.0 || s.weight > 1.0) throw std::invalid_argument("scenario weight outside [0, 1]");
    if (s.nodes.empty()) throw std::invalid_argument("scenario has no nodes");
    for (const auto& n : s.nodes) {
      if (n.entities.size() != entity_ids.size()) {
        throw std::invalid_argument("scenario node entity set differs from the prediction's");
      }
    }
  }
}

}  // namespace mind::gmm
