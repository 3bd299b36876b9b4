#pragma once

#include <string>
#include <vector>

#include "mind/aime.hpp"
#include "mind/contingency.hpp"
#include "mind/gmm.hpp"
#include "mind/world.hpp"

namespace mind::svg {

/// Minimal static SVG writer in world coordinates (y up).
class Canvas {
 public:
  void polyline(const std::vector<Vec2>& pts, const std::string& stroke, double width,
                double opacity = 1.0, bool dashed = false);
  void circle(const Vec2& c, double r, const std::string& fill);
  /// Ellipse of `scale` standard deviations of a 2D covariance.
  void ellipse(const gmm::Gaussian2& g, double scale, const std::string& stroke, double opacity);
  void text(const Vec2& at, const std::string& label, double size = 2.0);

  std::string render(double margin = 5.0) const;

 private:
  void extend(const Vec2& p);

  std::vector<std::string> items_;
  double min_x_ = 1e300, min_y_ = 1e300, max_x_ = -1e300, max_y_ = -1e300;
};

void draw_map(Canvas& c, const world::LaneGraph& map);
/// Mean paths and 2-sigma ellipses of every scenario.
std::string prediction_svg(const world::ScenarioFile& scenario, const gmm::ScenePrediction& pred);
std::string tree_svg(const world::ScenarioFile& scenario, const aime::ScenarioTree& tree);
/// Scenario tree means under the selected trajectory tree.
std::string plan_svg(const world::ScenarioFile& scenario, const aime::ScenarioTree& tree,
                     const contingency::TrajectoryTree& plan);

}  // namespace mind::svg
