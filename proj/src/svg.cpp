#include "mind/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Eigenvalues>

namespace mind::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(const char* pattern, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

std::string color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof *kPalette)]; }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

void draw_entities_now(Canvas& c, const world::ScenarioFile& scenario) {
  const auto& tracks = scenario.history.tracks();
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& s = tracks[i].states.back();
    c.circle(s.position(), 1.0, i == scenario.history.ego_index() ? "#000000" : "#7f7f7f");
    c.text(s.position() + Vec2(1.5, 1.5), tracks[i].id);
  }
}

}  // namespace

void Canvas::extend(const Vec2& p) {
  min_x_ = std::min(min_x_, p.x());
  min_y_ = std::min(min_y_, p.y());
  max_x_ = std::max(max_x_, p.x());
  max_y_ = std::max(max_y_, p.y());
}

void Canvas::polyline(const std::vector<Vec2>& pts, const std::string& stroke, double width,
                      double opacity, bool dashed) {
  if (pts.size() < 2) return;
  std::string d;
  for (const auto& p : pts) {
    extend(p);
    d += fmt("%.3f,%.3f ", p.x(), -p.y());
  }
  d.pop_back();
  char head[160];
  std::snprintf(head, sizeof head,
                "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"%.3f\" stroke-opacity=\"%.3f\"%s points=\"",
                stroke.c_str(), width, opacity, dashed ? " stroke-dasharray=\"1,1\"" : "");
  items_.push_back(std::string(head) + d + "\"/>");
}

void Canvas::circle(const Vec2& c, double r, const std::string& fill) {
  extend(c + Vec2(r, r));
  extend(c - Vec2(r, r));
  char buf[160];
  std::snprintf(buf, sizeof buf, "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"%.3f\" fill=\"%s\"/>", c.x(),
                -c.y(), r, fill.c_str());
  items_.push_back(buf);
}

void Canvas::ellipse(const gmm::Gaussian2& g, double scale, const std::string& stroke,
                     double opacity) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(g.cov);
  const Vec2 ev = es.eigenvalues().cwiseMax(0.0);
  const double rx = scale * std::sqrt(ev(1));
  const double ry = scale * std::sqrt(ev(0));
  if (rx < 1e-6) return;
  const Vec2 major = es.eigenvectors().col(1);
  const double angle = -std::atan2(major.y(), major.x()) * 180.0 / std::acos(-1.0);
  extend(g.mean + Vec2(rx, rx));
  extend(g.mean - Vec2(rx, rx));
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<ellipse cx=\"%.3f\" cy=\"%.3f\" rx=\"%.3f\" ry=\"%.3f\" transform=\"rotate(%.3f %.3f %.3f)\" "
                "fill=\"none\" stroke=\"%s\" stroke-width=\"0.1\" stroke-opacity=\"%.3f\"/>",
                g.mean.x(), -g.mean.y(), rx, ry, angle, g.mean.x(), -g.mean.y(), stroke.c_str(),
                opacity);
  items_.push_back(buf);
}

void Canvas::text(const Vec2& at, const std::string& label, double size) {
  extend(at);
  char buf[128];
  std::snprintf(buf, sizeof buf, "<text x=\"%.3f\" y=\"%.3f\" font-size=\"%.3f\" font-family=\"sans-serif\">",
                at.x(), -at.y(), size);
  items_.push_back(std::string(buf) + escape(label) + "</text>");
}

std::string Canvas::render(double margin) const {
  double x0 = min_x_, y0 = min_y_, x1 = max_x_, y1 = max_y_;
  if (x0 > x1) x0 = y0 = x1 = y1 = 0.0;
  x0 -= margin;
  y0 -= margin;
  x1 += margin;
  y1 += margin;
  char head[256];
  std::snprintf(head, sizeof head,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"%.3f %.3f %.3f %.3f\" width=\"%.0f\" height=\"%.0f\">\n",
                x0, -y1, x1 - x0, y1 - y0, 8.0 * (x1 - x0), 8.0 * (y1 - y0));
  std::string out = head;
  out += "<rect x=\"" + fmt("%.3f", x0, 0) + "\" y=\"" + fmt("%.3f", -y1, 0) + "\" width=\"" +
         fmt("%.3f", x1 - x0, 0) + "\" height=\"" + fmt("%.3f", y1 - y0, 0) + "\" fill=\"#ffffff\"/>\n";
  for (const auto& item : items_) out += item + "\n";
  out += "</svg>\n";
  return out;
}

void draw_map(Canvas& c, const world::LaneGraph& map) {
  for (const auto& lane : map.lanes()) c.polyline(lane.centerline.points(), "#bbbbbb", 0.3, 1.0, true);
}

std::string prediction_svg(const world::ScenarioFile& scenario, const gmm::ScenePrediction& pred) {
  Canvas c;
  draw_map(c, scenario.map);
  for (std::size_t k = 0; k < pred.scenarios.size(); ++k) {
    const auto& sc = pred.scenarios[k];
    const double opacity = std::clamp(0.3 + sc.weight, 0.3, 1.0);
    for (std::size_t e = 0; e < sc.entity_count(); ++e) {
      c.polyline(sc.mean_path(e), color(k), e == 0 ? 0.4 : 0.25, opacity);
      for (std::size_t t = 9; t < sc.length(); t += 10) c.ellipse(sc.nodes[t].entities[e], 2.0, color(k), opacity);
    }
  }
  draw_entities_now(c, scenario);
  return c.render();
}

std::string tree_svg(const world::ScenarioFile& scenario, const aime::ScenarioTree& tree) {
  Canvas c;
  draw_map(c, scenario.map);
  for (const auto& n : tree.nodes) {
    if (n.parent < 0) continue;
    for (std::size_t e = 0; e < n.segment.entity_count(); ++e) {
      c.polyline(n.segment.mean_path(e), color(static_cast<std::size_t>(n.depth)), e == 0 ? 0.4 : 0.25,
                 std::clamp(0.2 + n.mass, 0.2, 1.0));
      if (!n.segment.nodes.empty()) c.ellipse(n.segment.nodes.back().entities[e], 2.0, "#555555", 0.5);
    }
  }
  draw_entities_now(c, scenario);
  return c.render();
}

std::string plan_svg(const world::ScenarioFile& scenario, const aime::ScenarioTree& tree,
                     const contingency::TrajectoryTree& plan) {
  Canvas c;
  draw_map(c, scenario.map);
  for (const auto& n : tree.nodes) {
    if (n.parent < 0) continue;
    for (std::size_t e = 1; e < n.segment.entity_count(); ++e)
      c.polyline(n.segment.mean_path(e), "#999999", 0.2, std::clamp(0.2 + n.mass, 0.2, 1.0));
  }
  for (std::size_t j = 0; j < plan.segments.size(); ++j) {
    const auto& seg = plan.segments[j];
    std::vector<Vec2> pts{plan.start_state(j).position()};
    for (const auto& s : seg.states) pts.push_back(s.position());
    c.polyline(pts, color(j), 0.5, std::clamp(0.3 + seg.weight, 0.3, 1.0));
  }
  draw_entities_now(c, scenario);
  return c.render();
}

}  // namespace mind::svg
