#pragma once

#include <cmath>
#include <string>

#include "json.hpp"

#include "mind/world.hpp"

namespace mind::test {

inline std::string fixture(const std::string& name) {
  return std::string(MIND_KIT_FIXTURE_DIR) + "/" + name;
}

inline world::ScenarioFile load_fixture(const std::string& name) {
  return world::load_scenario(fixture(name));
}

/// Constant-velocity history of `h` states ending at (x, y).
inline nlohmann::json history(double x, double y, double theta, double v, int h = 10,
                              double dt = 0.1) {
  nlohmann::json states = nlohmann::json::array();
  for (int k = 0; k < h; ++k) {
    const double back = (h - 1 - k) * dt * v;
    states.push_back({x - back * std::cos(theta), y - back * std::sin(theta), theta, v});
  }
  return states;
}

inline nlohmann::json lane(const std::string& id, nlohmann::json pts,
                           nlohmann::json successors = nlohmann::json::array(),
                           double speed = 10.0) {
  return {{"id", id}, {"centerline", std::move(pts)}, {"speed_limit", speed},
          {"successors", std::move(successors)}};
}

inline nlohmann::json entity(const std::string& id, const std::string& role, double x, double y,
                             double theta, double v) {
  return {{"id", id}, {"role", role}, {"states", history(x, y, theta, v)}};
}

inline nlohmann::json scenario_json(nlohmann::json lanes, nlohmann::json agents,
                                    nlohmann::json route,
                                    nlohmann::json policies = nlohmann::json::array(),
                                    int horizon = 60) {
  return {{"map", {{"lanes", std::move(lanes)}}},
          {"history", {{"dt", 0.1}, {"agents", std::move(agents)}}},
          {"ego_route", std::move(route)},
          {"policies", std::move(policies)},
          {"sim", {{"horizon_steps", horizon}, {"dt", 0.1}}}};
}

}  // namespace mind::test
