#include "mind/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mind/errors.hpp"

namespace mind::predict {

using gmm::Gaussian2;
using world::EntityState;
using world::LaneGraph;
using world::ObservationHistory;
using world::RouteCommand;

std::string to_string(LongitudinalMode m) {
  switch (m) {
    case LongitudinalMode::kYield:
      return "yield";
    case LongitudinalMode::kMaintain:
      return "maintain";
    case LongitudinalMode::kAssert:
      return "assert";
  }
  return "?";
}

void PredictorConfig::validate() const {
  if (modes_k < 1) throw std::invalid_argument("predictor: K must be >= 1");
  if (horizon < 1) throw std::invalid_argument("predictor: horizon must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("predictor: dt must be positive");
  if (sigma_a < 0.0) throw std::invalid_argument("predictor: sigma_a must be >= 0");
  if (modes.empty()) throw std::invalid_argument("predictor: mode set is empty");
  if (!(assert_penalty > 0.0)) throw std::invalid_argument("predictor: assert_penalty must be > 0");
  if (ego_responses < 1) throw std::invalid_argument("predictor: ego_responses must be >= 1");
  if (interaction_sigma < 0.0 || !(interaction_range > 0.0) || !(arrival_time_scale > 0.0)) {
    throw std::invalid_argument("predictor: interaction noise parameters out of range");
  }
}

namespace {

/// A route resolved into a path that starts at the entity's projection.
struct RoutePath {
  RouteCommand route;
  Polyline path;
  std::vector<double> lane_start;  // path arc length where each route lane begins
  std::vector<double> limit;       // speed limit per route lane
  double fallback_limit = 10.0;

  double speed_limit(double s) const {
    if (limit.empty()) return fallback_limit;
    double out = limit.front();
    for (std::size_t i = 0; i < lane_start.size(); ++i) {
      if (s >= lane_start[i]) out = limit[i];
    }
    return out;
  }
};

RoutePath make_route_path(const LaneGraph& map, const RouteCommand& route, const Vec2& pos) {
  RoutePath rp;
  rp.route = route;
  const Polyline full = world::route_polyline(map, route);
  const double s0 = std::clamp(full.project(pos).s, 0.0, full.length());
  rp.path = full.suffix(s0);
  double acc = -s0;
  for (const auto& id : route.lanes) {
    const auto& lane = map.lane(id);
    rp.lane_start.push_back(acc);
    rp.limit.push_back(lane.speed_limit);
    acc += lane.centerline.length();
  }
  return rp;
}

RoutePath straight_path(const EntityState& s) {
  RoutePath rp;
  const Vec2 dir(std::cos(s.theta), std::sin(s.theta));
  rp.path = Polyline({s.position(), s.position() + 300.0 * dir});
  rp.fallback_limit = std::max(s.v, 10.0);
  return rp;
}

struct Conflict {
  double s_self = 0.0;
  double s_other = 0.0;
};

std::optional<Conflict> find_conflict(const RoutePath& a, const RoutePath& b) {
  for (std::size_t ia = 0; ia < a.route.lanes.size(); ++ia) {
    auto it = std::find(b.route.lanes.begin(), b.route.lanes.end(), a.route.lanes[ia]);
    if (it == b.route.lanes.end()) continue;
    const auto ib = static_cast<std::size_t>(it - b.route.lanes.begin());
    // Sharing the current lane means following, not conflicting.
    if (ia == 0 || ib == 0) return std::nullopt;
    if (a.lane_start[ia] < 0.0 || b.lane_start[ib] < 0.0) return std::nullopt;
    return Conflict{a.lane_start[ia], b.lane_start[ib]};
  }
  if (auto c = first_crossing(a.path, b.path)) return Conflict{c->s_a, c->s_b};
  return std::nullopt;
}

EntityState current_state(const ObservationHistory& obs, std::size_t track) {
  return obs.tracks()[track].states.back();
}

/// Per-entity route options and the pairwise conflict table between them.
struct SceneContext {
  std::vector<std::size_t> order;              // track index per entity
  std::vector<EntityState> start;              // current state per entity
  std::vector<std::vector<RoutePath>> routes;  // options per entity
  // conflicts[i][j][ri][rj]
  std::vector<std::vector<std::vector<std::vector<std::optional<Conflict>>>>> conflicts;

  std::optional<Conflict> conflict(std::size_t i, std::size_t ri, std::size_t j,
                                   std::size_t rj) const {
    return conflicts[i][j][ri][rj];
  }
};

std::vector<RoutePath> entity_routes(const LaneGraph& map, const EntityState& s,
                                     const PredictorConfig& cfg) {
  std::vector<RouteCommand> routes;
  try {
    routes = world::candidate_routes(map, s.position(), s.theta, cfg.route_length);
  } catch (const NoLaneError&) {
    if (!cfg.straight_fallback) throw;
    return {straight_path(s)};
  }
  std::vector<RoutePath> out;
  for (const auto& r : routes) out.push_back(make_route_path(map, r, s.position()));
  return out;
}

SceneContext make_context(const ObservationHistory& obs, const LaneGraph& map,
                          const std::optional<RouteCommand>& command,
                          const PredictorConfig& cfg, bool include_ego) {
  SceneContext ctx;
  const auto order = obs.entity_order();
  for (std::size_t k = 0; k < order.size(); ++k) {
    const bool is_ego = k == 0;
    if (is_ego && !include_ego) continue;
    const EntityState s = current_state(obs, order[k]);
    ctx.order.push_back(order[k]);
    ctx.start.push_back(s);
    if (is_ego && command && !command->lanes.empty()) {
      ctx.routes.push_back({make_route_path(map, *command, s.position())});
    } else {
      ctx.routes.push_back(entity_routes(map, s, cfg));
    }
  }
  const std::size_t n = ctx.routes.size();
  ctx.conflicts.assign(n, std::vector<std::vector<std::vector<std::optional<Conflict>>>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      auto& table = ctx.conflicts[i][j];
      table.assign(ctx.routes[i].size(),
                   std::vector<std::optional<Conflict>>(ctx.routes[j].size()));
      for (std::size_t ri = 0; ri < ctx.routes[i].size(); ++ri) {
        for (std::size_t rj = 0; rj < ctx.routes[j].size(); ++rj) {
          table[ri][rj] = find_conflict(ctx.routes[i][ri], ctx.routes[j][rj]);
        }
      }
    }
  }
  return ctx;
}

/// One option per entity: route index and longitudinal mode.
struct Choice {
  std::size_t route = 0;
  LongitudinalMode mode = LongitudinalMode::kMaintain;
};

struct JointHypothesis {
  std::vector<Choice> choices;
  double prior = 1.0;
};

/// Likelihood factor of a mode given how far ahead (in time scales) the
/// entity is of its conflict partner; 1 when both arrive together.
double arrival_factor(LongitudinalMode m, double lead) {
  switch (m) {
    case LongitudinalMode::kYield:
      return 2.0 / (1.0 + std::exp(lead));
    case LongitudinalMode::kAssert:
      return 2.0 / (1.0 + std::exp(-lead));
    case LongitudinalMode::kMaintain:
      break;
  }
  return 1.0;
}

/// Cartesian product in odometer order (last entity fastest), filtered so
/// that no two entities assert through a shared conflict point.
std::vector<JointHypothesis> enumerate_joint(const SceneContext& ctx, const PredictorConfig& cfg) {
  const std::size_t n = ctx.routes.size();
  std::vector<std::vector<Choice>> options(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < ctx.routes[i].size(); ++r) {
      for (auto m : cfg.modes) options[i].push_back({r, m});
    }
  }
  std::vector<JointHypothesis> out;
  std::vector<std::size_t> idx(n, 0);
  while (true) {
    JointHypothesis h;
    int asserts = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      h.choices.push_back(options[i][idx[i]]);
      if (h.choices.back().mode == LongitudinalMode::kAssert) ++asserts;
    }
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (h.choices[i].mode != LongitudinalMode::kAssert) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (h.choices[j].mode == LongitudinalMode::kAssert &&
            ctx.conflict(i, h.choices[i].route, j, h.choices[j].route)) {
          ok = false;
          break;
        }
      }
    }
    if (ok) {
      h.prior = std::pow(cfg.assert_penalty, asserts);
      // Whoever reaches a shared conflict first is more likely to go first.
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          const auto c = ctx.conflict(i, h.choices[i].route, j, h.choices[j].route);
          if (!c) continue;
          const double ti = std::max(c->s_self, 0.0) / std::max(ctx.start[i].v, 1.0);
          const double tj = std::max(c->s_other, 0.0) / std::max(ctx.start[j].v, 1.0);
          const double lead = (tj - ti) / cfg.arrival_time_scale;
          h.prior *= arrival_factor(h.choices[i].mode, lead) * arrival_factor(h.choices[j].mode, -lead);
        }
      }
      out.push_back(std::move(h));
    }
    // Advance the odometer.
    std::size_t k = n;
    while (k > 0) {
      --k;
      if (++idx[k] < options[k].size()) break;
      idx[k] = 0;
      if (k == 0) {
        k = n + 1;
        break;
      }
    }
    if (n == 0 || k == n + 1) break;
  }
  std::stable_sort(out.begin(), out.end(), [](const JointHypothesis& a, const JointHypothesis& b) {
    return a.prior > b.prior;
  });
  return out;
}

struct RolloutEntity {
  const RoutePath* route = nullptr;
  LongitudinalMode mode = LongitudinalMode::kMaintain;
  EntityState state;
  double desired_speed = 0.0;
  double progress = 0.0;
};

double idm_accel(double v, double v0, double gap, double v_lead, const PredictorConfig& cfg) {
  const double a = cfg.idm_accel;
  const double b = cfg.idm_comfort_decel;
  const double s_star =
      cfg.idm_min_gap + std::max(0.0, v * cfg.idm_time_headway + v * (v - v_lead) / (2.0 * std::sqrt(a * b)));
  const double g = std::max(gap, 0.1);
  return a * (1.0 - std::pow(v / std::max(v0, 0.1), 4) - (s_star / g) * (s_star / g));
}

/// Joint deterministic rollout; returns mean positions [entity][t], t = 1..horizon.
std::vector<std::vector<Vec2>> rollout(std::vector<RolloutEntity> ents,
                                       const std::vector<std::vector<std::optional<Conflict>>>& conflicts,
                                       const PredictorConfig& cfg, int horizon) {
  const std::size_t n = ents.size();
  const double dt = cfg.dt;
  std::vector<std::vector<Vec2>> means(n);
  for (auto& m : means) m.reserve(static_cast<std::size_t>(horizon));
  for (auto& e : ents) e.progress = e.route->path.project(e.state.position()).s;

  for (int t = 0; t < horizon; ++t) {
    std::vector<EntityState> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      const RolloutEntity& e = ents[i];
      const EntityState& s = e.state;
      const double limit = e.route->speed_limit(e.progress);
      const double v_cap = std::max(limit, e.desired_speed);
      double a = 0.0;

      switch (e.mode) {
        case LongitudinalMode::kMaintain:
          break;
        case LongitudinalMode::kAssert:
          a = s.v < limit ? cfg.assert_accel : 0.0;
          break;
        case LongitudinalMode::kYield: {
          bool active = false;
          bool committed = false;
          double d_stop = std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < n; ++j) {
            if (!conflicts[i][j]) continue;
            const Conflict& c = *conflicts[i][j];
            if (ents[j].progress > c.s_other + cfg.clear_margin) continue;
            const double d = c.s_self - cfg.stop_buffer - e.progress;
            if (d < -0.5) {
              committed = true;
              continue;
            }
            if (d > std::max(15.0, 4.0 * s.v)) continue;
            active = true;
            d_stop = std::min(d_stop, d);
          }
          if (active) {
            const double needed = s.v * s.v / (2.0 * std::max(d_stop, 0.5));
            a = -std::min(std::max(cfg.yield_decel, needed), cfg.max_decel);
          } else if (!committed && s.v < e.desired_speed) {
            a = cfg.assert_accel;
          }
          break;
        }
      }

      // Follow the closest entity occupying this path ahead.
      double best_gap = std::numeric_limits<double>::infinity();
      double lead_v = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const Projection pr = e.route->path.project(ents[j].state.position());
        const double ds = pr.s - e.progress;
        if (std::abs(pr.lateral) < 2.0 && ds > 0.0 && ds < 60.0 && ds < best_gap) {
          best_gap = ds;
          const double rel = ents[j].state.theta - std::atan2(pr.tangent.y(), pr.tangent.x());
          lead_v = ents[j].state.v * std::cos(rel);
        }
      }
      if (std::isfinite(best_gap)) {
        a = std::min(a, idm_accel(s.v, limit, best_gap - cfg.vehicle_length, lead_v, cfg));
      }
      a = std::max(a, -cfg.max_decel);

      // Pure pursuit toward the route centerline.
      const double lookahead = std::max(4.0, 0.8 * s.v + 2.0);
      const Vec2 target = e.route->path.at(e.progress + lookahead);
      const Vec2 to = target - s.position();
      const double alpha = normalize_angle(std::atan2(to.y(), to.x()) - s.theta);
      const double kappa = std::clamp(2.0 * std::sin(alpha) / lookahead, -0.35, 0.35);

      EntityState ns;
      ns.x = s.x + dt * s.v * std::cos(s.theta);
      ns.y = s.y + dt * s.v * std::sin(s.theta);
      ns.theta = normalize_angle(s.theta + dt * s.v * kappa);
      ns.v = std::clamp(s.v + dt * a, 0.0, std::max(v_cap, s.v));
      next[i] = ns;
    }
    for (std::size_t i = 0; i < n; ++i) {
      ents[i].state = next[i];
      ents[i].progress = ents[i].route->path.project(next[i].position()).s;
      means[i].push_back(next[i].position());
    }
  }
  return means;
}

// Entities farther apart than this many interaction ranges do not interact.
constexpr double kProximityCutoff = 3.0;

/// Turns mean paths into positional Gaussians via per-step action Gaussians.
gmm::PredictedScenario to_scenario(const std::vector<EntityState>& start,
                                   const std::vector<std::vector<Vec2>>& means,
                                   const PredictorConfig& cfg, double interaction_sigma) {
  const std::size_t n = means.size();
  const std::size_t horizon = n ? means.front().size() : 0;
  gmm::PredictedScenario sc;
  sc.nodes.resize(horizon);
  std::vector<Gaussian2> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i].mean = start[i].position();
  for (std::size_t t = 0; t < horizon; ++t) {
    const double elapsed = static_cast<double>(t + 1) * cfg.dt;
    for (std::size_t i = 0; i < n; ++i) {
      double proximity = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = (means[i][t] - means[j][t]).norm() / cfg.interaction_range;
        if (d < kProximityCutoff) proximity = std::max(proximity, std::exp(-d * d));
      }
      const double var = std::pow(cfg.sigma_a * elapsed, 2) + std::pow(interaction_sigma * proximity, 2);
      Gaussian2 action;
      action.mean = (means[i][t] - pos[i].mean) / cfg.dt;
      action.cov = var * Mat2::Identity();
      pos[i] = gmm::propagate_linear(pos[i], action, cfg.dt);
      pos[i].mean = means[i][t];
    }
    sc.nodes[t].entities = pos;
  }
  return sc;
}

std::string route_label(const RouteCommand& r) {
  std::string out;
  for (const auto& id : r.lanes) {
    if (!out.empty()) out += ">";
    out += id;
  }
  return out.empty() ? "straight" : out;
}

/// Keeps the top-K, pads by cycling when fewer exist, splits weight evenly
/// among copies and normalizes to 1.
std::vector<std::pair<std::size_t, double>> select_top_k(const std::vector<double>& priors,
                                                        int k) {
  const std::size_t kept = std::min<std::size_t>(priors.size(), static_cast<std::size_t>(k));
  double total = 0.0;
  for (std::size_t i = 0; i < kept; ++i) total += priors[i];
  std::vector<std::size_t> copies(kept, 0);
  for (int slot = 0; slot < k; ++slot) ++copies[static_cast<std::size_t>(slot) % kept];
  std::vector<std::pair<std::size_t, double>> out;
  for (int slot = 0; slot < k; ++slot) {
    const std::size_t h = static_cast<std::size_t>(slot) % kept;
    out.emplace_back(h, priors[h] / total / static_cast<double>(copies[h]));
  }
  return out;
}

bool same_agents(const JointHypothesis& joint, const JointHypothesis& agents) {
  for (std::size_t i = 0; i < agents.choices.size(); ++i) {
    const auto& a = joint.choices[i + 1];
    const auto& b = agents.choices[i];
    if (a.route != b.route || a.mode != b.mode) return false;
  }
  return true;
}

/// Agent hypotheses ranked by joint prior summed over every candidate ego
/// route and mode, so the ranking never depends on a route command.
std::vector<JointHypothesis> agent_hypotheses(const ObservationHistory& obs, const LaneGraph& map,
                                              const PredictorConfig& cfg) {
  std::vector<JointHypothesis> agents;
  for (const auto& h : enumerate_joint(make_context(obs, map, std::nullopt, cfg, true), cfg)) {
    auto it = std::find_if(agents.begin(), agents.end(),
                           [&](const JointHypothesis& a) { return same_agents(h, a); });
    if (it != agents.end()) {
      it->prior += h.prior;
      continue;
    }
    JointHypothesis a;
    a.choices.assign(h.choices.begin() + 1, h.choices.end());
    a.prior = h.prior;
    agents.push_back(std::move(a));
  }
  std::stable_sort(agents.begin(), agents.end(),
                   [](const JointHypothesis& a, const JointHypothesis& b) { return a.prior > b.prior; });
  const auto keep = static_cast<std::size_t>((cfg.modes_k + cfg.ego_responses - 1) / cfg.ego_responses);
  if (agents.size() > keep) agents.resize(keep);
  return agents;
}

/// Restricts joint hypotheses (ego first) to the given agent hypotheses: the
/// best `responses` ego options for each, then the next-best joint ones up to
/// k, so the agent intentions kept never depend on the ego route.
std::vector<JointHypothesis> condition_on_agents(const std::vector<JointHypothesis>& joint,
                                                 const std::vector<JointHypothesis>& agents,
                                                 int k, int responses) {
  std::vector<bool> used(joint.size(), false);
  std::vector<std::size_t> picked;
  for (const auto& a : agents) {
    int taken = 0;
    for (std::size_t h = 0; h < joint.size() && taken < responses; ++h) {
      if (same_agents(joint[h], a)) {
        used[h] = true;
        picked.push_back(h);
        ++taken;
      }
    }
  }
  for (std::size_t h = 0; h < joint.size() && picked.size() < static_cast<std::size_t>(k); ++h) {
    if (used[h]) continue;
    for (const auto& a : agents) {
      if (same_agents(joint[h], a)) {
        used[h] = true;
        picked.push_back(h);
        break;
      }
    }
  }
  std::sort(picked.begin(), picked.end());
  std::vector<JointHypothesis> out;
  for (std::size_t h : picked) out.push_back(joint[h]);
  return out;
}

}  // namespace

IntentionPredictor::IntentionPredictor(PredictorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

gmm::ScenePrediction IntentionPredictor::predict(const ObservationHistory& obs,
                                                 const LaneGraph& map,
                                                 const std::optional<RouteCommand>& command,
                                                 int horizon) const {
  if (command && !command->lanes.empty() && !world::is_connected(map, *command)) {
    throw InputError("route command lanes are not connected");
  }
  const SceneContext ctx = make_context(obs, map, command, cfg_, true);
  const auto all = enumerate_joint(ctx, cfg_);
  const auto joint = condition_on_agents(all, agent_hypotheses(obs, map, cfg_), cfg_.modes_k, cfg_.ego_responses);
  std::vector<double> priors;
  for (const auto& h : joint) priors.push_back(h.prior);
  const auto slots = select_top_k(priors, cfg_.modes_k);

  gmm::ScenePrediction out;
  for (std::size_t i : ctx.order) out.entity_ids.push_back(obs.tracks()[i].id);
  const std::size_t n = ctx.routes.size();

  std::vector<gmm::PredictedScenario> cache(joint.size());
  std::vector<bool> cached(joint.size(), false);
  for (const auto& [h, weight] : slots) {
    if (!cached[h]) {
      const auto& hyp = joint[h];
      std::vector<RolloutEntity> ents(n);
      std::vector<std::vector<std::optional<Conflict>>> conflicts(
          n, std::vector<std::optional<Conflict>>(n));
      std::string label;
      for (std::size_t i = 0; i < n; ++i) {
        ents[i].route = &ctx.routes[i][hyp.choices[i].route];
        ents[i].mode = hyp.choices[i].mode;
        ents[i].state = ctx.start[i];
        ents[i].desired_speed = std::max(ctx.start[i].v, 0.6 * ents[i].route->speed_limit(0.0));
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i) conflicts[i][j] = ctx.conflict(i, hyp.choices[i].route, j, hyp.choices[j].route);
        }
        if (i) label += "|";
        label += out.entity_ids[i] + "=" + to_string(hyp.choices[i].mode) + "@" +
                 route_label(ents[i].route->route);
      }
      const auto means = rollout(ents, conflicts, cfg_, horizon);
      cache[h] = to_scenario(ctx.start, means, cfg_, cfg_.interaction_sigma);
      cache[h].label = label;
      cached[h] = true;
    }
    gmm::PredictedScenario sc = cache[h];
    sc.weight = weight;
    out.scenarios.push_back(std::move(sc));
  }
  return out;
}

ConstantVelocityPredictor::ConstantVelocityPredictor(PredictorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

gmm::ScenePrediction ConstantVelocityPredictor::predict(const ObservationHistory& obs,
                                                        const LaneGraph& map,
                                                        const std::optional<RouteCommand>& command,
                                                        int horizon) const {
  gmm::ScenePrediction out;
  const auto order = obs.entity_order();
  std::vector<EntityState> start;
  std::vector<std::vector<Vec2>> means;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const EntityState s = current_state(obs, order[k]);
    out.entity_ids.push_back(obs.tracks()[order[k]].id);
    start.push_back(s);
    std::vector<Vec2> path;
    if (k == 0) {
      RoutePath rp;
      if (command && !command->lanes.empty()) {
        rp = make_route_path(map, *command, s.position());
      } else {
        auto routes = entity_routes(map, s, cfg_);
        rp = routes.front();
      }
      RolloutEntity e{&rp, LongitudinalMode::kMaintain, s, s.v, 0.0};
      path = rollout({e}, {{std::nullopt}}, cfg_, horizon).front();
    } else {
      const Vec2 vel = s.v * Vec2(std::cos(s.theta), std::sin(s.theta));
      for (int t = 1; t <= horizon; ++t) path.push_back(s.position() + vel * (t * cfg_.dt));
    }
    means.push_back(std::move(path));
  }
  gmm::PredictedScenario sc = to_scenario(start, means, cfg_, 0.0);
  sc.weight = 1.0;
  sc.label = "constant-velocity";
  out.scenarios.push_back(std::move(sc));
  return out;
}

gmm::ScenePrediction predict_scene(const ObservationHistory& obs, const LaneGraph& map,
                                   const std::optional<RouteCommand>& command,
                                   const PredictorConfig& cfg) {
  return IntentionPredictor(cfg).predict(obs, map, command, cfg.horizon);
}

std::vector<IntentionHypothesis> enumerate_intentions(const ObservationHistory& obs,
                                                      const LaneGraph& map,
                                                      const PredictorConfig& cfg) {
  const SceneContext ctx = make_context(obs, map, std::nullopt, cfg, false);
  auto joint = enumerate_joint(ctx, cfg);
  if (joint.size() > static_cast<std::size_t>(cfg.modes_k)) {
    joint.resize(static_cast<std::size_t>(cfg.modes_k));
  }
  double total = 0.0;
  for (const auto& h : joint) total += h.prior;
  std::vector<IntentionHypothesis> out;
  for (const auto& h : joint) {
    IntentionHypothesis ih;
    for (std::size_t i = 0; i < h.choices.size(); ++i) {
      ih.agents.push_back({ctx.routes[i][h.choices[i].route].route, h.choices[i].mode});
    }
    ih.prior = h.prior / total;
    out.push_back(std::move(ih));
  }
  return out;
}

}  // namespace mind::predict
