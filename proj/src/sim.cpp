#include "mind/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "mind/errors.hpp"

namespace mind::sim {

using contingency::Control;
using contingency::VehicleState;
using json = nlohmann::json;

namespace {

constexpr double kFollowAccel = 1.5;
constexpr double kFollowDecel = 2.0;
constexpr double kHeadway = 1.5;
constexpr double kMinGap = 2.0;
constexpr double kVehicleLength = 4.5;
constexpr double kMaxDecel = 6.0;
constexpr double kMaxAccel = 3.0;
constexpr double kMaxCurvature = 0.5;
constexpr double kFallbackBrake = -3.0;

world::RouteCommand route_param(const json& j, const std::string& key, const std::string& who) {
  if (!j.is_array()) throw SchemaError("policy " + who + ": '" + key + "' must be a list of lane ids");
  world::RouteCommand r;
  for (const auto& id : j) {
    if (!id.is_string()) throw SchemaError("policy " + who + ": '" + key + "' must hold strings");
    r.lanes.push_back(id.get<std::string>());
  }
  if (r.lanes.empty()) throw SchemaError("policy " + who + ": '" + key + "' is empty");
  return r;
}

double number_param(const json& p, const std::string& key, const std::string& who) {
  const auto& v = p.at(key);
  if (!v.is_number()) throw SchemaError("policy " + who + ": '" + key + "' must be a number");
  return v.get<double>();
}

VehicleState to_vehicle(const world::EntityState& s) { return {s.x, s.y, s.theta, s.v}; }
world::EntityState to_entity(const VehicleState& s) { return {s.x, s.y, s.theta, s.v}; }

struct Actor {
  std::size_t track = 0;  // index into the observation tracks
  bool ego = false;
  std::optional<AgentPolicy> policy;  // none: planner-driven ego
  Polyline path;
  double target_speed = 0.0;
  int trigger_step = -1;
  int trigger_end = -1;
  bool triggered = false;
};

/// Pure pursuit toward a look-ahead point on the path.
double pursuit(const VehicleState& s, const Polyline& path) {
  if (path.size() < 2) return 0.0;
  const auto proj = path.project(s.position());
  const double look = std::max(4.0, 0.6 * s.v + 2.0);
  const Vec2 d = path.at(proj.s + look) - s.position();
  const double alpha = normalize_angle(std::atan2(d.y(), d.x()) - s.theta);
  return std::clamp(2.0 * std::sin(alpha) / look, -kMaxCurvature, kMaxCurvature);
}

/// IDM acceleration toward the target speed behind the nearest same-direction
/// entity on the path.
double follow_accel(const VehicleState& s, const Polyline& path, double target,
                    const std::vector<VehicleState>& others) {
  double gap = std::numeric_limits<double>::infinity();
  double lead_v = 0.0;
  if (path.size() >= 2) {
    const double s0 = path.project(s.position()).s;
    for (const auto& o : others) {
      const auto q = path.project(o.position());
      if (std::abs(q.lateral) > 2.0 || q.s <= s0) continue;
      if (std::cos(normalize_angle(o.theta - path.heading(q.s))) < 0.5) continue;
      const double g = q.s - s0 - kVehicleLength;
      if (g < gap) {
        gap = g;
        lead_v = o.v;
      }
    }
  }
  const double vt = std::max(target, 0.1);
  double a = kFollowAccel * (1.0 - std::pow(s.v / vt, 4));
  if (std::isfinite(gap)) {
    const double desired = kMinGap + s.v * kHeadway +
                           s.v * (s.v - lead_v) / (2.0 * std::sqrt(kFollowAccel * kFollowDecel));
    const double ratio = std::max(desired, 0.0) / std::max(gap, 0.1);
    a -= kFollowAccel * ratio * ratio;
  }
  return std::clamp(a, -kMaxDecel, kMaxAccel);
}

/// Advances with the bicycle model, never reversing.
std::pair<VehicleState, Control> advance(const VehicleState& s, Control u, double dt) {
  if (s.v + u.a * dt < 0.0) u.a = -s.v / dt;
  return {contingency::bicycle_step(s, u, dt), u};
}

std::string fnv_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string tree_summary_hash(const aime::ScenarioTree& tree) {
  std::string s;
  char buf[96];
  for (const auto& n : tree.nodes) {
    std::snprintf(buf, sizeof buf, "%d:%d:%d:%d:%.9g;", n.id, n.parent, n.entry_step, n.end_step,
                  n.mass);
    s += buf;
  }
  return fnv_hex(s);
}

json state_json(const std::string& id, bool ego, const VehicleState& s) {
  return {{"id", id}, {"role", ego ? "ego" : "agent"},
          {"x", s.x}, {"y", s.y}, {"theta", s.theta}, {"v", s.v}};
}

}  // namespace

std::string to_string(PlannerVariant v) {
  switch (v) {
    case PlannerVariant::kMind: return "MIND";
    case PlannerVariant::kSingleShot: return "NN+CP";
    case PlannerVariant::kConstantVelocity: return "MB+CP";
    case PlannerVariant::kNone: return "none";
  }
  return "?";
}

PlannerVariant parse_variant(const std::string& s) {
  std::string t = s;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "mind") return PlannerVariant::kMind;
  if (t == "nn+cp" || t == "single-shot" || t == "ss") return PlannerVariant::kSingleShot;
  if (t == "mb+cp" || t == "constant-velocity" || t == "cv") return PlannerVariant::kConstantVelocity;
  if (t == "none") return PlannerVariant::kNone;
  throw std::invalid_argument("unknown planner variant '" + s + "'");
}

void SimOptions::validate() const {
  predictor.validate();
  plan.aime.validate();
  plan.planner.validate();
  plan.reward.validate();
  if (!(disc_radius > 0.0)) throw std::invalid_argument("sim: disc_radius must be positive");
  if (!(goal_tolerance >= 0.0)) throw std::invalid_argument("sim: goal_tolerance must be non-negative");
  if (chance_samples == 0) throw std::invalid_argument("sim: chance_samples must be positive");
  if (horizon_steps && *horizon_steps < 1) throw std::invalid_argument("sim: horizon_steps must be positive");
}

AgentPolicy parse_policy(const world::PolicySpec& spec) {
  const std::string& who = spec.agent_id;
  const json& p = spec.params;
  if (!p.is_object()) throw SchemaError("policy " + who + ": params must be an object");
  AgentPolicy out;
  if (spec.kind == "playback") {
    out.kind = AgentKind::kPlayback;
    if (!p.contains("trajectory") || !p["trajectory"].is_array() || p["trajectory"].empty())
      throw SchemaError("policy " + who + ": playback needs a non-empty 'trajectory'");
    for (const auto& row : p["trajectory"]) {
      if (!row.is_array() || row.size() != 4)
        throw SchemaError("policy " + who + ": trajectory rows must be [x, y, theta, v]");
      for (const auto& v : row)
        if (!v.is_number()) throw SchemaError("policy " + who + ": trajectory values must be numbers");
      out.trajectory.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>(),
                                row[3].get<double>()});
    }
    return out;
  }
  if (spec.kind == "lane-follow") {
    out.kind = AgentKind::kLaneFollow;
  } else if (spec.kind == "adversarial-trigger") {
    out.kind = AgentKind::kAdversarialTrigger;
  } else {
    throw SchemaError("policy " + who + ": unknown kind '" + spec.kind + "'");
  }
  if (p.contains("route")) out.route = route_param(p["route"], "route", who);
  if (p.contains("target_speed")) {
    out.target_speed = number_param(p, "target_speed", who);
    if (!(*out.target_speed >= 0.0)) throw SchemaError("policy " + who + ": negative target_speed");
  }
  if (p.contains("jitter")) {
    const auto& jt = p["jitter"];
    if (!jt.is_object()) throw SchemaError("policy " + who + ": 'jitter' must be an object");
    if (jt.contains("trigger_time")) out.jitter_trigger_time = number_param(jt, "trigger_time", who);
    if (jt.contains("speed")) out.jitter_speed = number_param(jt, "speed", who);
  }
  if (out.kind != AgentKind::kAdversarialTrigger) return out;

  if (p.contains("trigger_time")) out.trigger_time = number_param(p, "trigger_time", who);
  if (p.contains("trigger_distance")) out.trigger_distance = number_param(p, "trigger_distance", who);
  if (!out.trigger_time && !out.trigger_distance)
    throw SchemaError("policy " + who + ": adversarial-trigger needs 'trigger_time' or 'trigger_distance'");
  if (!p.contains("action") || !p["action"].is_string())
    throw SchemaError("policy " + who + ": adversarial-trigger needs an 'action'");
  const std::string action = p["action"].get<std::string>();
  if (action == "accelerate") {
    out.action = TriggerAction::kAccelerate;
  } else if (action == "brake") {
    out.action = TriggerAction::kBrake;
  } else if (action == "switch-route") {
    out.action = TriggerAction::kSwitchRoute;
    if (!p.contains("new_route")) throw SchemaError("policy " + who + ": switch-route needs 'new_route'");
    out.new_route = route_param(p["new_route"], "new_route", who);
  } else {
    throw SchemaError("policy " + who + ": unknown action '" + action + "'");
  }
  if (p.contains("accel")) out.accel = number_param(p, "accel", who);
  if (p.contains("duration")) out.duration = number_param(p, "duration", who);
  if (!(out.accel >= 0.0) || !(out.duration >= 0.0))
    throw SchemaError("policy " + who + ": accel and duration must be non-negative");
  return out;
}

std::string EpisodeLog::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  out += json{{"event", "end"}, {"termination", termination},
              {"steps", static_cast<int>(records.size())}}.dump();
  out += '\n';
  return out;
}

json to_json(const Metrics& m) {
  return {{"avgSpd", m.avg_speed}, {"maxAbsAcc", m.max_abs_acc}, {"rmsAcc", m.rms_acc},
          {"collision", m.collision}, {"goal_reached", m.goal_reached}, {"steps", m.steps}};
}

Metrics metrics_from_log(const EpisodeLog& log) {
  Metrics m;
  double speed = 0.0, sq = 0.0;
  for (const auto& r : log.records) {
    for (const auto& e : r.at("entities"))
      if (e.at("role") == "ego") speed += e.at("v").get<double>();
    const double a = r.at("ego_control").at("a").get<double>();
    m.max_abs_acc = std::max(m.max_abs_acc, std::abs(a));
    sq += a * a;
  }
  m.steps = static_cast<int>(log.records.size());
  if (m.steps > 0) {
    m.avg_speed = speed / m.steps;
    m.rms_acc = std::sqrt(sq / m.steps);
  }
  m.collision = log.termination == "collision";
  m.goal_reached = log.termination == "goal";
  return m;
}

Episode run_episode(const world::ScenarioFile& scenario, const SimOptions& options,
                    std::uint64_t seed) {
  options.validate();
  const double dt = scenario.sim.dt;
  const int horizon = options.horizon_steps.value_or(scenario.sim.horizon_steps);
  const auto& map = scenario.map;
  world::ObservationHistory obs = scenario.history;
  const std::size_t window = obs.length();
  auto& tracks = obs.mutable_tracks();
  const std::size_t n = tracks.size();

  std::vector<Actor> actors(n);
  std::vector<VehicleState> state(n);
  for (std::size_t i = 0; i < n; ++i) {
    Actor& a = actors[i];
    a.track = i;
    a.ego = i == obs.ego_index();
    state[i] = to_vehicle(tracks[i].states.back());
    for (const auto& spec : scenario.policies)
      if (spec.agent_id == tracks[i].id) a.policy = parse_policy(spec);
    if (a.ego && options.planner != PlannerVariant::kNone) a.policy.reset();
    if (!a.policy && !(a.ego && options.planner != PlannerVariant::kNone)) {
      AgentPolicy keep;
      keep.kind = AgentKind::kLaneFollow;
      a.policy = keep;
    }
    if (!a.policy || a.policy->kind == AgentKind::kPlayback) continue;

    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + i + 1);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double speed_scale = 1.0 + a.policy->jitter_speed * unit(rng);
    const double time_shift = a.policy->jitter_trigger_time * unit(rng);

    std::optional<world::RouteCommand> route = a.policy->route;
    if (!route && a.ego && !scenario.ego_route.lanes.empty()) route = scenario.ego_route;
    if (!route) {
      const auto routes = world::candidate_routes(map, state[i].position(), state[i].theta);
      if (!routes.empty()) route = routes.front();
    }
    if (route) a.path = world::route_polyline(map, *route);
    a.target_speed = a.policy->target_speed.value_or(state[i].v) * speed_scale;
    if (a.policy->trigger_time)
      a.trigger_step = static_cast<int>(std::lround((*a.policy->trigger_time + time_shift) / dt));
  }

  std::optional<Polyline> ego_route;
  if (!scenario.ego_route.lanes.empty()) ego_route = world::route_polyline(map, scenario.ego_route);

  std::unique_ptr<predict::ScenePredictor> predictor;
  policy::PlanSettings plan_settings = options.plan;
  plan_settings.planner.chance_samples = options.chance_samples;
  if (options.planner == PlannerVariant::kConstantVelocity)
    predictor = std::make_unique<predict::ConstantVelocityPredictor>(options.predictor);
  else
    predictor = std::make_unique<predict::IntentionPredictor>(options.predictor);
  plan_settings.build.strategy = options.planner == PlannerVariant::kMind
                                     ? aime::Strategy::kAime
                                     : aime::Strategy::kSingleShot;
  std::optional<world::RouteCommand> command;
  if (!scenario.ego_route.lanes.empty()) command = scenario.ego_route;

  Episode ep;
  Control ego_prev{};
  const std::size_t ego = obs.ego_index();
  std::string termination = "horizon";

  for (int k = 0; k < horizon; ++k) {
    json record;
    record["step"] = k;
    record["t"] = (k + 1) * dt;
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<VehicleState> next = state;
    std::vector<Control> applied(n);
    for (std::size_t i = 0; i < n; ++i) {
      Actor& a = actors[i];
      std::vector<VehicleState> others;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) others.push_back(state[j]);

      if (!a.policy) {
        Control u{kFallbackBrake, 0.0};
        json planner_rec = {{"policy_id", nullptr}, {"tree_hash", nullptr}, {"degraded", false}};
        try {
          plan_settings.seed = seed * 1000003ULL + static_cast<std::uint64_t>(k);
          const auto result = policy::plan(obs, map, command, *predictor, ego_prev, plan_settings);
          const auto& seg = result.selected().segments.front();
          if (!seg.controls.empty()) u = seg.controls.front();
          planner_rec = {{"policy_id", result.candidates[result.selection.index].policy_id},
                         {"tree_hash", tree_summary_hash(result.tree)},
                         {"degraded", result.selection.degraded}};
        } catch (const std::exception& e) {
          planner_rec["degraded"] = true;
          planner_rec["error"] = e.what();
        }
        for (auto it = planner_rec.begin(); it != planner_rec.end(); ++it) record[it.key()] = it.value();
        std::tie(next[i], applied[i]) = advance(state[i], u, dt);
        continue;
      }

      const AgentPolicy& pol = *a.policy;
      if (pol.kind == AgentKind::kPlayback) {
        const auto& traj = pol.trajectory;
        const auto& nxt = traj[std::min<std::size_t>(k + 1, traj.size() - 1)];
        const auto& cur = traj[std::min<std::size_t>(k, traj.size() - 1)];
        next[i] = to_vehicle(nxt);
        applied[i].a = (nxt.v - cur.v) / dt;
        const double ds = (nxt.position() - cur.position()).norm();
        applied[i].kappa = ds > 1e-9 ? normalize_angle(nxt.theta - cur.theta) / ds : 0.0;
        continue;
      }

      if (pol.kind == AgentKind::kAdversarialTrigger && !a.triggered) {
        bool fire = a.trigger_step >= 0 && k >= a.trigger_step;
        if (pol.trigger_distance && (state[i].position() - state[ego].position()).norm() <= *pol.trigger_distance)
          fire = true;
        if (fire) {
          a.triggered = true;
          a.trigger_end = k + static_cast<int>(std::lround(pol.duration / dt));
          if (pol.action == TriggerAction::kSwitchRoute) a.path = world::route_polyline(map, *pol.new_route);
        }
      }
      Control u;
      u.kappa = pursuit(state[i], a.path);
      if (a.triggered && k < a.trigger_end && pol.action != TriggerAction::kSwitchRoute) {
        u.a = pol.action == TriggerAction::kAccelerate ? pol.accel : -pol.accel;
        if (pol.action == TriggerAction::kAccelerate)
          a.target_speed = std::max(a.target_speed, state[i].v + u.a * dt);
      } else {
        u.a = follow_accel(state[i], a.path, a.target_speed, others);
      }
      std::tie(next[i], applied[i]) = advance(state[i], u, dt);
    }

    state = next;
    for (std::size_t i = 0; i < n; ++i) {
      auto& st = tracks[i].states;
      st.push_back(to_entity(state[i]));
      if (st.size() > window) st.erase(st.begin());
    }
    ego_prev = applied[ego];

    json ents = json::array();
    for (std::size_t i = 0; i < n; ++i) ents.push_back(state_json(tracks[i].id, i == ego, state[i]));
    record["entities"] = std::move(ents);
    record["ego_control"] = {{"a", applied[ego].a}, {"kappa", applied[ego].kappa}};
    if (!record.contains("policy_id")) {
      record["policy_id"] = nullptr;
      record["tree_hash"] = nullptr;
      record["degraded"] = false;
    }
    record["wall_ms"] = options.record_timing
                            ? std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0).count()
                            : 0.0;
    ep.log.records.push_back(std::move(record));

    bool hit = false;
    for (std::size_t j = 0; j < n; ++j)
      if (j != ego && (state[j].position() - state[ego].position()).norm() < 2.0 * options.disc_radius)
        hit = true;
    if (hit) {
      termination = "collision";
      break;
    }
    if (ego_route && ego_route->project(state[ego].position()).s >=
                         ego_route->length() - options.goal_tolerance) {
      termination = "goal";
      break;
    }
  }
  ep.log.termination = termination;
  ep.metrics = metrics_from_log(ep.log);
  return ep;
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream out;
  out << "variant,seed,avgSpd,maxAbsAcc,rmsAcc,collision,goal\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%llu,%.6f,%.6f,%.6f,%d,%d\n", to_string(r.variant).c_str(),
                  static_cast<unsigned long long>(r.seed), r.metrics.avg_speed,
                  r.metrics.max_abs_acc, r.metrics.rms_acc, r.metrics.collision ? 1 : 0,
                  r.metrics.goal_reached ? 1 : 0);
    out << buf;
  }
  for (const auto& m : means) {
    std::snprintf(buf, sizeof buf, "%s,mean,%.6f,%.6f,%.6f,%d,%d\n", to_string(m.variant).c_str(),
                  m.avg_speed, m.max_abs_acc, m.rms_acc, m.collisions, m.goals);
    out << buf;
  }
  return out.str();
}

ComparisonTable compare_planners(const world::ScenarioFile& scenario,
                                 const std::vector<PlannerVariant>& variants,
                                 const std::vector<std::uint64_t>& seeds,
                                 const SimOptions& options, int jobs) {
  ComparisonTable table;
  for (auto v : variants)
    for (auto s : seeds) table.rows.push_back({v, s, {}});

  const std::size_t total = table.rows.size();
  std::vector<std::exception_ptr> errors(total);
  auto run = [&](std::size_t i) {
    try {
      SimOptions o = options;
      o.planner = table.rows[i].variant;
      table.rows[i].metrics = run_episode(scenario, o, table.rows[i].seed).metrics;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), std::max<std::size_t>(total, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < total; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < total; i += workers) run(i);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (auto v : variants) {
    ComparisonTable::Summary s{v};
    int count = 0;
    for (const auto& r : table.rows) {
      if (r.variant != v) continue;
      s.avg_speed += r.metrics.avg_speed;
      s.max_abs_acc += r.metrics.max_abs_acc;
      s.rms_acc += r.metrics.rms_acc;
      s.collisions += r.metrics.collision ? 1 : 0;
      s.goals += r.metrics.goal_reached ? 1 : 0;
      ++count;
    }
    if (count > 0) {
      s.avg_speed /= count;
      s.max_abs_acc /= count;
      s.rms_acc /= count;
    }
    table.means.push_back(s);
  }
  return table;
}

}  // namespace mind::sim
