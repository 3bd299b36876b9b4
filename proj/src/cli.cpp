#include "mind/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <variant>

#include "mind/svg.hpp"

namespace mind::cli {

using json = nlohmann::json;

namespace {

using FieldPtr = std::variant<double*, int*, std::size_t*, bool*>;

struct Field {
  const char* name;
  FieldPtr ptr;
};

using Section = std::pair<const char*, std::vector<Field>>;

std::vector<Section> sections(RunConfig& c) {
  auto& p = c.predictor;
  auto& a = c.aime;
  auto& b = c.build;
  auto& l = c.planner;
  auto& r = c.reward;
  auto& s = c.sim;
  return {
      {"predictor",
       {{"modes_k", &p.modes_k}, {"horizon", &p.horizon}, {"dt", &p.dt}, {"sigma_a", &p.sigma_a},
        {"yield_decel", &p.yield_decel}, {"assert_accel", &p.assert_accel},
        {"assert_penalty", &p.assert_penalty}, {"ego_responses", &p.ego_responses}, {"max_decel", &p.max_decel},
        {"idm_accel", &p.idm_accel}, {"idm_comfort_decel", &p.idm_comfort_decel},
        {"idm_time_headway", &p.idm_time_headway}, {"idm_min_gap", &p.idm_min_gap},
        {"vehicle_length", &p.vehicle_length}, {"arrival_time_scale", &p.arrival_time_scale},
        {"stop_buffer", &p.stop_buffer}, {"clear_margin", &p.clear_margin},
        {"route_length", &p.route_length}, {"interaction_sigma", &p.interaction_sigma},
        {"interaction_range", &p.interaction_range}, {"straight_fallback", &p.straight_fallback}}},
      {"aime",
       {{"beta", &a.beta}, {"delta", &a.delta}, {"d_max", &a.d_max}, {"alpha_min", &a.alpha_min},
        {"route_dev_max", &a.route_dev_max}, {"t_min", &a.t_min}, {"horizon", &a.horizon},
        {"bf_levels", &b.bf_levels}, {"node_budget", &b.node_budget}}},
      {"planner",
       {{"dt", &l.dt}, {"target_speed", &l.target_speed}, {"w_safe", &l.w_safe},
        {"corridor_margin", &l.corridor_margin}, {"w_speed", &l.w_speed},
        {"w_lateral", &l.w_lateral}, {"w_kin", &l.w_kin}, {"v_min", &l.v_min},
        {"v_max", &l.v_max}, {"a_min", &l.a_min}, {"a_max", &l.a_max},
        {"kappa_max", &l.kappa_max}, {"lat_acc_max", &l.lat_acc_max}, {"w_acc", &l.w_acc},
        {"w_kappa", &l.w_kappa}, {"w_jerk", &l.w_jerk}, {"w_dkappa", &l.w_dkappa},
        {"gamma", &l.gamma}, {"decision_cov_floor", &l.decision_cov_floor}, {"p", &l.p},
        {"w_col", &l.w_col}, {"footprint_radius", &l.footprint_radius},
        {"max_iterations", &l.max_iterations}, {"tolerance", &l.tolerance},
        {"reg_init", &l.reg_init}, {"reg_min", &l.reg_min}, {"reg_max", &l.reg_max},
        {"chance_samples", &l.chance_samples}}},
      {"reward",
       {{"eta", &r.eta}, {"lambda_safety", &r.lambda_safety},
        {"lambda_efficiency", &r.lambda_efficiency}, {"lambda_comfort", &r.lambda_comfort},
        {"target_speed", &r.target_speed}, {"a_max", &r.a_max}, {"ay_max", &r.ay_max},
        {"safety_saturation", &r.safety_saturation}}},
      {"sim",
       {{"disc_radius", &s.disc_radius}, {"goal_tolerance", &s.goal_tolerance},
        {"chance_samples", &s.chance_samples}}},
  };
}

json field_value(const FieldPtr& f) {
  return std::visit([](auto* p) { return json(*p); }, f);
}

void set_field(const FieldPtr& f, const json& v, const std::string& where) {
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean()) throw SchemaError("config " + where + " must be a boolean");
          *p = v.get<bool>();
        } else if constexpr (std::is_same_v<T, double>) {
          if (!v.is_number()) throw SchemaError("config " + where + " must be a number");
          *p = v.get<double>();
        } else {
          if (!v.is_number_integer()) throw SchemaError("config " + where + " must be an integer");
          if constexpr (std::is_same_v<T, std::size_t>) {
            if (v.get<long long>() < 0) throw SchemaError("config " + where + " must be non-negative");
          }
          *p = v.get<T>();
        }
      },
      f);
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write output file '" + path + "'");
  f << text;
  if (!f) throw InputError("failed writing output file '" + path + "'");
}

json route_json(const std::optional<world::RouteCommand>& r) {
  if (!r) return nullptr;
  return r->lanes;
}

/// Net heading change along a route from the ego's projection to its end.
double turn_angle(const Polyline& route, const Vec2& from) {
  const double s = route.project(from).s;
  return normalize_angle(route.heading(route.length()) - route.heading(s));
}

std::ostream& summary_stream(const CommandArgs& args, std::ostream& out) {
  return args.out.empty() ? std::cerr : out;
}

}  // namespace

void RunConfig::validate() const {
  predictor.validate();
  aime.validate();
  planner.validate();
  reward.validate();
  sim_options().validate();
  if (jobs < 1) throw std::invalid_argument("config: jobs must be at least 1");
  if (build.bf_levels < 1) throw std::invalid_argument("config: bf_levels must be at least 1");
  if (build.node_budget < 1) throw std::invalid_argument("config: node_budget must be positive");
}

policy::PlanSettings RunConfig::plan_settings() const {
  policy::PlanSettings s;
  s.aime = aime;
  s.build = build;
  s.planner = planner;
  s.reward = reward;
  s.seed = seed;
  s.jobs = jobs;
  return s;
}

sim::SimOptions RunConfig::sim_options() const {
  sim::SimOptions o = sim;
  o.predictor = predictor;
  o.plan = plan_settings();
  return o;
}

json to_json(const RunConfig& c) {
  RunConfig copy = c;
  json out;
  for (const auto& [name, fields] : sections(copy)) {
    json sec = json::object();
    for (const auto& f : fields) sec[f.name] = field_value(f.ptr);
    out[name] = sec;
  }
  out["aime"]["strategy"] = aime::to_string(c.build.strategy);
  out["sim"]["planner"] = sim::to_string(c.sim.planner);
  if (c.sim.horizon_steps) out["sim"]["horizon_steps"] = *c.sim.horizon_steps;
  out["seed"] = c.seed;
  out["jobs"] = c.jobs;
  return out;
}

void merge(RunConfig& c, const json& j) {
  if (!j.is_object()) throw SchemaError("config must be a JSON object");
  auto secs = sections(c);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = it.key();
    if (key == "seed") {
      if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0))
        throw SchemaError("config seed must be a non-negative integer");
      c.seed = it->get<std::uint64_t>();
      continue;
    }
    if (key == "jobs") {
      if (!it->is_number_integer()) throw SchemaError("config jobs must be an integer");
      c.jobs = it->get<int>();
      continue;
    }
    auto sec = std::find_if(secs.begin(), secs.end(), [&](const Section& s) { return key == s.first; });
    if (sec == secs.end()) throw SchemaError("config: unknown key '" + key + "'");
    if (!it->is_object()) throw SchemaError("config section '" + key + "' must be an object");
    for (auto kv = it->begin(); kv != it->end(); ++kv) {
      const std::string name = kv.key();
      const std::string where = key + "." + name;
      if (key == "aime" && name == "strategy") {
        if (!kv->is_string()) throw SchemaError("config " + where + " must be a string");
        c.build.strategy = aime::parse_strategy(kv->get<std::string>());
        continue;
      }
      if (key == "sim" && name == "planner") {
        if (!kv->is_string()) throw SchemaError("config " + where + " must be a string");
        try {
          c.sim.planner = sim::parse_variant(kv->get<std::string>());
        } catch (const std::invalid_argument& e) {
          throw SchemaError(std::string("config ") + e.what());
        }
        continue;
      }
      if (key == "sim" && name == "horizon_steps") {
        if (!kv->is_number_integer()) throw SchemaError("config " + where + " must be an integer");
        c.sim.horizon_steps = kv->get<int>();
        continue;
      }
      auto f = std::find_if(sec->second.begin(), sec->second.end(),
                            [&](const Field& fd) { return name == fd.name; });
      if (f == sec->second.end()) throw SchemaError("config: unknown key '" + where + "'");
      set_field(f->ptr, *kv, where);
    }
  }
}

void merge_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON in config '" + path + "': " + e.what());
  }
  merge(c, j);
}

std::optional<world::RouteCommand> resolve_command(const world::ScenarioFile& scenario,
                                                   const std::optional<std::string>& text) {
  if (!text) {
    if (scenario.ego_route.lanes.empty()) return std::nullopt;
    return scenario.ego_route;
  }
  const std::string& t = *text;
  if (t == "none") return std::nullopt;
  if (t == "left" || t == "straight" || t == "right") {
    const auto& ego = scenario.history.ego().states.back();
    const auto routes = world::candidate_routes(scenario.map, ego.position(), ego.theta);
    constexpr double kTurn = std::numbers::pi / 4.0;
    for (const auto& r : routes) {
      const double turn = turn_angle(world::route_polyline(scenario.map, r), ego.position());
      const char* kind = turn > kTurn ? "left" : (turn < -kTurn ? "right" : "straight");
      if (t == kind) return r;
    }
    throw InputError("no candidate route of the ego goes " + t);
  }
  world::RouteCommand r;
  std::stringstream ss(t);
  for (std::string id; std::getline(ss, id, ',');) {
    if (id.empty()) throw InputError("empty lane id in --command '" + t + "'");
    if (!scenario.map.contains(id)) throw ReferenceError("--command names unknown lane '" + id + "'");
    r.lanes.push_back(id);
  }
  if (r.lanes.empty()) throw InputError("--command is empty");
  if (!world::is_connected(scenario.map, r))
    throw InputError("--command lanes are not connected by successor edges");
  return r;
}

json prediction_to_json(const gmm::ScenePrediction& pred) {
  json scenarios = json::array();
  for (const auto& sc : pred.scenarios) {
    json entities = json::array();
    for (std::size_t e = 0; e < sc.entity_count(); ++e) {
      json mean = json::array();
      json cov = json::array();
      for (const auto& n : sc.nodes) {
        const auto& g = n.entities[e];
        mean.push_back({g.mean.x(), g.mean.y()});
        cov.push_back({g.cov(0, 0), g.cov(0, 1), g.cov(1, 1)});
      }
      entities.push_back({{"id", pred.entity_ids[e]}, {"mean", mean}, {"cov", cov}});
    }
    scenarios.push_back({{"weight", sc.weight}, {"label", sc.label}, {"entities", entities}});
  }
  return {{"entity_ids", pred.entity_ids}, {"scenarios", scenarios}};
}

int cmd_predict(const CommandArgs& args, const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const auto scenario = world::load_scenario(args.scenario);
  const auto command = resolve_command(scenario, args.command);
  const predict::IntentionPredictor predictor(cfg.predictor);
  const auto pred = predictor.predict(scenario.history, scenario.map, command, cfg.predictor.horizon);
  const json doc = {{"config", to_json(cfg)},
                    {"command", route_json(command)},
                    {"prediction", prediction_to_json(pred)}};
  write_text(args.out, world::canonical_dump(doc), out);
  if (!args.svg.empty()) write_text(args.svg, svg::prediction_svg(scenario, pred), out);
  return kOk;
}

int cmd_tree(const CommandArgs& args, const RunConfig& cfg, std::ostream& out) {
  RunConfig c = cfg;
  c.build.strategy = aime::parse_strategy(args.strategy);
  c.validate();
  const auto scenario = world::load_scenario(args.scenario);
  const auto command = resolve_command(scenario, args.command);
  const predict::IntentionPredictor predictor(c.predictor);
  const auto tree = aime::build_tree(scenario.history, scenario.map, command, predictor, c.aime, c.build);

  json modalities = json::array();
  for (int leaf : tree.leaves) modalities.push_back(tree.path_modality(leaf, c.aime.delta));
  const json doc = {{"config", to_json(c)},
                    {"command", route_json(command)},
                    {"tree", aime::tree_to_json(tree, c.aime.delta)},
                    {"summary",
                     {{"leaf_count", tree.leaves.size()},
                      {"max_depth", tree.max_depth()},
                      {"predictor_calls", tree.predictor_calls},
                      {"leaf_modalities", modalities}}}};
  write_text(args.out, world::canonical_dump(doc), out);
  if (!args.svg.empty()) write_text(args.svg, svg::tree_svg(scenario, tree), out);

  auto& s = summary_stream(args, out);
  s << "leaves " << tree.leaves.size() << "\n";
  s << "depth " << tree.max_depth() << "\n";
  s << "modalities";
  for (const auto& m : modalities) s << " " << m.dump();
  s << "\n";
  return kOk;
}

int cmd_plan(const CommandArgs& args, const RunConfig& cfg, std::ostream& out) {
  RunConfig c = cfg;
  c.build.strategy = aime::parse_strategy(args.strategy);
  c.validate();
  const auto scenario = world::load_scenario(args.scenario);
  const auto command = resolve_command(scenario, args.command);
  const predict::IntentionPredictor predictor(c.predictor);
  const auto result = policy::plan(scenario.history, scenario.map, command, predictor, {},
                                   c.plan_settings());
  const auto& selected = result.selected();
  const auto& chance = result.chance[result.selection.index];
  json doc = {{"config", to_json(c)},
              {"command", route_json(command)},
              {"plan", contingency::to_json(selected)},
              {"report", policy::report_json(result.candidates, result.selection)},
              {"selected_policy", result.candidates[result.selection.index].policy_id},
              {"chance",
               {{"pass", chance.pass},
                {"max_violation", chance.max_violation},
                {"threshold", chance.threshold}}},
              {"tree_summary",
               {{"leaf_count", result.tree.leaves.size()},
                {"max_depth", result.tree.max_depth()},
                {"predictor_calls", result.tree.predictor_calls},
                {"policy_count", result.policies.size()}}}};
  if (result.selection.degraded)
    doc["warning"] = "no candidate satisfies the chance constraint; selected the lowest violation";
  write_text(args.out, world::canonical_dump(doc), out);
  if (!args.svg.empty()) write_text(args.svg, svg::plan_svg(scenario, result.tree, selected), out);
  return kOk;
}

int cmd_sim(const CommandArgs& args, const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const auto scenario = world::load_scenario(args.scenario);
  const auto episode = sim::run_episode(scenario, cfg.sim_options(), cfg.seed);
  if (!args.log.empty()) write_text(args.log, episode.log.to_jsonl(), out);
  const json doc = {{"config", to_json(cfg)},
                    {"metrics", sim::to_json(episode.metrics)},
                    {"termination", episode.log.termination}};
  write_text(args.out, world::canonical_dump(doc), out);
  return kOk;
}

int cmd_bench(const CommandArgs& args, const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  std::ostringstream strategies;
  strategies << "fixture,strategy,coverage,Scen.Num.,Comp.Cost,predictor_calls\n";
  const predict::IntentionPredictor predictor(cfg.predictor);
  char buf[256];
  for (const auto& path : args.fixtures) {
    const auto scenario = world::load_scenario(path);
    std::optional<world::RouteCommand> command;
    if (!scenario.ego_route.lanes.empty()) command = scenario.ego_route;
    const auto rows = aime::bench_strategies(scenario.history, scenario.map, command, predictor,
                                             cfg.aime, cfg.build);
    const std::string name = std::filesystem::path(path).stem().string();
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.1f,%zu,%.1fx,%zu\n", name.c_str(),
                    aime::to_string(r.strategy).c_str(), r.coverage, r.scenario_count, r.cost_ratio,
                    r.predictor_calls);
      strategies << buf;
    }
  }

  std::string planners;
  if (!args.compare_scenario.empty() && args.seeds > 0 && !args.planners.empty()) {
    std::vector<sim::PlannerVariant> variants;
    for (const auto& p : args.planners) {
      try {
        variants.push_back(sim::parse_variant(p));
      } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
      }
    }
    std::vector<std::uint64_t> seeds;
    for (int s = 0; s < args.seeds; ++s) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(s));
    const auto scenario = world::load_scenario(args.compare_scenario);
    planners = sim::compare_planners(scenario, variants, seeds, cfg.sim_options(), cfg.jobs).to_csv();
  }

  if (args.out.empty()) {
    out << strategies.str();
    if (!planners.empty()) out << "\n" << planners;
    return kOk;
  }
  std::filesystem::create_directories(args.out);
  const std::filesystem::path dir(args.out);
  write_text((dir / "strategies.csv").string(), strategies.str(), out);
  if (!planners.empty()) write_text((dir / "planners.csv").string(), planners, out);
  write_text((dir / "config.json").string(), world::canonical_dump(to_json(cfg)), out);
  return kOk;
}

}  // namespace mind::cli
