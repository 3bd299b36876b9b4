#include "mind/aime.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mind/errors.hpp"

namespace mind::aime {

using gmm::PredictedScenario;
using gmm::ScenePrediction;

void AimeConfig::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("aime: beta must be > 0");
  if (!(delta > 0.0)) throw std::invalid_argument("aime: delta must be > 0");
  if (d_max < 0) throw std::invalid_argument("aime: d_max must be >= 0");
  if (alpha_min < 0.0 || alpha_min >= 1.0) throw std::invalid_argument("aime: alpha_min must lie in [0, 1)");
  if (t_min < 1) throw std::invalid_argument("aime: t_min must be >= 1");
  if (horizon < 1) throw std::invalid_argument("aime: horizon must be >= 1");
  if (route_dev_max < 0.0) throw std::invalid_argument("aime: route_dev_max must be >= 0");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kSingleShot:
      return "SS";
    case Strategy::kAime:
      return "AIME";
    case Strategy::kBruteForce:
      return "BF-SRCH";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "ss" || s == "SS") return Strategy::kSingleShot;
  if (s == "aime" || s == "AIME") return Strategy::kAime;
  if (s == "bf" || s == "BF-SRCH" || s == "bf-srch") return Strategy::kBruteForce;
  throw InputError("unknown strategy '" + s + "' (expected ss, aime or bf)");
}

std::vector<int> ScenarioTree::path_to(int node) const {
  std::vector<int> out;
  for (int n = node; n > 0; n = nodes[static_cast<std::size_t>(n)].parent) out.push_back(n);
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<Vec2> ScenarioTree::mean_path(int node, std::size_t entity) const {
  std::vector<Vec2> out{start_positions.at(entity)};
  for (int n : path_to(node)) {
    for (const auto& sn : nodes[static_cast<std::size_t>(n)].segment.nodes) {
      out.push_back(sn.entities[entity].mean);
    }
  }
  return out;
}

InteractionModality ScenarioTree::path_modality(int node, double delta) const {
  InteractionModality out;
  const auto ego = mean_path(node, 0);
  for (std::size_t a = 1; a < entity_ids.size(); ++a) {
    out.push_back(homotopy(ego, mean_path(node, a), delta));
  }
  return out;
}

int ScenarioTree::max_depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

double uncertainty_rate(const PredictedScenario& scenario, std::size_t t) {
  if (t < 1 || t > scenario.length()) throw std::out_of_range("uncertainty_rate: step out of range");
  const auto& cur = scenario.nodes[t - 1].entities;
  double rate = 0.0;
  for (std::size_t e = 0; e < cur.size(); ++e) {
    const double now = std::sqrt(std::max(0.0, cur[e].cov.trace()));
    const double before =
        t >= 2 ? std::sqrt(std::max(0.0, scenario.nodes[t - 2].entities[e].cov.trace())) : 0.0;
    rate = std::max(rate, now - before);
  }
  return rate;
}

std::optional<int> branch_time(const PredictedScenario& scenario, double beta, int t_min,
                               int horizon) {
  if (scenario.nodes.empty()) throw std::invalid_argument("branch_time: empty scenario");
  int last_ok = 0;
  for (std::size_t t = 1; t <= scenario.length(); ++t) {
    if (uncertainty_rate(scenario, t) >= beta) break;
    last_ok = static_cast<int>(t);
  }
  const int tb = std::max(last_ok, t_min);
  if (tb >= horizon) return std::nullopt;
  return tb;
}

int homotopy(const std::vector<Vec2>& ego, const std::vector<Vec2>& agent, double delta) {
  if (ego.size() != agent.size()) throw std::invalid_argument("homotopy: length mismatch");
  if (ego.size() < 2) return 0;
  double prev = 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < ego.size(); ++t) {
    Vec2 rel = agent[t] - ego[t];
    if (rel.norm() < 1e-12) rel = 1e-6 * Vec2(std::cos(prev), std::sin(prev));
    const double bearing = std::atan2(rel.y(), rel.x());
    if (t > 0) total += normalize_angle(bearing - prev);
    prev = bearing;
  }
  return static_cast<int>(std::floor(total / delta + 0.5));
}

InteractionModality modality(const PredictedScenario& scenario, double delta) {
  return modality(scenario, delta, {});
}

InteractionModality modality(const PredictedScenario& scenario, double delta,
                             const std::vector<std::vector<Vec2>>& prefix) {
  InteractionModality out;
  const std::size_t n = scenario.entity_count();
  if (n == 0) return out;
  auto path = [&](std::size_t e) {
    std::vector<Vec2> p = e < prefix.size() ? prefix[e] : std::vector<Vec2>{};
    const auto tail = scenario.mean_path(e);
    p.insert(p.end(), tail.begin(), tail.end());
    return p;
  };
  const auto ego = path(0);
  for (std::size_t a = 1; a < n; ++a) out.push_back(homotopy(ego, path(a), delta));
  return out;
}

ScenePrediction prune_and_merge(const ScenePrediction& pred, const std::optional<Polyline>& route,
                                const AimeConfig& cfg,
                                const std::vector<std::vector<Vec2>>& prefix) {
  struct Item {
    std::size_t index;
    InteractionModality modality;
  };
  std::vector<Item> kept;
  for (std::size_t k = 0; k < pred.scenarios.size(); ++k) {
    const auto& sc = pred.scenarios[k];
    if (sc.weight < cfg.alpha_min) continue;
    if (route && route->size() >= 2) {
      bool deviates = false;
      for (const auto& node : sc.nodes) {
        if (std::abs(route->project(node.entities.front().mean).lateral) > cfg.route_dev_max) {
          deviates = true;
          break;
        }
      }
      if (deviates) continue;
    }
    kept.push_back({k, modality(sc, cfg.delta, prefix)});
  }

  ScenePrediction out;
  out.entity_ids = pred.entity_ids;
  if (kept.empty()) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < pred.scenarios.size(); ++k) {
      if (pred.scenarios[k].weight > pred.scenarios[best].weight) best = k;
    }
    out.scenarios.push_back(pred.scenarios[best]);
    out.scenarios.back().weight = 1.0;
    return out;
  }

  struct Group {
    InteractionModality modality;
    std::size_t representative;
    double weight;
  };
  std::vector<Group> groups;
  for (const auto& item : kept) {
    const double w = pred.scenarios[item.index].weight;
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.modality == item.modality; });
    if (it == groups.end()) {
      groups.push_back({item.modality, item.index, w});
    } else {
      if (w > pred.scenarios[it->representative].weight) it->representative = item.index;
      it->weight += w;
    }
  }
  double total = 0.0;
  for (const auto& g : groups) total += g.weight;
  std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.modality < b.modality;
  });
  for (const auto& g : groups) {
    PredictedScenario sc = pred.scenarios[g.representative];
    sc.weight = g.weight / total;
    out.scenarios.push_back(std::move(sc));
  }
  return out;
}

world::ObservationHistory update_pseudo_observation(const world::ObservationHistory& obs,
                                                    const PredictedScenario& scenario,
                                                    std::size_t upto) {
  if (upto > scenario.length()) throw std::out_of_range("update_pseudo_observation: beyond scenario");
  if (upto == 0) return obs;
  auto tracks = obs.tracks();
  const auto order = obs.entity_order();
  const double dt = obs.dt();
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& states = tracks[order[k]].states;
    const std::size_t h = states.size();
    world::EntityState prev = states.back();
    for (std::size_t t = 0; t < upto; ++t) {
      const Vec2 p = scenario.nodes[t].entities[k].mean;
      const Vec2 d = p - prev.position();
      world::EntityState s;
      s.x = p.x();
      s.y = p.y();
      s.v = d.norm() / dt;
      s.theta = d.norm() > 1e-6 ? std::atan2(d.y(), d.x()) : prev.theta;
      states.push_back(s);
      prev = s;
    }
    states.erase(states.begin(), states.end() - static_cast<std::ptrdiff_t>(h));
  }
  return world::ObservationHistory(dt, std::move(tracks));
}

namespace {

PredictedScenario slice(const PredictedScenario& sc, std::size_t count) {
  PredictedScenario out;
  out.weight = sc.weight;
  out.label = sc.label;
  out.nodes.assign(sc.nodes.begin(), sc.nodes.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

}  // namespace

ScenarioTree build_tree(const world::ObservationHistory& obs, const world::LaneGraph& map,
                        const std::optional<world::RouteCommand>& command,
                        const predict::ScenePredictor& predictor, const AimeConfig& cfg,
                        const BuildOptions& options) {
  cfg.validate();
  const int horizon = cfg.horizon;
  int depth_cap = cfg.d_max;
  int interval = 0;
  if (options.strategy == Strategy::kBruteForce) {
    if (options.bf_levels < 1) throw std::invalid_argument("bf_levels must be >= 1");
    depth_cap = options.bf_levels - 1;
    interval = std::max(1, horizon / options.bf_levels);
  }
  std::optional<Polyline> route;
  if (command && !command->lanes.empty()) route = world::route_polyline(map, *command);

  ScenarioTree tree;
  tree.horizon = horizon;
  for (std::size_t i : obs.entity_order()) {
    tree.entity_ids.push_back(obs.tracks()[i].id);
    tree.start_positions.push_back(obs.tracks()[i].states.back().position());
  }
  TreeNode root;
  root.pseudo_obs = obs;
  tree.nodes.push_back(std::move(root));

  std::vector<int> frontier{0};
  while (!frontier.empty()) {
    std::vector<int> next;
    for (int id : frontier) {
      const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
      if (node.depth > depth_cap) continue;
      const int entry = node.end_step;
      const int remaining = horizon - entry;
      ScenePrediction pred = predictor.predict(node.pseudo_obs, map, command, remaining);
      ++tree.predictor_calls;
      std::vector<std::vector<Vec2>> prefix;
      for (std::size_t e = 0; e < tree.entity_ids.size(); ++e) prefix.push_back(tree.mean_path(id, e));
      if (options.strategy == Strategy::kAime) pred = prune_and_merge(pred, route, cfg, prefix);

      const int depth = node.depth;
      const double mass = node.mass;
      const world::ObservationHistory parent_obs = node.pseudo_obs;
      for (const auto& sc : pred.scenarios) {
        std::optional<int> tb;
        switch (options.strategy) {
          case Strategy::kSingleShot:
            break;
          case Strategy::kAime:
            tb = branch_time(sc, cfg.beta, cfg.t_min, remaining);
            break;
          case Strategy::kBruteForce:
            if (interval < remaining) tb = interval;
            break;
        }
        TreeNode child;
        child.id = static_cast<int>(tree.nodes.size());
        child.parent = id;
        child.depth = depth + 1;
        child.entry_step = entry;
        child.mass = mass * sc.weight;
        child.modality = modality(sc, cfg.delta, prefix);
        if (tb && child.depth <= depth_cap) {
          child.end_step = entry + *tb;
          child.segment = slice(sc, static_cast<std::size_t>(*tb));
          child.pseudo_obs = update_pseudo_observation(parent_obs, sc, static_cast<std::size_t>(*tb));
          next.push_back(child.id);
        } else {
          child.end_step = horizon;
          child.is_end = true;
          child.segment = slice(sc, static_cast<std::size_t>(remaining));
          tree.leaves.push_back(child.id);
        }
        tree.nodes[static_cast<std::size_t>(id)].children.push_back(child.id);
        tree.nodes.push_back(std::move(child));
        if (tree.nodes.size() > options.node_budget) {
          throw ResourceError("scenario tree exceeded the node budget of " +
                              std::to_string(options.node_budget));
        }
      }
      // Expanded nodes no longer need their pseudo-observation.
      tree.nodes[static_cast<std::size_t>(id)].pseudo_obs =
          id == 0 ? tree.nodes.front().pseudo_obs : world::ObservationHistory{};
    }
    frontier = std::move(next);
  }
  return tree;
}

std::vector<Policy> enumerate_policies(const ScenarioTree& tree) {
  std::vector<Policy> out;
  for (int child : tree.root().children) {
    Policy p;
    p.root_child = child;
    std::vector<int> stack{child};
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      p.nodes.push_back(n);
      const auto& node = tree.nodes[static_cast<std::size_t>(n)];
      if (node.children.empty()) p.leaves.push_back(n);
      for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) stack.push_back(*it);
    }
    p.mass = tree.nodes[static_cast<std::size_t>(child)].mass;
    out.push_back(std::move(p));
  }
  return out;
}

std::set<InteractionModality> leaf_modalities(const ScenarioTree& tree, double delta) {
  std::set<InteractionModality> out;
  for (int leaf : tree.leaves) out.insert(tree.path_modality(leaf, delta));
  return out;
}

std::vector<BenchRow> bench_strategies(const world::ObservationHistory& obs,
                                       const world::LaneGraph& map,
                                       const std::optional<world::RouteCommand>& command,
                                       const predict::ScenePredictor& predictor,
                                       const AimeConfig& cfg, const BuildOptions& options) {
  std::vector<BenchRow> rows;
  std::vector<std::set<InteractionModality>> mods;
  for (Strategy s : {Strategy::kSingleShot, Strategy::kAime, Strategy::kBruteForce}) {
    BuildOptions o = options;
    o.strategy = s;
    const ScenarioTree tree = build_tree(obs, map, command, predictor, cfg, o);
    BenchRow row;
    row.strategy = s;
    row.scenario_count = tree.leaves.size();
    row.predictor_calls = tree.predictor_calls;
    rows.push_back(row);
    mods.push_back(leaf_modalities(tree, cfg.delta));
  }
  const auto& oracle = mods.back();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t hit = 0;
    for (const auto& m : mods[i]) hit += oracle.count(m);
    rows[i].coverage = oracle.empty() ? 100.0 : 100.0 * static_cast<double>(hit) /
                                                    static_cast<double>(oracle.size());
    rows[i].modality_count = mods[i].size();
    rows[i].cost_ratio = static_cast<double>(rows[i].predictor_calls) /
                         static_cast<double>(rows.front().predictor_calls);
  }
  return rows;
}

nlohmann::json tree_to_json(const ScenarioTree& tree, double delta) {
  using nlohmann::json;
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    json entities = json::array();
    for (std::size_t e = 0; e < tree.entity_ids.size(); ++e) {
      json mean = json::array();
      json cov = json::array();
      for (const auto& sn : n.segment.nodes) {
        const auto& g = sn.entities[e];
        mean.push_back({g.mean.x(), g.mean.y()});
        cov.push_back({g.cov(0, 0), g.cov(0, 1), g.cov(1, 1)});
      }
      entities.push_back({{"id", tree.entity_ids[e]}, {"mean", mean}, {"cov", cov}});
    }
    json node = {{"id", n.id},
                 {"parent", n.parent},
                 {"depth", n.depth},
                 {"entry_step", n.entry_step},
                 {"weight", n.mass},
                 {"label", n.segment.label},
                 {"modality", n.id == 0 ? json::array() : json(n.modality)},
                 {"path_modality", n.id == 0 ? json::array() : json(tree.path_modality(n.id, delta))},
                 {"entities", entities}};
    if (n.id == 0) {
      node["t_b"] = 0;
    } else if (n.is_end) {
      node["t_b"] = "END";
    } else {
      node["t_b"] = n.end_step;
    }
    nodes.push_back(std::move(node));
  }
  return {{"horizon", tree.horizon},
          {"entity_ids", tree.entity_ids},
          {"leaf_count", tree.leaves.size()},
          {"max_depth", tree.max_depth()},
          {"predictor_calls", tree.predictor_calls},
          {"nodes", nodes}};
}

}  // namespace mind::aime
