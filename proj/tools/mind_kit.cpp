#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mind/cli.hpp"

namespace {

struct Flags {
  mind::cli::CommandArgs args;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<double> beta, delta, p, gamma;
  std::optional<int> dmax, horizon;
  std::optional<std::string> strategy, planner;
};

void add_common(CLI::App* cmd, Flags& f, bool needs_scenario) {
  auto* opt = cmd->add_option("--scenario", f.args.scenario, "Scenario JSON file");
  if (needs_scenario) opt->required();
  cmd->add_option("--out", f.args.out, "Output file (directory for bench); stdout when omitted");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--config", f.config, "JSON config file (falls back to MIND_KIT_CONFIG)");
  cmd->add_option("--jobs", f.jobs, "Worker threads");
  cmd->add_option("--beta", f.beta, "AIME uncertainty-rate tolerance (m/step)");
  cmd->add_option("--delta", f.delta, "Homotopy quantization (rad)");
  cmd->add_option("--dmax", f.dmax, "Maximum tree depth");
  cmd->add_option("--horizon", f.horizon, "Prediction horizon (steps)");
  cmd->add_option("--p", f.p, "Chance-constraint collision probability");
  cmd->add_option("--gamma", f.gamma, "Decision-tracking weight");
  cmd->add_option("--command", f.args.command,
                  "Ego route: left | straight | right | none | lane ids separated by commas");
}

mind::cli::RunConfig build_config(const Flags& f) {
  mind::cli::RunConfig cfg;
  std::string path = f.config;
  if (path.empty()) {
    if (const char* env = std::getenv("MIND_KIT_CONFIG"); env && *env) path = env;
  }
  if (!path.empty()) mind::cli::merge_file(cfg, path);
  if (f.seed) cfg.seed = *f.seed;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (f.beta) cfg.aime.beta = *f.beta;
  if (f.delta) cfg.aime.delta = *f.delta;
  if (f.dmax) cfg.aime.d_max = *f.dmax;
  if (f.horizon) {
    cfg.aime.horizon = *f.horizon;
    cfg.predictor.horizon = *f.horizon;
  }
  if (f.p) cfg.planner.p = *f.p;
  if (f.gamma) cfg.planner.gamma = *f.gamma;
  if (f.planner) cfg.sim.planner = mind::sim::parse_variant(*f.planner);
  return cfg;
}

std::vector<std::string> default_fixtures() {
  const std::string dir = MIND_KIT_FIXTURE_DIR;
  return {dir + "/straight_road.json", dir + "/merge.json", dir + "/t_intersection.json",
          dir + "/intersection_4way.json"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scenario-tree prediction and contingency planning toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto* predict = app.add_subcommand("predict", "Scene prediction for a scenario");
  add_common(predict, f, true);
  predict->add_option("--svg", f.args.svg, "Write an SVG of the prediction");

  auto* tree = app.add_subcommand("tree", "Build a scenario tree");
  add_common(tree, f, true);
  tree->add_option("--strategy", f.strategy, "ss | aime | bf");
  tree->add_option("--svg", f.args.svg, "Write an SVG of the tree");

  auto* plan = app.add_subcommand("plan", "Plan a trajectory tree and select a policy");
  add_common(plan, f, true);
  plan->add_option("--strategy", f.strategy, "ss | aime | bf");
  plan->add_option("--svg", f.args.svg, "Write an SVG of the selected plan");

  auto* sim = app.add_subcommand("sim", "Closed-loop simulation of one episode");
  add_common(sim, f, true);
  sim->add_option("--planner", f.planner, "mind | nn+cp | mb+cp | none");
  sim->add_option("--log", f.args.log, "EpisodeLog JSONL path");

  auto* bench = app.add_subcommand("bench", "Strategy and planner comparison tables (CSV)");
  add_common(bench, f, false);
  bench->add_option("--fixtures", f.args.fixtures, "Scenario files for the strategy table");
  bench->add_option("--compare", f.args.compare_scenario, "Scenario for the planner table");
  bench->add_option("--planners", f.args.planners, "Planner variants to compare")->delimiter(',');
  bench->add_option("--seeds", f.args.seeds, "Number of seeds for the planner table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return mind::cli::kInput;
  }

  return mind::cli::run_guarded(
      [&]() -> int {
        const auto cfg = build_config(f);
        if (f.strategy) f.args.strategy = *f.strategy;
        if (*predict) return mind::cli::cmd_predict(f.args, cfg, std::cout);
        if (*tree) return mind::cli::cmd_tree(f.args, cfg, std::cout);
        if (*plan) return mind::cli::cmd_plan(f.args, cfg, std::cout);
        if (*sim) return mind::cli::cmd_sim(f.args, cfg, std::cout);
        if (f.args.fixtures.empty()) f.args.fixtures = default_fixtures();
        if (f.args.compare_scenario.empty())
          f.args.compare_scenario = std::string(MIND_KIT_FIXTURE_DIR) + "/adversarial_intersection.json";
        return mind::cli::cmd_bench(f.args, cfg, std::cout);
      },
      std::cerr);
}
